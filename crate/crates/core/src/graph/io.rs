//! Dataset directory format.
//!
//! ```text
//! edges.tsv     src<TAB>dst per line, undirected, each edge once
//! nodes.tsv     node_id<TAB>label<TAB>split, ids 0..n-1
//! features.bin  b"GFEA", n: u32 LE, d: u32 LE, n*d f32 LE row-major
//! features.csv  alternative to features.bin: n lines of d decimals
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Adjacency, Graph, Split};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"GFEA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    /// 32-bit binary, the compact default.
    #[default]
    Bin,
    /// Decimal text; round-trips 64-bit values exactly.
    Csv,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(path, lineno, format!("expected 2 tab-separated fields, found {}", fields.len())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("`{s}` is not a non-negative integer")))
        };
        let (u, v) = (parse(fields[0])?, parse(fields[1])?);
        if u >= n || v >= n {
            return Err(parse_err(path, lineno, format!("edge ({u}, {v}) references a node outside 0..{n}")));
        }
        if u == v {
            return Err(parse_err(path, lineno, format!("self-loop on node {u}")));
        }
        let key = (u.min(v), u.max(v));
        if let Some(first) = seen.insert(key, lineno) {
            return Err(parse_err(path, lineno, format!("duplicate of the edge on line {first}")));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_nodes(path: &Path) -> Result<(Vec<usize>, Vec<Split>)> {
    let text = read_text(path)?;
    let mut rows: Vec<(usize, usize, Split, usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(path, lineno, format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("`{s}` is not a non-negative integer")))
        };
        let split = fields[2].trim().parse::<Split>().map_err(|m| parse_err(path, lineno, m))?;
        rows.push((int(fields[0])?, int(fields[1])?, split, lineno));
    }
    let n = rows.len();
    let mut labels = vec![usize::MAX; n];
    let mut split = vec![Split::Train; n];
    for &(id, label, s, lineno) in &rows {
        if id >= n {
            return Err(parse_err(path, lineno, format!("node id {id} breaks contiguity: {n} nodes need ids 0..{n}")));
        }
        if labels[id] != usize::MAX {
            return Err(parse_err(path, lineno, format!("node id {id} appears twice")));
        }
        labels[id] = label;
        split[id] = s;
    }
    Ok((labels, split))
}

fn read_features_bin(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < 12 || &bytes[..4] != FEATURE_MAGIC {
        return Err(fmt("missing GFEA magic header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + 4 * n * d;
    if bytes.len() != expected {
        return Err(fmt(format!("header says {n}x{d} ({expected} bytes), file has {} bytes", bytes.len())));
    }
    let values = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Array2::from_shape_vec((n, d), values).map_err(|e| fmt(e.to_string()))
}

fn read_features_csv(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut d = None;
    let mut n = 0;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("`{s}` is not a number")))
            })
            .collect::<Result<_>>()?;
        match d {
            None => d = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(parse_err(path, lineno, format!("expected {d} values, found {}", row.len())));
            }
            _ => {}
        }
        values.extend(row);
        n += 1;
    }
    Array2::from_shape_vec((n, d.unwrap_or(0)), values).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Reads and validates a dataset directory. The class count is one past the
/// largest label.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let nodes_path = dir.join("nodes.tsv");
    let (labels, split) = parse_nodes(&nodes_path)?;
    let n = labels.len();
    let bin = dir.join("features.bin");
    let csv = dir.join("features.csv");
    let (features, feat_path) = if bin.exists() {
        (read_features_bin(&bin)?, bin)
    } else if csv.exists() {
        (read_features_csv(&csv)?, csv)
    } else {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            msg: "neither features.bin nor features.csv present".into(),
        });
    };
    if features.nrows() != n {
        return Err(Error::Format {
            path: feat_path,
            msg: format!("{} feature rows but nodes.tsv lists {n} nodes", features.nrows()),
        });
    }
    let edges = parse_edges(&dir.join("edges.tsv"), n)?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    Graph::new(Adjacency::from_edges(n, &edges)?, features, labels, split, num_classes)
}

fn create(path: PathBuf) -> Result<BufWriter<fs::File>> {
    fs::File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `g` as a dataset directory, creating it if needed.
pub fn write_dataset(dir: impl AsRef<Path>, g: &Graph, format: FeatureFormat) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| Error::io(p, e)
    };

    let path = dir.join("edges.tsv");
    let mut w = create(path.clone())?;
    for (u, v) in g.adjacency().edges() {
        writeln!(w, "{u}\t{v}").map_err(io(&path))?;
    }
    w.flush().map_err(io(&path))?;

    let path = dir.join("nodes.tsv");
    let mut w = create(path.clone())?;
    for (i, (y, s)) in g.labels().iter().zip(g.split()).enumerate() {
        writeln!(w, "{i}\t{y}\t{s}").map_err(io(&path))?;
    }
    w.flush().map_err(io(&path))?;

    // keep only one feature file so loading is unambiguous
    let (keep, drop) = match format {
        FeatureFormat::Bin => ("features.bin", "features.csv"),
        FeatureFormat::Csv => ("features.csv", "features.bin"),
    };
    let stale = dir.join(drop);
    if stale.exists() {
        fs::remove_file(&stale).map_err(io(&stale))?;
    }
    let path = dir.join(keep);
    let mut w = create(path.clone())?;
    let x = g.features();
    match format {
        FeatureFormat::Bin => {
            w.write_all(FEATURE_MAGIC).map_err(io(&path))?;
            w.write_all(&(x.nrows() as u32).to_le_bytes()).map_err(io(&path))?;
            w.write_all(&(x.ncols() as u32).to_le_bytes()).map_err(io(&path))?;
            for v in x.iter() {
                w.write_all(&(*v as f32).to_le_bytes()).map_err(io(&path))?;
            }
        }
        FeatureFormat::Csv => {
            for row in x.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", line.join(",")).map_err(io(&path))?;
            }
        }
    }
    w.flush().map_err(io(&path))
}
