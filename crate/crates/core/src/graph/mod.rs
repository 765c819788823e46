//! Graph representation, adjacency normalization and task streams.

mod csr;
pub mod io;
mod sbm;
mod stream;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use csr::{Adjacency, CsrMatrix};
pub use sbm::{sbm_generate, SbmParams};
pub use stream::{build_task_stream, SplitFractions, Task, TaskStream};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train, val or test)")),
        }
    }
}

/// Undirected, unweighted node-classification graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Adjacency,
    features: Array2<f64>,
    labels: Vec<usize>,
    split: Vec<Split>,
    num_classes: usize,
}

impl Graph {
    pub fn new(
        adjacency: Adjacency,
        features: Array2<f64>,
        labels: Vec<usize>,
        split: Vec<Split>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = adjacency.num_nodes();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidGraph("feature dimension is zero".into()));
        }
        if features.nrows() != n {
            return Err(Error::InvalidGraph(format!(
                "{} feature rows for {n} nodes",
                features.nrows()
            )));
        }
        if labels.len() != n || split.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} labels and {} split marks for {n} nodes",
                labels.len(),
                split.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::InvalidGraph(format!(
                "node {i} has label {y}, outside 0..{num_classes}"
            )));
        }
        Ok(Graph {
            adjacency,
            features,
            labels,
            split,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn features_mut(&mut self) -> &mut Array2<f64> {
        &mut self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    /// Node ids carrying the given split mark, ascending.
    pub fn nodes_in(&self, split: Split) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        self.nodes_in(Split::Train)
    }

    /// Distinct labels among the given nodes, ascending.
    pub fn classes_of(&self, nodes: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.num_classes];
        for &i in nodes {
            seen[self.labels[i]] = true;
        }
        (0..self.num_classes).filter(|&c| seen[c]).collect()
    }

    /// Per-class node lists over `nodes`, indexed by class id.
    pub fn nodes_by_class(&self, nodes: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for &i in nodes {
            out[self.labels[i]].push(i);
        }
        out
    }

    pub(crate) fn with_split(self, split: Vec<Split>) -> Result<Graph> {
        Graph::new(self.adjacency, self.features, self.labels, split, self.num_classes)
    }

    /// Node-induced subgraph. Nodes are compacted in ascending original-id
    /// order; the returned vector maps new ids back to original ids.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<(Graph, Vec<usize>)> {
        let n = self.num_nodes();
        let mut keep: Vec<usize> = nodes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() {
            return Err(Error::InvalidArgument("induced subgraph of an empty node set".into()));
        }
        if let Some(&bad) = keep.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "node {bad} is outside 0..{n}"
            )));
        }
        let mut local = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            local[old] = new;
        }
        let edges: Vec<(usize, usize)> = keep
            .iter()
            .flat_map(|&u| {
                let local = &local;
                self.adjacency
                    .neighbors(u)
                    .iter()
                    .filter(move |&&v| u < v && local[v] != usize::MAX)
                    .map(move |&v| (local[u], local[v]))
            })
            .collect();
        let adjacency = Adjacency::from_edges(keep.len(), &edges)?;
        let features = self.features.select(Axis(0), &keep);
        let labels = keep.iter().map(|&i| self.labels[i]).collect();
        let split = keep.iter().map(|&i| self.split[i]).collect();
        let g = Graph::new(adjacency, features, labels, split, self.num_classes)?;
        Ok((g, keep))
    }

    /// Block-diagonal union of graphs sharing a feature dimension. The class
    /// space is the widest of the parts.
    pub fn disjoint_union<'a, I>(parts: I) -> Result<Graph>
    where
        I: IntoIterator<Item = &'a Graph>,
    {
        let parts: Vec<&Graph> = parts.into_iter().collect();
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("disjoint union of no graphs".into()))?;
        let d = first.feature_dim();
        let mut edges = Vec::new();
        let mut labels = Vec::new();
        let mut split = Vec::new();
        let mut offset = 0;
        let mut num_classes = 0;
        for g in &parts {
            if g.feature_dim() != d {
                return Err(Error::shape("disjoint union", format!("d={d}"), format!("d={}", g.feature_dim())));
            }
            edges.extend(g.adjacency.edges().map(|(u, v)| (u + offset, v + offset)));
            labels.extend_from_slice(&g.labels);
            split.extend_from_slice(&g.split);
            offset += g.num_nodes();
            num_classes = num_classes.max(g.num_classes);
        }
        let views: Vec<_> = parts.iter().map(|g| g.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::InvalidGraph(e.to_string()))?;
        Graph::new(Adjacency::from_edges(offset, &edges)?, features, labels, split, num_classes)
    }
}

/// Symmetric GCN propagation matrix `D^{-1/2} (A + I) D^{-1/2}`, with `D`
/// the degree matrix of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(CsrMatrix);

impl NormalizedAdjacency {
    pub fn from_adjacency(adj: &Adjacency) -> Self {
        let n = adj.num_nodes();
        let deg: Vec<f64> = (0..n).map(|i| (adj.degree(i) + 1) as f64).collect();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(2 * adj.num_edges() + n);
        let mut values = Vec::with_capacity(indices.capacity());
        indptr.push(0);
        for i in 0..n {
            let nb = adj.neighbors(i);
            let split_at = nb.partition_point(|&j| j < i);
            let cols = nb[..split_at]
                .iter()
                .copied()
                .chain(std::iter::once(i))
                .chain(nb[split_at..].iter().copied());
            for j in cols {
                indices.push(j);
                values.push(1.0 / (deg[i] * deg[j]).sqrt());
            }
            indptr.push(indices.len());
        }
        NormalizedAdjacency(CsrMatrix::from_parts(n, indptr, indices, values))
    }

    /// Propagation matrix of a self-loop-only graph.
    pub fn identity(n: usize) -> Self {
        NormalizedAdjacency(CsrMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn propagate(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.0.matmul(x)
    }
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    NormalizedAdjacency::from_adjacency(g.adjacency())
}
