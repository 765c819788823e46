//! Compressed sparse row storage for graph structure and propagation
//! matrices.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Binary symmetric adjacency pattern. Rows are sorted, self-loops and
/// duplicate edges are rejected at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Adjacency {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
        }
    }

    /// Builds the pattern from undirected edges given once each. Either
    /// orientation is accepted; `(u, v)` and `(v, u)` together count as a
    /// duplicate.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut degree = vec![0usize; n];
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {i} is a self-loop on node {u}")));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        for d in &degree {
            indptr.push(indptr.last().unwrap() + d);
        }
        let mut fill = indptr.clone();
        let mut indices = vec![0usize; indptr[n]];
        for &(u, v) in edges {
            indices[fill[u]] = v;
            fill[u] += 1;
            indices[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            let row = &mut indices[indptr[i]..indptr[i + 1]];
            row.sort_unstable();
            if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge between {i} and {}",
                    w[0]
                )));
            }
        }
        Ok(Adjacency { n, indptr, indices })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.indices.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges with `u < v`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|u| self.neighbors(u).iter().all(|&v| self.has_edge(v, u)))
    }
}

/// Real-valued square CSR matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub(crate) fn from_parts(
        n: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(indptr.len(), n + 1);
        debug_assert_eq!(indices.len(), values.len());
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// Sparse-dense product `self · x`.
    pub fn matmul(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.n {
            return Err(Error::shape(
                "sparse matmul",
                format!("{} rows", self.n),
                format!("{} rows", x.nrows()),
            ));
        }
        let mut out = Array2::zeros((self.n, x.ncols()));
        for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out_row.scaled_add(v, &x.row(j));
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
        })
    }
}
