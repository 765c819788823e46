use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Adjacency, Graph, Split, SplitFractions};
use crate::error::{Error, Result};
use crate::seed;

/// Stochastic block model with Gaussian block-centred features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_separation: f64,
    pub seed: u64,
}

impl SbmParams {
    /// Ten-class, five-task desk-scale benchmark stream.
    pub fn standard(seed: u64) -> Self {
        SbmParams {
            blocks: 10,
            nodes_per_block: 100,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            feature_separation: 3.0,
            seed,
        }
    }
}

/// Samples an SBM graph. Node `i` belongs to block `i / nodes_per_block`;
/// its label is the block id and its features are drawn from
/// `N(separation * e_block, I)`. Split marks are assigned 60/20/20 per block.
pub fn sbm_generate(p: &SbmParams) -> Result<Graph> {
    if p.blocks == 0 || p.nodes_per_block == 0 {
        return Err(Error::InvalidArgument("sbm needs at least one block and one node per block".into()));
    }
    if !(0.0 <= p.p_out && p.p_out <= p.p_in && p.p_in <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sbm requires 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
            p.p_in, p.p_out
        )));
    }
    if p.blocks > p.feature_dim {
        return Err(Error::InvalidArgument(format!(
            "{} blocks need feature_dim >= blocks, got {}",
            p.blocks, p.feature_dim
        )));
    }
    let n = p.blocks * p.nodes_per_block;
    let block = |i: usize| i / p.nodes_per_block;

    let mut rng = seed::rng(seed::derive(p.seed, &[0]));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if block(u) == block(v) { p.p_in } else { p.p_out };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }

    let mut rng = seed::rng(seed::derive(p.seed, &[1]));
    let mut features = Array2::zeros((n, p.feature_dim));
    for ((i, j), x) in features.indexed_iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = z + if j == block(i) { p.feature_separation } else { 0.0 };
    }

    let labels: Vec<usize> = (0..n).map(block).collect();
    let mut split = vec![Split::Train; n];
    let mut rng = seed::rng(seed::derive(p.seed, &[2]));
    if p.nodes_per_block >= 3 {
        let (train, val, _) = SplitFractions::default().counts(p.nodes_per_block);
        for b in 0..p.blocks {
            let mut members: Vec<usize> = (b * p.nodes_per_block..(b + 1) * p.nodes_per_block).collect();
            members.shuffle(&mut rng);
            for &i in &members[train..train + val] {
                split[i] = Split::Val;
            }
            for &i in &members[train + val..] {
                split[i] = Split::Test;
            }
        }
    }

    Graph::new(Adjacency::from_edges(n, &edges)?, features, labels, split, p.blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(blocks: usize, per: usize, p_in: f64, p_out: f64) -> SbmParams {
        SbmParams {
            blocks,
            nodes_per_block: per,
            p_in,
            p_out,
            feature_dim: 8,
            feature_separation: 3.0,
            seed: 5,
        }
    }

    #[test]
    fn deterministic_regime_gives_disjoint_triangles() {
        let g = sbm_generate(&params(2, 3, 1.0, 0.0)).unwrap();
        let edges: Vec<_> = g.adjacency().edges().collect();
        assert_eq!(edges, vec![(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
    }

    #[test]
    fn zero_probabilities_give_no_edges() {
        let g = sbm_generate(&params(3, 10, 0.0, 0.0)).unwrap();
        assert_eq!(g.adjacency().num_edges(), 0);
    }

    #[test]
    fn intra_block_edges_within_three_sigma() {
        let g = sbm_generate(&SbmParams {
            blocks: 4,
            nodes_per_block: 50,
            p_in: 0.3,
            p_out: 0.02,
            feature_dim: 8,
            feature_separation: 3.0,
            seed: 2024,
        })
        .unwrap();
        let intra = g.adjacency().edges().filter(|&(u, v)| u / 50 == v / 50).count() as f64;
        let trials: f64 = 4.0 * (50.0 * 49.0 / 2.0);
        let mean = trials * 0.3;
        let sd = (trials * 0.3 * 0.7).sqrt();
        assert!((intra - mean).abs() <= 3.0 * sd, "intra={intra} mean={mean} sd={sd}");
    }

    #[test]
    fn too_many_blocks_for_dimension() {
        let mut p = params(4, 5, 0.5, 0.1);
        p.feature_dim = 3;
        assert!(sbm_generate(&p).is_err());
    }

    #[test]
    fn rejects_inverted_probabilities() {
        assert!(sbm_generate(&params(2, 5, 0.1, 0.5)).is_err());
    }

    #[test]
    fn feature_means_track_blocks() {
        let g = sbm_generate(&params(2, 400, 0.0, 0.0)).unwrap();
        let x = g.features();
        let m0: f64 = (0..400).map(|i| x[[i, 0]]).sum::<f64>() / 400.0;
        let m1: f64 = (0..400).map(|i| x[[i, 1]]).sum::<f64>() / 400.0;
        assert!((m0 - 3.0).abs() < 0.2 && m1.abs() < 0.2);
    }
}
