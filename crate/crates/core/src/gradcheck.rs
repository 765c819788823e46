//! Central finite-difference checks of the analytic gradients, as run by
//! the `gradcheck` subcommand.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::condense::ClassTargets;
use crate::error::Result;
use crate::gnn::{gcn_backward, gcn_forward, init_random_encoder, Activation, EncoderConfig, GcnParams};
use crate::graph::{Adjacency, NormalizedAdjacency};
use crate::seed;

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub checked: usize,
    /// Entries whose perturbation crossed a ReLU kink.
    pub skipped: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_err < self.tolerance
    }
}

/// `|a − b| / max(|a|, |b|, 1e-6)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn random_adjacency(n: usize, rng: &mut impl Rng) -> NormalizedAdjacency {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < 0.4 {
                edges.push((u, v));
            }
        }
    }
    NormalizedAdjacency::from_adjacency(&Adjacency::from_edges(n, &edges).expect("valid edges"))
}

struct Tally {
    max: f64,
    checked: usize,
    skipped: usize,
}

impl Tally {
    fn new() -> Self {
        Tally { max: 0.0, checked: 0, skipped: 0 }
    }

    fn finish(self, name: &str, tolerance: f64) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            max_rel_err: self.max,
            tolerance,
            checked: self.checked,
            skipped: self.skipped,
        }
    }
}

/// Perturbs each entry of `target` by ±STEP and compares the central
/// difference of `objective` with `analytic`. `signs` returns the ReLU mask
/// pattern; entries whose perturbation changes it are skipped.
/// Objective value plus the ReLU sign pattern it was evaluated under.
type Objective<'a> = &'a dyn Fn(&Array2<f64>) -> (f64, Vec<bool>);

fn compare(tally: &mut Tally, target: &mut Array2<f64>, analytic: &Array2<f64>, objective: Objective<'_>) {
    let (_, base) = objective(target);
    for idx in 0..target.len() {
        let (r, c) = (idx / target.ncols(), idx % target.ncols());
        let orig = target[[r, c]];
        target[[r, c]] = orig + STEP;
        let (plus, sp) = objective(target);
        target[[r, c]] = orig - STEP;
        let (minus, sm) = objective(target);
        target[[r, c]] = orig;
        if sp != base || sm != base {
            tally.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * STEP);
        tally.max = tally.max.max(rel_err(analytic[[r, c]], numeric));
        tally.checked += 1;
    }
}

fn relu_signs(cfg: &EncoderConfig, pre: ArrayView2<'_, f64>) -> Vec<bool> {
    match cfg.activation {
        Activation::Relu => pre.iter().map(|&v| v > 0.0).collect(),
        Activation::None => Vec::new(),
    }
}

/// Checks `dW1`, `dW2` and `dX` of the encoder on random 5–10 node graphs
/// under the scalar objective `Σ G ⊙ E`.
pub fn check_encoder(cfg_of: impl Fn(usize, usize) -> EncoderConfig, seeds: std::ops::Range<u64>, tolerance: f64) -> Result<[CheckResult; 3]> {
    let mut tallies = [Tally::new(), Tally::new(), Tally::new()];
    for s in seeds {
        let mut rng = seed::rng(seed::derive(s, &[0x6a]));
        let n = rng.random_range(5..=10);
        let d = rng.random_range(2..=5);
        let cfg = cfg_of(rng.random_range(3..=6), rng.random_range(2..=4));
        let adj = random_adjacency(n, &mut rng);
        let mut x = gaussian(n, d, &mut rng);
        let mut params = init_random_encoder(&cfg, d, seed::derive(s, &[0x6b]));
        let (e, cache) = gcn_forward(&adj, x.view(), &params, &cfg)?;
        let upstream = gaussian(e.nrows(), e.ncols(), &mut rng);
        let grads = gcn_backward(&cache, upstream.view())?;
        drop(cache);

        let eval = |x: &Array2<f64>, p: &GcnParams| {
            let (e, cache) = gcn_forward(&adj, x.view(), p, &cfg).expect("shapes fixed");
            ((&e * &upstream).sum(), relu_signs(&cfg, cache.pre_activation()))
        };
        let p0 = params.clone();
        compare(&mut tallies[2], &mut x, &grads.x, &|x| eval(x, &p0));
        let x0 = x.clone();
        let w2 = params.w2.clone();
        compare(&mut tallies[0], &mut params.w1, &grads.w1, &|w1| {
            eval(&x0, &GcnParams { w1: w1.clone(), w2: w2.clone() })
        });
        let w1 = params.w1.clone();
        compare(&mut tallies[1], &mut params.w2, &grads.w2, &|w2| {
            eval(&x0, &GcnParams { w1: w1.clone(), w2: w2.clone() })
        });
    }
    let arch = format!("{:?}", cfg_of(1, 1).architecture).to_lowercase();
    let [a, b, c] = tallies;
    Ok([
        a.finish(&format!("{arch} dW1"), tolerance),
        b.finish(&format!("{arch} dW2"), tolerance),
        c.finish(&format!("{arch} dX"), tolerance),
    ])
}

/// Checks the gradient of the class-weighted mean-matching loss with
/// respect to the condensed embeddings.
pub fn check_mmd_grad(seeds: std::ops::Range<u64>, tolerance: f64) -> Result<CheckResult> {
    let mut tally = Tally::new();
    for s in seeds {
        let mut rng = seed::rng(seed::derive(s, &[0x6c]));
        let n = rng.random_range(5..=10);
        let b = rng.random_range(2..=4);
        let o = rng.random_range(2..=5);
        let classes = 2;
        let e = gaussian(n, o, &mut rng);
        let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        let labels_cond: Vec<usize> = (0..b).map(|i| i % classes).collect();
        let mut e_cond = gaussian(b, o, &mut rng);
        let targets = ClassTargets::from_embeddings(e.view(), &labels)?;
        let analytic = targets.grad(e_cond.view(), &labels_cond)?;
        compare(&mut tally, &mut e_cond, &analytic, &|ec| {
            (targets.loss(ec.view(), &labels_cond).expect("classes match"), Vec::new())
        });
    }
    Ok(tally.finish("mmd_grad", tolerance))
}

/// Checks the gradient of the full matching objective with respect to the
/// condensed features, chained through the encoder.
pub fn check_condensation(seeds: std::ops::Range<u64>, tolerance: f64) -> Result<CheckResult> {
    let mut tally = Tally::new();
    for s in seeds {
        let mut rng = seed::rng(seed::derive(s, &[0x6d]));
        let n = rng.random_range(5..=10);
        let b = rng.random_range(2..=4);
        let d = rng.random_range(2..=5);
        let cfg = EncoderConfig::gcn(rng.random_range(3..=6), rng.random_range(2..=4));
        let adj = random_adjacency(n, &mut rng);
        let x = gaussian(n, d, &mut rng);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let labels_cond: Vec<usize> = (0..b).map(|i| i % 2).collect();
        let params = init_random_encoder(&cfg, d, seed::derive(s, &[0x6e]));
        let (e, _) = gcn_forward(&adj, x.view(), &params, &cfg)?;
        let targets = ClassTargets::from_embeddings(e.view(), &labels)?;
        let adj_cond = NormalizedAdjacency::identity(b);
        let mut x_cond = gaussian(b, d, &mut rng);
        let (e_cond, cache) = gcn_forward(&adj_cond, x_cond.view(), &params, &cfg)?;
        let analytic = gcn_backward(&cache, targets.grad(e_cond.view(), &labels_cond)?.view())?.x;
        drop(cache);
        compare(&mut tally, &mut x_cond, &analytic, &|xc| {
            let (ec, cache) = gcn_forward(&adj_cond, xc.view(), &params, &cfg).expect("shapes fixed");
            (targets.loss(ec.view(), &labels_cond).expect("classes match"), relu_signs(&cfg, cache.pre_activation()))
        });
    }
    Ok(tally.finish("condensation objective dX", tolerance))
}

/// The full suite over `seeds` random seeds.
pub fn run_all(seeds: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    out.extend(check_encoder(EncoderConfig::gcn, 0..seeds, 1e-4)?);
    out.extend(check_encoder(|h, o| EncoderConfig::sgc(h, o, 2), 0..seeds, 1e-4)?);
    out.push(check_condensation(0..seeds, 1e-4)?);
    out.push(check_mmd_grad(0..seeds, 1e-6)?);
    Ok(out)
}
