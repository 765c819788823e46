//! GCN and SGC encoders with manual reverse-mode gradients.

mod loss;

use ndarray::{Array2, ArrayView2, Zip};
use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

pub use loss::{softmax_cross_entropy, weighted_cross_entropy};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcn,
    Sgc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub architecture: Architecture,
    pub hidden: usize,
    pub output: usize,
    /// Applied between the two GCN layers; SGC is always linear.
    pub activation: Activation,
    /// Propagation steps for SGC.
    pub depth: usize,
}

impl EncoderConfig {
    pub fn gcn(hidden: usize, output: usize) -> Self {
        EncoderConfig {
            architecture: Architecture::Gcn,
            hidden,
            output,
            activation: Activation::Relu,
            depth: 2,
        }
    }

    pub fn sgc(hidden: usize, output: usize, depth: usize) -> Self {
        EncoderConfig {
            architecture: Architecture::Sgc,
            hidden,
            output,
            activation: Activation::None,
            depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.depth == 0 {
            return Err(Error::InvalidArgument(format!(
                "encoder needs hidden >= 1 and depth >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Two weight matrices, `w1: d x h` and `w2: h x o`. No biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl GcnParams {
    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }
}

pub(crate) fn glorot(rows: usize, cols: usize, fan_out: usize, rng: &mut impl rand::Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

/// Glorot-uniform weights, `U(-sqrt(6/(fan_in+fan_out)), +sqrt(...))` per
/// layer.
pub fn init_random_encoder(cfg: &EncoderConfig, input_dim: usize, seed: u64) -> GcnParams {
    let mut rng = seed::rng(seed);
    let w1 = glorot(input_dim, cfg.hidden, cfg.hidden, &mut rng);
    let w2 = glorot(cfg.hidden, cfg.output, cfg.output, &mut rng);
    GcnParams { w1, w2 }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<'a> {
    adj: &'a NormalizedAdjacency,
    params: &'a GcnParams,
    cfg: EncoderConfig,
    /// `ÂX` for GCN, `Â^L X` for SGC.
    propagated: Array2<f64>,
    /// `propagated · W1`.
    pre_activation: Array2<f64>,
    /// `Â · act(pre_activation)`; GCN only.
    hidden_propagated: Option<Array2<f64>>,
    output_shape: (usize, usize),
}

impl ForwardCache<'_> {
    /// `propagated · W1`, before the activation.
    pub fn pre_activation(&self) -> ArrayView2<'_, f64> {
        self.pre_activation.view()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub x: Array2<f64>,
}

fn activate(cfg: &EncoderConfig, z: &Array2<f64>) -> Array2<f64> {
    match cfg.activation {
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::None => z.clone(),
    }
}

/// GCN: `E = Â · act(Â X W1) · W2`. SGC: `E = Â^L X W1 W2`.
pub fn gcn_forward<'a>(
    adj: &'a NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    params: &'a GcnParams,
    cfg: &EncoderConfig,
) -> Result<(Array2<f64>, ForwardCache<'a>)> {
    let (n, d) = x.dim();
    if adj.dim() != n {
        return Err(Error::shape("gcn_forward", format!("X with {} rows", adj.dim()), format!("{n} rows")));
    }
    if params.w1.nrows() != d {
        return Err(Error::shape("gcn_forward", format!("X with {} columns (W1 is {:?})", params.w1.nrows(), params.w1.dim()), format!("{d} columns")));
    }
    if params.w2.nrows() != params.w1.ncols() {
        return Err(Error::shape("gcn_forward", format!("W2 with {} rows", params.w1.ncols()), format!("{:?}", params.w2.dim())));
    }
    let mut propagated = adj.propagate(x)?;
    if cfg.architecture == Architecture::Sgc {
        for _ in 1..cfg.depth {
            propagated = adj.propagate(propagated.view())?;
        }
    }
    let pre_activation = propagated.dot(&params.w1);
    let (out, hidden_propagated) = match cfg.architecture {
        Architecture::Gcn => {
            let hp = adj.propagate(activate(cfg, &pre_activation).view())?;
            (hp.dot(&params.w2), Some(hp))
        }
        Architecture::Sgc => (pre_activation.dot(&params.w2), None),
    };
    let cache = ForwardCache {
        adj,
        params,
        cfg: *cfg,
        propagated,
        pre_activation,
        hidden_propagated,
        output_shape: out.dim(),
    };
    Ok((out, cache))
}

type RawGrads = (Array2<f64>, Array2<f64>, Option<Array2<f64>>);

fn backward_impl(cache: &ForwardCache<'_>, d_out: ArrayView2<'_, f64>, want_x: bool) -> Result<RawGrads> {
    if d_out.dim() != cache.output_shape {
        return Err(Error::shape("gcn_backward", format!("{:?}", cache.output_shape), format!("{:?}", d_out.dim())));
    }
    let p = cache.params;
    let (d_w2, mut d_pre) = match &cache.hidden_propagated {
        Some(hp) => {
            let d_w2 = hp.t().dot(&d_out);
            let d_hp = d_out.dot(&p.w2.t());
            let mut d_h = cache.adj.propagate(d_hp.view())?;
            if cache.cfg.activation == Activation::Relu {
                Zip::from(&mut d_h)
                    .and(&cache.pre_activation)
                    .for_each(|g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
            }
            (d_w2, d_h)
        }
        None => (cache.pre_activation.t().dot(&d_out), d_out.dot(&p.w2.t())),
    };
    let d_w1 = cache.propagated.t().dot(&d_pre);
    let d_x = if want_x {
        d_pre = d_pre.dot(&p.w1.t());
        let steps = match cache.cfg.architecture {
            Architecture::Gcn => 1,
            Architecture::Sgc => cache.cfg.depth,
        };
        for _ in 0..steps {
            d_pre = cache.adj.propagate(d_pre.view())?;
        }
        Some(d_pre)
    } else {
        None
    };
    Ok((d_w1, d_w2, d_x))
}

/// Exact gradients of the forward map given `dE`. Relies on `Â` being
/// symmetric.
pub fn gcn_backward(cache: &ForwardCache<'_>, d_out: ArrayView2<'_, f64>) -> Result<Gradients> {
    let (w1, w2, x) = backward_impl(cache, d_out, true)?;
    Ok(Gradients { w1, w2, x: x.unwrap() })
}

/// Parameter gradients only.
pub fn gcn_backward_params(cache: &ForwardCache<'_>, d_out: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let (w1, w2, _) = backward_impl(cache, d_out, false)?;
    Ok((w1, w2))
}
