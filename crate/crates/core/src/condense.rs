//! Distribution-matching condensation of an incoming graph into a
//! budget-sized, self-loop-only replay graph.
//!
//! Each outer step draws a fresh untrained encoder. For every class the
//! class-mean embedding of the condensed nodes is pulled towards the
//! class-mean embedding of the incoming graph's training nodes, and one
//! plain gradient step is taken on the condensed features.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{gcn_backward, gcn_forward, init_random_encoder, Activation, Architecture, EncoderConfig, GcnParams};
use crate::graph::{normalize_adjacency, Adjacency, Graph, NormalizedAdjacency, Split};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Copy features of randomly chosen training nodes of the same class.
    #[default]
    Sample,
    /// Standard normal features.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondenseConfig {
    /// Number of random encoders (outer iterations).
    pub encoders: usize,
    pub encoder: EncoderConfig,
    pub feature_lr: f64,
    pub init_mode: InitMode,
    /// Draw encoders and their target statistics on the rayon pool. Updates
    /// are still applied in encoder order, so results match sequential mode.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        CondenseConfig {
            encoders: 200,
            encoder: EncoderConfig::gcn(512, 512),
            feature_lr: 0.01,
            init_mode: InitMode::Sample,
            parallel: false,
        }
    }
}

impl CondenseConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.encoder.output == 0 {
            return Err(Error::InvalidArgument("condensation encoder needs output >= 1".into()));
        }
        if !(self.feature_lr > 0.0 && self.feature_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("feature_lr must be positive, got {}", self.feature_lr)));
        }
        Ok(())
    }
}

/// Synthetic replay graph. Only the features are learned; the structure is
/// fixed to self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedGraph {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    source_task: usize,
}

impl CondensedGraph {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize, source_task: usize) -> Result<Self> {
        if features.nrows() != labels.len() || labels.is_empty() {
            return Err(Error::shape("condensed graph", format!("{} feature rows", labels.len()), features.nrows()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!("condensed label {y} outside 0..{num_classes}")));
        }
        Ok(CondensedGraph {
            features,
            labels,
            num_classes,
            source_task,
        })
    }

    /// Reads back a condensed graph stored as an edgeless all-train graph.
    pub fn from_graph(g: &Graph, source_task: usize) -> Result<Self> {
        if g.adjacency().num_edges() != 0 {
            return Err(Error::InvalidGraph("a condensed graph has no edges besides self-loops".into()));
        }
        CondensedGraph::new(g.features().to_owned(), g.labels().to_vec(), g.num_classes(), source_task)
    }

    pub fn with_source_task(mut self, task: usize) -> Self {
        self.source_task = task;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn source_task(&self) -> usize {
        self.source_task
    }

    pub fn adjacency(&self) -> NormalizedAdjacency {
        NormalizedAdjacency::identity(self.len())
    }

    /// Edgeless graph with every node marked train.
    pub fn to_graph(&self) -> Graph {
        Graph::new(
            Adjacency::empty(self.len()),
            self.features.clone(),
            self.labels.clone(),
            vec![Split::Train; self.len()],
            self.num_classes,
        )
        .expect("condensed graph invariants")
    }
}

/// Splits `budget` across classes in proportion to `counts`, each class
/// receiving at least one slot. Largest-remainder rounding; ties go to the
/// lower index.
pub fn apportion(counts: &[usize], budget: usize) -> Result<Vec<usize>> {
    if budget < counts.len() {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} is smaller than the {} classes to cover",
            counts.len()
        )));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("no nodes to apportion".into()));
    }
    let ideal: Vec<f64> = counts.iter().map(|&c| budget as f64 * c as f64 / total as f64).collect();
    let mut alloc: Vec<usize> = ideal.iter().map(|q| (q.floor() as usize).max(1)).collect();
    // pick the extreme key, preferring the lower index on ties
    let pick = |key: &dyn Fn(usize) -> f64, eligible: &dyn Fn(usize) -> bool| {
        (0..counts.len())
            .filter(|&i| eligible(i))
            .max_by(|&a, &b| key(a).total_cmp(&key(b)).then(b.cmp(&a)))
            .expect("an eligible class exists")
    };
    while alloc.iter().sum::<usize>() < budget {
        let i = pick(&|i| ideal[i] - alloc[i] as f64, &|_| true);
        alloc[i] += 1;
    }
    while alloc.iter().sum::<usize>() > budget {
        let i = pick(&|i| alloc[i] as f64 - ideal[i], &|i| alloc[i] > 1);
        alloc[i] -= 1;
    }
    Ok(alloc)
}

/// Classes present (ascending), their slot counts and their training nodes.
pub(crate) type Quotas = (Vec<usize>, Vec<usize>, Vec<Vec<usize>>);

/// Per-class node quotas over the training nodes of `g`.
pub(crate) fn class_quotas(g: &Graph, budget: usize) -> Result<Quotas> {
    let train = g.train_nodes();
    if train.is_empty() {
        return Err(Error::InvalidArgument("graph has no training nodes".into()));
    }
    let classes = g.classes_of(&train);
    let by_class = g.nodes_by_class(&train);
    let members: Vec<Vec<usize>> = classes.iter().map(|&c| by_class[c].clone()).collect();
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let quotas = apportion(&counts, budget)?;
    Ok((classes, quotas, members))
}

/// Initial condensed graph: labels follow the training-node class ratio,
/// features are sampled from same-class training nodes (or noise).
pub fn init_condensed(g: &Graph, budget: usize, mode: InitMode, seed: u64) -> Result<CondensedGraph> {
    let (classes, quotas, members) = class_quotas(g, budget)?;
    let mut rng = seed::rng(seed);
    let d = g.feature_dim();
    let mut features = Array2::zeros((budget, d));
    let mut labels = Vec::with_capacity(budget);
    let mut row = 0;
    for ((&c, &q), pool) in classes.iter().zip(&quotas).zip(&members) {
        let picks: Vec<usize> = match mode {
            InitMode::Sample => {
                let mut shuffled = pool.clone();
                shuffled.shuffle(&mut rng);
                let mut picks: Vec<usize> = shuffled.into_iter().take(q).collect();
                while picks.len() < q {
                    picks.push(pool[rng.random_range(0..pool.len())]);
                }
                picks
            }
            InitMode::Noise => Vec::new(),
        };
        for k in 0..q {
            let mut dst = features.row_mut(row);
            match picks.get(k) {
                Some(&src) => dst.assign(&g.features().row(src)),
                None => dst.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            }
            labels.push(c);
            row += 1;
        }
    }
    CondensedGraph::new(features, labels, g.num_classes(), 0)
}

/// Class-conditional embedding means and class ratios of the original graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTargets {
    classes: Vec<usize>,
    ratios: Vec<f64>,
    means: Array2<f64>,
}

impl ClassTargets {
    pub fn from_embeddings(e: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Self> {
        if e.nrows() != labels.len() || labels.is_empty() {
            return Err(Error::shape("class targets", format!("{} embedding rows", labels.len()), e.nrows()));
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let mut means = Array2::zeros((classes.len(), e.ncols()));
        let mut counts = vec![0usize; classes.len()];
        for (row, &y) in e.rows().into_iter().zip(labels) {
            let k = classes.binary_search(&y).unwrap();
            means.row_mut(k).scaled_add(1.0, &row);
            counts[k] += 1;
        }
        for (mut m, &c) in means.rows_mut().into_iter().zip(&counts) {
            m /= c as f64;
        }
        let ratios = counts.iter().map(|&c| c as f64 / labels.len() as f64).collect();
        Ok(ClassTargets { classes, ratios, means })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn ratio(&self, class: usize) -> Option<f64> {
        self.classes.binary_search(&class).ok().map(|k| self.ratios[k])
    }

    pub fn mean(&self, class: usize) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.classes.binary_search(&class).ok().map(|k| self.means.row(k))
    }

    fn check(&self, labels: &[usize]) -> Result<()> {
        match labels.iter().find(|&&y| self.classes.binary_search(&y).is_err()) {
            Some(y) => Err(Error::InvalidArgument(format!(
                "condensed class {y} does not occur in the original graph"
            ))),
            None => Ok(()),
        }
    }

    fn condensed_mean(e: ArrayView2<'_, f64>, labels: &[usize], class: usize) -> (Array1<f64>, usize) {
        let mut sum = Array1::zeros(e.ncols());
        let mut n = 0;
        for (row, &y) in e.rows().into_iter().zip(labels) {
            if y == class {
                sum += &row;
                n += 1;
            }
        }
        if n > 0 {
            sum /= n as f64;
        }
        (sum, n)
    }

    /// Summand of one class: `r_c ‖mean(E_c) − mean(Ẽ_c)‖²` and its gradient
    /// with respect to `Ẽ` (zero outside class `c`'s rows).
    pub fn class_term(&self, class: usize, e_cond: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
        self.check(labels)?;
        let k = self
            .classes
            .binary_search(&class)
            .map_err(|_| Error::InvalidArgument(format!("class {class} does not occur in the original graph")))?;
        let mut grad = Array2::zeros(e_cond.dim());
        let (mean, n) = Self::condensed_mean(e_cond, labels, class);
        if n == 0 {
            return Ok((0.0, grad));
        }
        let diff = &mean - &self.means.row(k);
        let loss = self.ratios[k] * diff.dot(&diff);
        let scaled = diff * (2.0 * self.ratios[k] / n as f64);
        for (mut g, &y) in grad.rows_mut().into_iter().zip(labels) {
            if y == class {
                g.assign(&scaled);
            }
        }
        Ok((loss, grad))
    }

    /// Sum of the class terms over every class present in `labels`.
    pub fn loss(&self, e_cond: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
        self.check(labels)?;
        let mut present = labels.to_vec();
        present.sort_unstable();
        present.dedup();
        present
            .into_iter()
            .map(|c| self.class_term(c, e_cond, labels).map(|(l, _)| l))
            .sum()
    }

    pub fn grad(&self, e_cond: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Array2<f64>> {
        self.check(labels)?;
        let mut present = labels.to_vec();
        present.sort_unstable();
        present.dedup();
        let mut total = Array2::zeros(e_cond.dim());
        for c in present {
            total += &self.class_term(c, e_cond, labels)?.1;
        }
        Ok(total)
    }
}

/// Class-ratio-weighted squared distance between class-mean embeddings,
/// summed over the classes present in the condensed labels.
pub fn mmd_loss(e: ArrayView2<'_, f64>, labels: &[usize], e_cond: ArrayView2<'_, f64>, labels_cond: &[usize]) -> Result<f64> {
    ClassTargets::from_embeddings(e, labels)?.loss(e_cond, labels_cond)
}

/// Gradient of [`mmd_loss`] with respect to the condensed embeddings.
pub fn mmd_grad(e: ArrayView2<'_, f64>, labels: &[usize], e_cond: ArrayView2<'_, f64>, labels_cond: &[usize]) -> Result<Array2<f64>> {
    ClassTargets::from_embeddings(e, labels)?.grad(e_cond, labels_cond)
}

/// Class-mean embeddings of `nodes` under one encoder. The mean is taken
/// before the last linear map, which is exact up to rounding and avoids
/// materializing every node's embedding.
pub fn class_targets(
    adj: &NormalizedAdjacency,
    g: &Graph,
    nodes: &[usize],
    params: &GcnParams,
    cfg: &EncoderConfig,
) -> Result<ClassTargets> {
    let x = g.features();
    let mut prop = adj.propagate(x)?;
    if cfg.architecture == Architecture::Sgc {
        for _ in 1..cfg.depth {
            prop = adj.propagate(prop.view())?;
        }
    }
    let mut pre = prop.dot(&params.w1);
    let last = match cfg.architecture {
        Architecture::Gcn => {
            if cfg.activation == Activation::Relu {
                pre.mapv_inplace(|v| v.max(0.0));
            }
            adj.propagate(pre.view())?
        }
        Architecture::Sgc => pre,
    };
    let labels: Vec<usize> = nodes.iter().map(|&i| g.labels()[i]).collect();
    let rows = last.select(Axis(0), nodes);
    let hidden = ClassTargets::from_embeddings(rows.view(), &labels)?;
    Ok(ClassTargets {
        means: hidden.means.dot(&params.w2),
        ..hidden
    })
}

fn encoder_seed(seed: u64, p: usize) -> u64 {
    seed::derive(seed, &[1, p as u64])
}

/// One descent step per class against a single encoder.
fn match_encoder(
    x_cond: &mut Array2<f64>,
    labels: &[usize],
    adj_cond: &NormalizedAdjacency,
    params: &GcnParams,
    targets: &ClassTargets,
    cfg: &CondenseConfig,
) -> Result<()> {
    for &c in targets.classes() {
        if !labels.contains(&c) {
            continue;
        }
        let (e_cond, cache) = gcn_forward(adj_cond, x_cond.view(), params, &cfg.encoder)?;
        let (_, d_e) = targets.class_term(c, e_cond.view(), labels)?;
        let grads = gcn_backward(&cache, d_e.view())?;
        x_cond.scaled_add(-cfg.feature_lr, &grads.x);
    }
    Ok(())
}

/// Condenses the training nodes of `g` into a `budget`-node graph.
pub fn condense(g: &Graph, budget: usize, cfg: &CondenseConfig, seed: u64) -> Result<CondensedGraph> {
    cfg.validate()?;
    let init = init_condensed(g, budget, cfg.init_mode, seed::derive(seed, &[0]))?;
    if cfg.encoders == 0 {
        return Ok(init);
    }
    let adj = normalize_adjacency(g);
    let adj_cond = init.adjacency();
    let train = g.train_nodes();
    let d = g.feature_dim();
    let CondensedGraph {
        features: mut x_cond,
        labels,
        num_classes,
        source_task,
    } = init;

    let draw = |p: usize| -> Result<(GcnParams, ClassTargets)> {
        let params = init_random_encoder(&cfg.encoder, d, encoder_seed(seed, p));
        let targets = class_targets(&adj, g, &train, &params, &cfg.encoder)?;
        Ok((params, targets))
    };

    if cfg.parallel {
        let chunk = (2 * rayon::current_num_threads()).max(1);
        let mut start = 0;
        while start < cfg.encoders {
            let end = (start + chunk).min(cfg.encoders);
            let drawn: Vec<_> = (start..end).into_par_iter().map(draw).collect::<Result<_>>()?;
            for (params, targets) in &drawn {
                match_encoder(&mut x_cond, &labels, &adj_cond, params, targets, cfg)?;
            }
            start = end;
        }
    } else {
        for p in 0..cfg.encoders {
            let (params, targets) = draw(p)?;
            match_encoder(&mut x_cond, &labels, &adj_cond, &params, &targets, cfg)?;
        }
    }
    CondensedGraph::new(x_cond, labels, num_classes, source_task)
}

/// Mean of the full matching loss over independently seeded encoders.
pub fn mean_mmd(g: &Graph, cond: &CondensedGraph, encoder: &EncoderConfig, seeds: &[u64]) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no encoder seeds".into()));
    }
    let adj = normalize_adjacency(g);
    let adj_cond = cond.adjacency();
    let train = g.train_nodes();
    let mut total = 0.0;
    for &s in seeds {
        let params = init_random_encoder(encoder, g.feature_dim(), s);
        let targets = class_targets(&adj, g, &train, &params, encoder)?;
        let (e_cond, _) = gcn_forward(&adj_cond, cond.features(), &params, encoder)?;
        total += targets.loss(e_cond.view(), cond.labels())?;
    }
    Ok(total / seeds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn labelled(adj: Adjacency, x: Array2<f64>, labels: Vec<usize>, classes: usize) -> Graph {
        let n = labels.len();
        Graph::new(adj, x, labels, vec![Split::Train; n], classes).unwrap()
    }

    fn two_class(n_per: usize, d: usize, seed: u64) -> Graph {
        let n = 2 * n_per;
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        let edges: Vec<_> = (1..n).filter(|i| i % n_per != 0).map(|i| (i - 1, i)).collect();
        labelled(Adjacency::from_edges(n, &edges).unwrap(), x, (0..n).map(|i| i / n_per).collect(), 2)
    }

    fn small_cfg(encoders: usize) -> CondenseConfig {
        CondenseConfig {
            encoders,
            encoder: EncoderConfig::gcn(16, 8),
            ..CondenseConfig::default()
        }
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(&[5, 5], 4).unwrap(), vec![2, 2]);
        assert_eq!(apportion(&[5, 5], 2).unwrap(), vec![1, 1]);
        assert_eq!(apportion(&[7, 3], 3).unwrap(), vec![2, 1]);
        // floor of one per class even for tiny classes
        assert_eq!(apportion(&[98, 1, 1], 4).unwrap(), vec![2, 1, 1]);
        assert!(apportion(&[1, 1, 1], 2).is_err());
    }

    #[test]
    fn init_labels_follow_class_ratio() {
        let g = two_class(5, 3, 0);
        let c = init_condensed(&g, 4, InitMode::Sample, 1).unwrap();
        assert_eq!(c.labels(), &[0, 0, 1, 1]);
        let c = init_condensed(&g, 2, InitMode::Noise, 1).unwrap();
        assert_eq!(c.labels(), &[0, 1]);
        assert!(init_condensed(&g, 1, InitMode::Sample, 1).is_err());
    }

    #[test]
    fn sampled_init_copies_distinct_same_class_rows() {
        let g = two_class(5, 3, 7);
        let c = init_condensed(&g, 6, InitMode::Sample, 3).unwrap();
        let mut seen = Vec::new();
        for (row, &y) in c.features().rows().into_iter().zip(c.labels()) {
            let src = (0..g.num_nodes()).find(|&i| g.features().row(i) == row).expect("row copied from g");
            assert_eq!(g.labels()[src], y);
            seen.push(src);
        }
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn mmd_single_class_example() {
        let e = array![[1.0, 0.0], [0.0, 1.0]];
        let ec = array![[0.0, 0.0]];
        assert_abs_diff_eq!(mmd_loss(e.view(), &[0, 0], ec.view(), &[0]).unwrap(), 0.5, epsilon = 1e-15);
        let g = mmd_grad(e.view(), &[0, 0], ec.view(), &[0]).unwrap();
        assert_eq!(g, array![[-1.0, -1.0]]);
    }

    #[test]
    fn mmd_class_ratio_weight() {
        let e = array![[1.0, 1.0], [2.0, 2.0], [2.0, 2.0], [2.0, 2.0]];
        let ec = array![[0.0, 0.0], [2.0, 2.0]];
        let loss = mmd_loss(e.view(), &[0, 1, 1, 1], ec.view(), &[0, 1]).unwrap();
        assert_abs_diff_eq!(loss, 0.25 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mmd_matched_means_vanish() {
        let e = array![[1.0, 3.0], [3.0, 1.0], [5.0, 5.0]];
        let ec = array![[2.0, 2.0], [5.0, 5.0]];
        assert_eq!(mmd_loss(e.view(), &[0, 0, 1], ec.view(), &[0, 1]).unwrap(), 0.0);
        assert!(mmd_grad(e.view(), &[0, 0, 1], ec.view(), &[0, 1]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mmd_rejects_unknown_condensed_class() {
        let e = array![[1.0], [2.0]];
        let ec = array![[0.0]];
        assert!(mmd_loss(e.view(), &[0, 0], ec.view(), &[1]).is_err());
        assert!(mmd_grad(e.view(), &[0, 0], ec.view(), &[1]).is_err());
    }

    #[test]
    fn mmd_grad_matches_finite_differences() {
        let mut rng = seed::rng(11);
        let mut normal = || rng.sample::<f64, _>(StandardNormal);
        let e = Array2::from_shape_fn((7, 3), |_| normal());
        let labels = [0, 1, 2, 0, 1, 2, 2];
        let mut ec = Array2::from_shape_fn((4, 3), |_| normal());
        let lc = [0, 1, 2, 2];
        let grad = mmd_grad(e.view(), &labels, ec.view(), &lc).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            for j in 0..3 {
                let v = ec[[i, j]];
                ec[[i, j]] = v + h;
                let up = mmd_loss(e.view(), &labels, ec.view(), &lc).unwrap();
                ec[[i, j]] = v - h;
                let down = mmd_loss(e.view(), &labels, ec.view(), &lc).unwrap();
                ec[[i, j]] = v;
                assert_abs_diff_eq!(grad[[i, j]], (up - down) / (2.0 * h), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn class_targets_match_full_forward() {
        let g = two_class(6, 4, 2);
        let adj = normalize_adjacency(&g);
        let cfg = EncoderConfig::gcn(10, 5);
        let params = init_random_encoder(&cfg, 4, 9);
        let nodes = vec![0, 2, 3, 7, 8, 11];
        let fast = class_targets(&adj, &g, &nodes, &params, &cfg).unwrap();
        let (e, _) = gcn_forward(&adj, g.features(), &params, &cfg).unwrap();
        let labels: Vec<usize> = nodes.iter().map(|&i| g.labels()[i]).collect();
        let slow = ClassTargets::from_embeddings(e.select(Axis(0), &nodes).view(), &labels).unwrap();
        assert_eq!(fast.classes(), slow.classes());
        for &c in slow.classes() {
            assert_eq!(fast.ratio(c), slow.ratio(c));
            for (a, b) in fast.mean(c).unwrap().iter().zip(slow.mean(c).unwrap()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_encoders_returns_initialization() {
        let g = two_class(5, 3, 4);
        let cfg = small_cfg(0);
        let out = condense(&g, 4, &cfg, 21).unwrap();
        let init = init_condensed(&g, 4, cfg.init_mode, seed::derive(21, &[0])).unwrap();
        assert_eq!(out, init);
    }

    #[test]
    fn identical_features_are_a_fixed_point() {
        let v = [0.5, -1.25, 2.0];
        let x = Array2::from_shape_fn((4, 3), |(_, j)| v[j]);
        let g = labelled(Adjacency::empty(4), x, vec![0; 4], 1);
        let adj = normalize_adjacency(&g);
        let params = init_random_encoder(&EncoderConfig::gcn(16, 8), 3, 5);
        let targets = class_targets(&adj, &g, &g.train_nodes(), &params, &EncoderConfig::gcn(16, 8)).unwrap();
        let init = init_condensed(&g, 2, InitMode::Sample, 0).unwrap();
        let (ec, _) = gcn_forward(&init.adjacency(), init.features(), &params, &EncoderConfig::gcn(16, 8)).unwrap();
        assert_abs_diff_eq!(targets.loss(ec.view(), init.labels()).unwrap(), 0.0, epsilon = 1e-24);

        let out = condense(&g, 2, &small_cfg(20), 0).unwrap();
        for row in out.features().rows() {
            for (a, b) in row.iter().zip(v) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn only_features_change() {
        let g = two_class(8, 4, 5);
        let cfg = CondenseConfig {
            init_mode: InitMode::Noise,
            ..small_cfg(10)
        };
        let init = init_condensed(&g, 4, InitMode::Noise, seed::derive(3, &[0])).unwrap();
        let out = condense(&g, 4, &cfg, 3).unwrap();
        assert_eq!(out.labels(), init.labels());
        assert_eq!(out.adjacency().matrix(), init.adjacency().matrix());
        assert_eq!(out.adjacency().matrix(), &crate::graph::CsrMatrix::identity(4));
        assert_ne!(out.features(), init.features());
    }

    #[test]
    fn deterministic_and_parallel_matches_sequential() {
        let g = two_class(8, 4, 6);
        let cfg = small_cfg(25);
        let a = condense(&g, 4, &cfg, 8).unwrap();
        let b = condense(&g, 4, &cfg, 8).unwrap();
        assert_eq!(a, b);
        let par = condense(&g, 4, &CondenseConfig { parallel: true, ..cfg }, 8).unwrap();
        assert_eq!(a, par);
    }

    #[test]
    fn descends_on_a_small_task() {
        let g = two_class(10, 4, 9);
        let cfg = CondenseConfig {
            init_mode: InitMode::Noise,
            ..small_cfg(100)
        };
        let seeds: Vec<u64> = (1000..1005).collect();
        let init = init_condensed(&g, 2, InitMode::Noise, seed::derive(4, &[0])).unwrap();
        let out = condense(&g, 2, &cfg, 4).unwrap();
        let before = mean_mmd(&g, &init, &cfg.encoder, &seeds).unwrap();
        let after = mean_mmd(&g, &out, &cfg.encoder, &seeds).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn config_validation() {
        assert!(CondenseConfig::default().validate().is_ok());
        assert!(CondenseConfig { feature_lr: 0.0, ..CondenseConfig::default() }.validate().is_err());
    }
}
