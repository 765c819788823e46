//! Continual training over an incremental-output GCN classifier.

mod optim;

use std::borrow::Cow;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use optim::AdamState;

use crate::condense::{condense, CondenseConfig};
use crate::error::{Error, Result};
use crate::gnn::{gcn_backward_params, gcn_forward, glorot, weighted_cross_entropy, EncoderConfig, GcnParams};
use crate::graph::{normalize_adjacency, Graph, NormalizedAdjacency, Split, Task, TaskStream};
use crate::memory::{budget_for_task, merge_bank, sample_replayed, BankPolicy, MemoryBank, ReplayedGraph};
use crate::metrics::PerformanceMatrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IlMode {
    #[default]
    ClassIl,
    TaskIl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Incoming graph only.
    Finetune,
    /// Every incoming graph seen so far.
    Joint,
    /// Incoming graph plus memory, unit weights.
    ReplayPlain,
    /// Incoming graph plus memory, weighted by the other side's node count.
    ReplayErgnn,
    /// Per-class losses weighted by inverse class size.
    ReplaySsm,
    /// The memory bank alone, including the current task's replayed graph.
    Tim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainScheme {
    pub kind: SchemeKind,
    pub policy: BankPolicy,
}

impl TrainScheme {
    /// Condensed memory trained in memory.
    pub fn cat() -> Self {
        TrainScheme {
            kind: SchemeKind::Tim,
            policy: BankPolicy::Cgm,
        }
    }

    pub fn finetune() -> Self {
        TrainScheme {
            kind: SchemeKind::Finetune,
            policy: BankPolicy::Cgm,
        }
    }

    pub fn joint() -> Self {
        TrainScheme {
            kind: SchemeKind::Joint,
            policy: BankPolicy::Full,
        }
    }

    fn validate(&self) -> Result<()> {
        let full = self.policy == BankPolicy::Full;
        match self.kind {
            SchemeKind::Joint if !full => Err(Error::InvalidArgument("joint training stores full incoming graphs (policy full)".into())),
            SchemeKind::ReplayPlain | SchemeKind::ReplayErgnn | SchemeKind::ReplaySsm | SchemeKind::Tim if full => Err(Error::InvalidArgument(
                "the full policy belongs to joint training".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub seed: u64,
    pub il_mode: IlMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 0.01,
            hidden: 256,
            seed: 0,
            il_mode: IlMode::ClassIl,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.hidden == 0 {
            return Err(Error::InvalidArgument(format!("invalid trainer config {self:?}")));
        }
        Ok(())
    }
}

/// Classifier weights, optimizer moments and the stream for output growth.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierState {
    pub params: GcnParams,
    pub optimizer: AdamState,
    seed: u64,
    grown: u64,
}

impl ClassifierState {
    /// Fresh classifier with no output columns.
    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let w1 = glorot(input_dim, hidden, hidden, &mut seed::rng(seed::derive(seed, &[0])));
        let w2 = Array2::zeros((hidden, 0));
        let optimizer = AdamState::zeros(w1.dim(), w2.dim());
        ClassifierState {
            params: GcnParams { w1, w2 },
            optimizer,
            seed,
            grown: 0,
        }
    }

    pub fn num_outputs(&self) -> usize {
        self.params.w2.ncols()
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig::gcn(self.params.w1.ncols(), self.num_outputs())
    }

    pub fn logits(&self, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(gcn_forward(adj, x, &self.params, &self.encoder_config())?.0)
    }
}

/// Appends `new_classes` freshly initialized output columns. Existing
/// weights and their moments are untouched; the new moments start at zero.
pub fn grow_output(mut state: ClassifierState, new_classes: usize) -> ClassifierState {
    if new_classes == 0 {
        return state;
    }
    let hidden = state.params.w2.nrows();
    let total = state.num_outputs() + new_classes;
    state.grown += 1;
    let mut rng = seed::rng(seed::derive(state.seed, &[1, state.grown]));
    let fresh = glorot(hidden, new_classes, total, &mut rng);
    state.params.w2 = concatenate(Axis(1), &[state.params.w2.view(), fresh.view()]).unwrap();
    state.optimizer.grow_columns(new_classes);
    state
}

/// ER-GNN weights `(α, β)` on the incoming and memory losses, from node
/// counts.
pub fn ergnn_weights(incoming_nodes: usize, memory_nodes: usize) -> (f64, f64) {
    let total = (incoming_nodes + memory_nodes) as f64;
    (memory_nodes as f64 / total, incoming_nodes as f64 / total)
}

/// One graph entering the loss, with per-row weights on its training nodes.
#[derive(Debug, Clone)]
pub struct LossPart<'a> {
    pub graph: Cow<'a, Graph>,
    pub rows: Vec<(usize, f64)>,
}

impl<'a> LossPart<'a> {
    fn mean(graph: Cow<'a, Graph>, scale: f64) -> Result<Self> {
        let train = graph.train_nodes();
        if train.is_empty() {
            return Err(Error::InvalidArgument("loss over a graph without training nodes".into()));
        }
        let w = scale / train.len() as f64;
        let rows = train.into_iter().map(|i| (i, w)).collect();
        Ok(LossPart { graph, rows })
    }

    /// Per-class sums weighted by `scale / n_c`.
    fn class_balanced(graph: Cow<'a, Graph>, scale: f64) -> Result<Self> {
        let train = graph.train_nodes();
        let by_class = graph.nodes_by_class(&train);
        let rows = train
            .iter()
            .map(|&i| (i, scale / by_class[graph.labels()[i]].len() as f64))
            .collect();
        Ok(LossPart { graph, rows })
    }
}

/// Loss parts of a replay scheme for task `k` (1-based). `memory` is the
/// merged bank of tasks `1..k`, absent at `k = 1`.
pub fn weighted_replay_loss<'a>(
    kind: SchemeKind,
    k: usize,
    incoming: &'a Graph,
    memory: Option<Graph>,
) -> Result<Vec<LossPart<'a>>> {
    if !matches!(kind, SchemeKind::ReplayPlain | SchemeKind::ReplayErgnn | SchemeKind::ReplaySsm) {
        return Err(Error::InvalidArgument(format!("{kind:?} is not a replay scheme")));
    }
    let memory = match (memory, k) {
        (None, 1) => None,
        (None, _) => {
            return Err(Error::InvalidArgument(format!("replay at task {k} needs a non-empty memory bank")));
        }
        (Some(m), _) => Some(m),
    };
    let Some(memory) = memory else {
        return Ok(vec![match kind {
            SchemeKind::ReplaySsm => LossPart::class_balanced(Cow::Borrowed(incoming), 1.0)?,
            _ => LossPart::mean(Cow::Borrowed(incoming), 1.0)?,
        }]);
    };
    match kind {
        SchemeKind::ReplayPlain => Ok(vec![
            LossPart::mean(Cow::Borrowed(incoming), 1.0)?,
            LossPart::mean(Cow::Owned(memory), 1.0)?,
        ]),
        SchemeKind::ReplayErgnn => {
            let (alpha, beta) = ergnn_weights(incoming.num_nodes(), memory.num_nodes());
            Ok(vec![
                LossPart::mean(Cow::Borrowed(incoming), alpha)?,
                LossPart::mean(Cow::Owned(memory), beta)?,
            ])
        }
        _ => Ok(vec![
            LossPart::class_balanced(Cow::Borrowed(incoming), 1.0)?,
            LossPart::class_balanced(Cow::Owned(memory), 1.0)?,
        ]),
    }
}

/// Total loss and summed parameter gradients over the parts.
pub fn loss_and_grads(state: &ClassifierState, parts: &[(LossPart<'_>, NormalizedAdjacency)]) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let cfg = state.encoder_config();
    let mut g1 = Array2::zeros(state.params.w1.dim());
    let mut g2 = Array2::zeros(state.params.w2.dim());
    let mut total = 0.0;
    for (part, adj) in parts {
        let (logits, cache) = gcn_forward(adj, part.graph.features(), &state.params, &cfg)?;
        let (loss, d_logits) = weighted_cross_entropy(logits.view(), part.graph.labels(), &part.rows)?;
        let (d1, d2) = gcn_backward_params(&cache, d_logits.view())?;
        g1 += &d1;
        g2 += &d2;
        total += loss;
    }
    Ok((total, g1, g2))
}

/// Loss parts a scheme trains on for `task`, given the bank after the
/// task's replayed graph has been added.
pub fn training_parts<'a>(task: &'a Task, bank: &MemoryBank, scheme: &TrainScheme) -> Result<Vec<LossPart<'a>>> {
    scheme.validate()?;
    let k = task.index;
    match scheme.kind {
        SchemeKind::Finetune => Ok(vec![LossPart::mean(Cow::Borrowed(&task.incoming), 1.0)?]),
        SchemeKind::Tim | SchemeKind::Joint => {
            if bank.len() != k || bank.policy() != scheme.policy {
                return Err(Error::InvalidArgument(format!(
                    "{:?} at task {k} needs a {:?} bank of {k} entries, got {:?} with {}",
                    scheme.kind,
                    scheme.policy,
                    bank.policy(),
                    bank.len()
                )));
            }
            Ok(vec![LossPart::mean(Cow::Owned(merge_bank(bank)?), 1.0)?])
        }
        kind => {
            if bank.len() + 1 < k {
                return Err(Error::InvalidArgument(format!(
                    "replay at task {k} needs the replayed graphs of tasks 1..{}, bank has {}",
                    k - 1,
                    bank.len()
                )));
            }
            let memory = if k > 1 { Some(merge_bank(&bank.prefix(k - 1))?) } else { None };
            weighted_replay_loss(kind, k, &task.incoming, memory)
        }
    }
}

/// Full-batch Adam training on the scheme's loss for `cfg.epochs` epochs.
pub fn train_task(mut state: ClassifierState, task: &Task, bank: &MemoryBank, scheme: &TrainScheme, cfg: &TrainConfig) -> Result<ClassifierState> {
    cfg.validate()?;
    let needed = task.class_set.iter().max().map_or(0, |m| m + 1);
    if state.num_outputs() < needed {
        return Err(Error::InvalidArgument(format!(
            "classifier has {} outputs, task {} needs {needed}",
            state.num_outputs(),
            task.index
        )));
    }
    if cfg.epochs == 0 {
        return Ok(state);
    }
    let parts: Vec<_> = training_parts(task, bank, scheme)?
        .into_iter()
        .map(|p| {
            let adj = normalize_adjacency(&p.graph);
            (p, adj)
        })
        .collect();
    for _ in 0..cfg.epochs {
        let (_, g1, g2) = loss_and_grads(&state, &parts)?;
        let ClassifierState { params, optimizer, .. } = &mut state;
        optimizer.apply(cfg.lr, &mut params.w1, &g1, &mut params.w2, &g2);
    }
    Ok(state)
}

/// Fraction of `nodes` whose argmax over `allowed` columns (all columns
/// when `None`) equals their label. Ties go to the lowest column.
pub fn accuracy(logits: ArrayView2<'_, f64>, labels: &[usize], nodes: &[usize], allowed: Option<&[usize]>) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("accuracy over no nodes".into()));
    }
    let all: Vec<usize> = (0..logits.ncols()).collect();
    let allowed = allowed.unwrap_or(&all);
    if let Some(&c) = allowed.iter().find(|&&c| c >= logits.ncols()) {
        return Err(Error::InvalidArgument(format!("class {c} has no output column")));
    }
    let correct = nodes
        .iter()
        .filter(|&&i| {
            let row = logits.row(i);
            let best = allowed
                .iter()
                .copied()
                .fold(None, |best: Option<usize>, c| match best {
                    Some(b) if row[b] >= row[c] => Some(b),
                    _ => Some(c),
                });
            best == Some(labels[i])
        })
        .count();
    Ok(correct as f64 / nodes.len() as f64)
}

/// Test accuracy on tasks `1..=k`.
pub fn evaluate(state: &ClassifierState, stream: &TaskStream, k: usize, il_mode: IlMode) -> Result<Vec<f64>> {
    if k == 0 || k > stream.len() {
        return Err(Error::InvalidArgument(format!("cannot evaluate {k} tasks of a {}-task stream", stream.len())));
    }
    let needed = stream.tasks[..k]
        .iter()
        .flat_map(|t| t.class_set.iter())
        .max()
        .map_or(0, |m| m + 1);
    if state.num_outputs() < needed {
        return Err(Error::InvalidArgument(format!(
            "classifier has {} outputs, tasks 1..{k} need {needed}",
            state.num_outputs()
        )));
    }
    stream.tasks[..k]
        .iter()
        .map(|task| {
            let g = &task.incoming;
            let logits = state.logits(&normalize_adjacency(g), g.features())?;
            let test = g.nodes_in(Split::Test);
            let allowed = match il_mode {
                IlMode::ClassIl => None,
                IlMode::TaskIl => Some(task.class_set.as_slice()),
            };
            accuracy(logits.view(), g.labels(), &test, allowed)
        })
        .collect()
}

/// Everything a continual run produces.
#[derive(Debug, Clone)]
pub struct ContinualOutcome {
    pub class_il: PerformanceMatrix,
    pub task_il: PerformanceMatrix,
    pub bank: MemoryBank,
    /// Node budget each task's replayed graph was built under.
    pub budgets: Vec<usize>,
    pub state: ClassifierState,
}

impl ContinualOutcome {
    pub fn matrix(&self, mode: IlMode) -> &PerformanceMatrix {
        match mode {
            IlMode::ClassIl => &self.class_il,
            IlMode::TaskIl => &self.task_il,
        }
    }
}

/// Builds the replayed graph of one task under `policy`.
pub fn replayed_for_task(task: &Task, policy: BankPolicy, budget: usize, condense_cfg: &CondenseConfig, seed: u64) -> Result<ReplayedGraph> {
    let replayed = match policy {
        BankPolicy::Cgm => condense(&task.incoming, budget, condense_cfg, seed)?.into(),
        other => sample_replayed(&task.incoming, budget, other, seed)?,
    };
    Ok(replayed.with_task(task.index))
}

/// Runs the whole stream: per task, grow the head, build and store the
/// replayed graph, train, then evaluate every task seen so far.
pub fn continual_run(
    stream: &TaskStream,
    scheme: &TrainScheme,
    budget_ratio: f64,
    condense_cfg: &CondenseConfig,
    train_cfg: &TrainConfig,
) -> Result<ContinualOutcome> {
    scheme.validate()?;
    train_cfg.validate()?;
    if stream.is_empty() {
        return Err(Error::InvalidArgument("empty task stream".into()));
    }
    let budget = budget_for_task(stream.total_train_nodes(), budget_ratio, stream.len())?;
    let mut state = ClassifierState::new(stream.feature_dim, train_cfg.hidden, seed::derive(train_cfg.seed, &[10]));
    let mut bank = MemoryBank::new(scheme.policy);
    let mut budgets = Vec::new();
    let mut class_il = PerformanceMatrix::default();
    let mut task_il = PerformanceMatrix::default();
    for task in &stream.tasks {
        state = grow_output(state, task.class_set.len());
        if scheme.kind != SchemeKind::Finetune {
            let train = task.incoming.train_nodes();
            let task_budget = budget.max(task.incoming.classes_of(&train).len());
            let task_seed = seed::derive(train_cfg.seed, &[20, task.index as u64]);
            let replayed = if scheme.kind == SchemeKind::Joint {
                ReplayedGraph::Sampled {
                    task: task.index,
                    graph: task.incoming.clone(),
                }
            } else {
                replayed_for_task(task, scheme.policy, task_budget, condense_cfg, task_seed)?
            };
            budgets.push(if scheme.kind == SchemeKind::Joint { replayed.num_nodes() } else { task_budget });
            bank = bank.update(replayed)?;
        }
        state = train_task(state, task, &bank, scheme, train_cfg)?;
        class_il.push_row(evaluate(&state, stream, task.index, IlMode::ClassIl)?)?;
        task_il.push_row(evaluate(&state, stream, task.index, IlMode::TaskIl)?)?;
    }
    Ok(ContinualOutcome {
        class_il,
        task_il,
        bank,
        budgets,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::{CondensedGraph, InitMode};
    use crate::graph::{build_task_stream, sbm_generate, SbmParams, SplitFractions};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn stream(blocks: usize, seed: u64) -> TaskStream {
        let g = sbm_generate(&SbmParams {
            blocks,
            nodes_per_block: 30,
            feature_dim: 8,
            ..SbmParams::standard(seed)
        })
        .unwrap();
        build_task_stream(&g, 2, SplitFractions::default(), seed).unwrap()
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            hidden: 16,
            ..TrainConfig::default()
        }
    }

    fn small_condense() -> CondenseConfig {
        CondenseConfig {
            encoders: 20,
            encoder: EncoderConfig::gcn(32, 32),
            init_mode: InitMode::Sample,
            ..CondenseConfig::default()
        }
    }

    fn parts_with_adj(parts: Vec<LossPart<'_>>) -> Vec<(LossPart<'_>, NormalizedAdjacency)> {
        parts
            .into_iter()
            .map(|p| {
                let adj = normalize_adjacency(&p.graph);
                (p, adj)
            })
            .collect()
    }

    #[test]
    fn grow_zero_is_identity() {
        let s = grow_output(ClassifierState::new(4, 8, 1), 2);
        assert_eq!(grow_output(s.clone(), 0), s);
    }

    #[test]
    fn grow_preserves_old_logits() {
        let st = stream(2, 0);
        let g = &st.tasks[0].incoming;
        let adj = normalize_adjacency(g);
        let s2 = grow_output(ClassifierState::new(8, 16, 3), 2);
        let s2 = train_task(s2, &st.tasks[0], &MemoryBank::new(BankPolicy::Cgm), &TrainScheme::finetune(), &quick(5)).unwrap();
        let before = s2.logits(&adj, g.features()).unwrap();
        let s4 = grow_output(s2.clone(), 2);
        assert_eq!(s4.params.w1, s2.params.w1);
        let after = s4.logits(&adj, g.features()).unwrap();
        assert_eq!(after.slice(ndarray::s![.., ..2]), before);
        assert!(s4.optimizer.m2.slice(ndarray::s![.., 2..]).iter().all(|&v| v == 0.0));
        assert!(s4.optimizer.v2.slice(ndarray::s![.., 2..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grow_twice_matches_once_in_shape() {
        let a = grow_output(grow_output(ClassifierState::new(4, 8, 1), 2), 2);
        let b = grow_output(ClassifierState::new(4, 8, 1), 4);
        assert_eq!(a.params.w2.dim(), b.params.w2.dim());
        assert_eq!(a.optimizer.m2.dim(), b.optimizer.m2.dim());
    }

    #[test]
    fn ergnn_weight_examples() {
        assert_eq!(ergnn_weights(50, 50), (0.5, 0.5));
        let (a, b) = ergnn_weights(90, 10);
        assert_abs_diff_eq!(a, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(a + b, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ssm_with_singleton_classes_is_unweighted_sum() {
        let incoming = CondensedGraph::new(ndarray::array![[1.0, 0.0], [0.0, 1.0]], vec![2, 3], 4, 2).unwrap().to_graph();
        let memory = CondensedGraph::new(ndarray::array![[1.0, 1.0], [-1.0, 0.5]], vec![0, 1], 4, 1).unwrap().to_graph();
        let parts = weighted_replay_loss(SchemeKind::ReplaySsm, 2, &incoming, Some(memory.clone())).unwrap();
        assert!(parts.iter().flat_map(|p| &p.rows).all(|&(_, w)| w == 1.0));

        let state = grow_output(ClassifierState::new(2, 4, 0), 4);
        let (loss, _, _) = loss_and_grads(&state, &parts_with_adj(parts)).unwrap();
        let mut expect = 0.0;
        for g in [&incoming, &memory] {
            let logits = state.logits(&normalize_adjacency(g), g.features()).unwrap();
            for i in 0..2 {
                let (l, _) = weighted_cross_entropy(logits.view(), g.labels(), &[(i, 1.0)]).unwrap();
                expect += l;
            }
        }
        assert_abs_diff_eq!(loss, expect, epsilon = 1e-12);
    }

    #[test]
    fn replay_needs_memory_after_first_task() {
        let st = stream(4, 1);
        assert!(weighted_replay_loss(SchemeKind::ReplayPlain, 2, &st.tasks[1].incoming, None).is_err());
        assert!(weighted_replay_loss(SchemeKind::Tim, 1, &st.tasks[0].incoming, None).is_err());
    }

    #[test]
    fn first_task_replay_matches_finetune() {
        let st = stream(2, 2);
        let task = &st.tasks[0];
        let state = grow_output(ClassifierState::new(8, 16, 5), 2);
        let empty = MemoryBank::new(BankPolicy::Cgm);
        let ft = parts_with_adj(training_parts(task, &empty, &TrainScheme::finetune()).unwrap());
        let (l0, a1, a2) = loss_and_grads(&state, &ft).unwrap();
        for kind in [SchemeKind::ReplayPlain, SchemeKind::ReplayErgnn] {
            let scheme = TrainScheme { kind, policy: BankPolicy::Cgm };
            let rp = parts_with_adj(training_parts(task, &empty, &scheme).unwrap());
            let (l, b1, b2) = loss_and_grads(&state, &rp).unwrap();
            assert_eq!((l, &b1, &b2), (l0, &a1, &a2));
            let trained = train_task(state.clone(), task, &empty, &scheme, &quick(10)).unwrap();
            let reference = train_task(state.clone(), task, &empty, &TrainScheme::finetune(), &quick(10)).unwrap();
            assert_eq!(trained, reference);
        }
    }

    #[test]
    fn zero_epochs_leave_state_unchanged() {
        let st = stream(2, 3);
        let state = grow_output(ClassifierState::new(8, 16, 5), 2);
        let out = train_task(state.clone(), &st.tasks[0], &MemoryBank::new(BankPolicy::Cgm), &TrainScheme::finetune(), &quick(0)).unwrap();
        assert_eq!(out, state);
    }

    #[test]
    fn tim_on_single_entry_equals_finetune_on_it() {
        let st = stream(2, 4);
        let task = &st.tasks[0];
        let replayed = replayed_for_task(task, BankPolicy::Cgm, 4, &small_condense(), 9).unwrap();
        let bank = MemoryBank::new(BankPolicy::Cgm).update(replayed.clone()).unwrap();
        let as_task = Task {
            index: 1,
            class_set: task.class_set.clone(),
            incoming: replayed.graph().into_owned(),
            original_ids: (0..replayed.num_nodes()).collect(),
        };
        let state = grow_output(ClassifierState::new(8, 16, 6), 2);
        let tim = train_task(state.clone(), task, &bank, &TrainScheme::cat(), &quick(30)).unwrap();
        let ft = train_task(state, &as_task, &MemoryBank::new(BankPolicy::Cgm), &TrainScheme::finetune(), &quick(30)).unwrap();
        assert_eq!(tim, ft);
    }

    #[test]
    fn tim_ignores_incoming_test_features() {
        let st = stream(2, 5);
        let task = st.tasks[0].clone();
        let replayed = replayed_for_task(&task, BankPolicy::Cgm, 4, &small_condense(), 2).unwrap();
        let bank = MemoryBank::new(BankPolicy::Cgm).update(replayed).unwrap();
        let state = grow_output(ClassifierState::new(8, 16, 7), 2);
        let a = train_task(state.clone(), &task, &bank, &TrainScheme::cat(), &quick(20)).unwrap();
        let mut mutated = task.clone();
        let test = mutated.incoming.nodes_in(Split::Test);
        for i in test {
            mutated.incoming.features_mut().row_mut(i).fill(1e3);
        }
        let b = train_task(state, &mutated, &bank, &TrainScheme::cat(), &quick(20)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scheme_and_bank_must_agree() {
        let st = stream(2, 6);
        let state = grow_output(ClassifierState::new(8, 16, 0), 2);
        let empty = MemoryBank::new(BankPolicy::Cgm);
        assert!(train_task(state.clone(), &st.tasks[0], &empty, &TrainScheme::cat(), &quick(1)).is_err());
        let bad_joint = TrainScheme { kind: SchemeKind::Joint, policy: BankPolicy::Cgm };
        assert!(train_task(state.clone(), &st.tasks[0], &empty, &bad_joint, &quick(1)).is_err());
        let bad_tim = TrainScheme { kind: SchemeKind::Tim, policy: BankPolicy::Full };
        assert!(train_task(state, &st.tasks[0], &empty, &bad_tim, &quick(1)).is_err());
        let narrow = ClassifierState::new(8, 16, 0);
        assert!(train_task(narrow, &st.tasks[0], &empty, &TrainScheme::finetune(), &quick(1)).is_err());
    }

    #[test]
    fn training_lowers_the_bank_loss() {
        let st = stream(2, 7);
        let task = &st.tasks[0];
        let replayed = replayed_for_task(task, BankPolicy::Cgm, 4, &small_condense(), 1).unwrap();
        let bank = MemoryBank::new(BankPolicy::Cgm).update(replayed).unwrap();
        let state = grow_output(ClassifierState::new(8, 16, 8), 2);
        let parts = parts_with_adj(training_parts(task, &bank, &TrainScheme::cat()).unwrap());
        let (before, _, _) = loss_and_grads(&state, &parts).unwrap();
        let trained = train_task(state, task, &bank, &TrainScheme::cat(), &quick(50)).unwrap();
        let (after, _, _) = loss_and_grads(&trained, &parts).unwrap();
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn one_hot_logits_score_perfectly() {
        let labels = vec![0, 2, 1, 3, 2];
        let logits = Array2::from_shape_fn((5, 4), |(i, j)| f64::from(u8::from(labels[i] == j)));
        let nodes: Vec<usize> = (0..5).collect();
        assert_eq!(accuracy(logits.view(), &labels, &nodes, None).unwrap(), 1.0);
        assert_eq!(accuracy(logits.view(), &labels, &nodes, Some(&[0, 1, 2, 3])).unwrap(), 1.0);
        assert!(accuracy(logits.view(), &labels, &[], None).is_err());
        assert!(accuracy(logits.view(), &labels, &nodes, Some(&[7])).is_err());
    }

    #[test]
    fn ties_break_to_lowest_column() {
        let logits = Array2::zeros((2, 3));
        assert_eq!(accuracy(logits.view(), &[0, 1], &[0, 1], None).unwrap(), 0.5);
        assert_eq!(accuracy(logits.view(), &[0, 1], &[1], Some(&[1, 2])).unwrap(), 1.0);
    }

    #[test]
    fn random_logits_give_chance_task_accuracy() {
        let n = 4000;
        let mut rng = seed::rng(12);
        let logits = Array2::from_shape_fn((n, 4), |_| rng.sample::<f64, _>(StandardNormal));
        let labels: Vec<usize> = (0..n).map(|i| 2 + i % 2).collect();
        let nodes: Vec<usize> = (0..n).collect();
        let acc = accuracy(logits.view(), &labels, &nodes, Some(&[2, 3])).unwrap();
        // four standard errors of a fair coin over n draws
        assert!((acc - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{acc}");
    }

    #[test]
    fn single_task_run() {
        let st = stream(2, 8);
        let out = continual_run(&st, &TrainScheme::cat(), 0.01, &small_condense(), &quick(30)).unwrap();
        assert_eq!(out.class_il.num_tasks(), 1);
        let direct = evaluate(&out.state, &st, 1, IlMode::ClassIl).unwrap();
        assert_eq!(out.class_il.get(1, 1), Some(direct[0]));
        assert_eq!(out.bank.len(), 1);
        assert!(evaluate(&out.state, &st, 2, IlMode::ClassIl).is_err());
    }

    #[test]
    fn runs_are_deterministic_and_task_il_dominates() {
        let st = stream(6, 9);
        for scheme in [TrainScheme::cat(), TrainScheme::finetune(), TrainScheme::joint()] {
            let a = continual_run(&st, &scheme, 0.05, &small_condense(), &quick(20)).unwrap();
            let b = continual_run(&st, &scheme, 0.05, &small_condense(), &quick(20)).unwrap();
            assert_eq!(a.class_il, b.class_il);
            assert_eq!(a.state, b.state);
            for (ci, ti) in a.class_il.rows().iter().zip(a.task_il.rows()) {
                for (c, t) in ci.iter().zip(ti) {
                    assert!(c <= t);
                }
            }
            if scheme.kind == SchemeKind::Finetune {
                assert!(a.bank.is_empty());
            } else {
                assert_eq!(a.bank.len(), 3);
            }
        }
    }

    #[test]
    fn joint_on_repeated_task_is_stable() {
        let base = stream(2, 10);
        let task = &base.tasks[0];
        let repeated = TaskStream {
            tasks: (1..=3).map(|k| Task { index: k, ..task.clone() }).collect(),
            num_classes: 2,
            feature_dim: base.feature_dim,
        };
        let out = continual_run(
            &repeated,
            &TrainScheme::joint(),
            1.0,
            &small_condense(),
            &TrainConfig {
                il_mode: IlMode::TaskIl,
                ..quick(60)
            },
        )
        .unwrap();
        let m = &out.task_il;
        for i in 1..=3 {
            for j in 1..=i {
                assert_eq!(m.get(i, j), m.get(i, 1));
                assert!((m.get(i, j).unwrap() - m.get(1, 1).unwrap()).abs() <= 0.1);
            }
        }
    }
}
