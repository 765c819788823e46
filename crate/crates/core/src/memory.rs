//! Replay memory: one replayed graph per completed task.

use std::borrow::Cow;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::condense::{class_quotas, CondensedGraph};
use crate::error::{Error, Result};
use crate::graph::io::{load_dataset, write_dataset, FeatureFormat};
use crate::graph::Graph;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankPolicy {
    /// Condensed graphs.
    Cgm,
    /// Uniformly sampled training nodes.
    RandomSample,
    /// Per-class quotas filled with the nodes nearest their class mean.
    ClassBalancedSample,
    /// The whole incoming graph, as stored by joint training.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayedGraph {
    Condensed(CondensedGraph),
    Sampled { task: usize, graph: Graph },
}

impl ReplayedGraph {
    pub fn task(&self) -> usize {
        match self {
            ReplayedGraph::Condensed(c) => c.source_task(),
            ReplayedGraph::Sampled { task, .. } => *task,
        }
    }

    pub fn with_task(self, task: usize) -> Self {
        match self {
            ReplayedGraph::Condensed(c) => ReplayedGraph::Condensed(c.with_source_task(task)),
            ReplayedGraph::Sampled { graph, .. } => ReplayedGraph::Sampled { task, graph },
        }
    }

    pub fn graph(&self) -> Cow<'_, Graph> {
        match self {
            ReplayedGraph::Condensed(c) => Cow::Owned(c.to_graph()),
            ReplayedGraph::Sampled { graph, .. } => Cow::Borrowed(graph),
        }
    }

    pub fn num_nodes(&self) -> usize {
        match self {
            ReplayedGraph::Condensed(c) => c.len(),
            ReplayedGraph::Sampled { graph, .. } => graph.num_nodes(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        match self {
            ReplayedGraph::Condensed(c) => c.labels(),
            ReplayedGraph::Sampled { graph, .. } => graph.labels(),
        }
    }
}

impl From<CondensedGraph> for ReplayedGraph {
    fn from(c: CondensedGraph) -> Self {
        ReplayedGraph::Condensed(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    policy: BankPolicy,
    entries: Vec<ReplayedGraph>,
}

impl MemoryBank {
    pub fn new(policy: BankPolicy) -> Self {
        MemoryBank {
            policy,
            entries: Vec::new(),
        }
    }

    pub fn policy(&self) -> BankPolicy {
        self.policy
    }

    pub fn entries(&self) -> &[ReplayedGraph] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.entries.iter().map(ReplayedGraph::num_nodes).sum()
    }

    /// Appends the replayed graph of the next task. Earlier entries are
    /// carried over unchanged.
    pub fn update(mut self, replayed: ReplayedGraph) -> Result<MemoryBank> {
        let expected = self.entries.len() + 1;
        if replayed.task() != expected {
            return Err(Error::InvalidArgument(format!(
                "bank holds {} entries, expected the replayed graph of task {expected}, got task {}",
                self.entries.len(),
                replayed.task()
            )));
        }
        self.entries.push(replayed);
        Ok(self)
    }

    /// Bank holding only the first `k` entries.
    pub fn prefix(&self, k: usize) -> MemoryBank {
        MemoryBank {
            policy: self.policy,
            entries: self.entries[..k.min(self.entries.len())].to_vec(),
        }
    }
}

pub fn update_memory(bank: MemoryBank, replayed: ReplayedGraph) -> Result<MemoryBank> {
    bank.update(replayed)
}

/// Per-task node budget: `ceil(ratio * total_train_nodes / num_tasks)`.
pub fn budget_for_task(total_train_nodes: usize, budget_ratio: f64, num_tasks: usize) -> Result<usize> {
    if !(budget_ratio > 0.0 && budget_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("budget ratio must lie in (0, 1], got {budget_ratio}")));
    }
    if num_tasks == 0 || total_train_nodes == 0 {
        return Err(Error::InvalidArgument("budget needs at least one task and one training node".into()));
    }
    let raw = budget_ratio * total_train_nodes as f64 / num_tasks as f64;
    // absorb representation error in the ratio, e.g. 0.01 * 2000 / 10
    Ok(((raw - 1e-9 * raw.max(1.0)).ceil() as usize).max(1))
}

/// Builds a replayed graph by sampling from the training nodes of `g`.
pub fn sample_replayed(g: &Graph, budget: usize, policy: BankPolicy, seed: u64) -> Result<ReplayedGraph> {
    let chosen: Vec<usize> = match policy {
        BankPolicy::Cgm => {
            return Err(Error::InvalidArgument("the cgm policy condenses rather than samples".into()));
        }
        BankPolicy::Full => return Ok(ReplayedGraph::Sampled { task: 0, graph: g.clone() }),
        BankPolicy::RandomSample => {
            let train = g.train_nodes();
            let classes = g.classes_of(&train);
            if budget < classes.len() {
                return Err(Error::InvalidArgument(format!(
                    "budget {budget} is smaller than the {} classes to cover",
                    classes.len()
                )));
            }
            let mut pool = train;
            pool.shuffle(&mut seed::rng(seed));
            pool.truncate(budget);
            pool
        }
        BankPolicy::ClassBalancedSample => {
            let (_, quotas, members) = class_quotas(g, budget)?;
            let x = g.features();
            let mut chosen = Vec::with_capacity(budget);
            for (pool, &q) in members.iter().zip(&quotas) {
                let mut mean = ndarray::Array1::<f64>::zeros(g.feature_dim());
                for &i in pool {
                    mean += &x.row(i);
                }
                mean /= pool.len() as f64;
                let mut ranked: Vec<(f64, usize)> = pool
                    .iter()
                    .map(|&i| {
                        let diff = &x.row(i) - &mean;
                        (diff.dot(&diff), i)
                    })
                    .collect();
                ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                chosen.extend(ranked.iter().take(q).map(|&(_, i)| i));
            }
            chosen
        }
    };
    let (graph, _) = g.induced_subgraph(&chosen)?;
    Ok(ReplayedGraph::Sampled { task: 0, graph })
}

/// Disjoint union of every bank entry, in task order.
pub fn merge_bank(bank: &MemoryBank) -> Result<Graph> {
    if bank.is_empty() {
        return Err(Error::InvalidArgument("cannot merge an empty memory bank".into()));
    }
    let graphs: Vec<Cow<'_, Graph>> = bank.entries.iter().map(ReplayedGraph::graph).collect();
    Graph::disjoint_union(graphs.iter().map(|g| g.as_ref()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub policy: BankPolicy,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task: usize,
    pub condensed: bool,
    pub budget: usize,
    pub nodes: usize,
    pub dir: String,
}

/// Writes the bank as one dataset directory per entry plus `manifest.json`.
/// `budgets[i]` is the node budget that entry `i` was built under.
pub fn save_bank(dir: impl AsRef<Path>, bank: &MemoryBank, budgets: &[usize]) -> Result<BankManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (i, entry) in bank.entries.iter().enumerate() {
        let name = format!("task_{:03}", entry.task());
        write_dataset(dir.join(&name), &entry.graph(), FeatureFormat::Csv)?;
        entries.push(ManifestEntry {
            task: entry.task(),
            condensed: matches!(entry, ReplayedGraph::Condensed(_)),
            budget: budgets.get(i).copied().unwrap_or(entry.num_nodes()),
            nodes: entry.num_nodes(),
            dir: name,
        });
    }
    let manifest = BankManifest {
        policy: bank.policy,
        entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

pub fn load_bank(dir: impl AsRef<Path>) -> Result<MemoryBank> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: BankManifest = serde_json::from_str(&text)?;
    let mut bank = MemoryBank::new(manifest.policy);
    for e in &manifest.entries {
        let g = load_dataset(dir.join(&e.dir))?;
        let replayed = if e.condensed {
            ReplayedGraph::Condensed(CondensedGraph::from_graph(&g, e.task)?)
        } else {
            ReplayedGraph::Sampled { task: e.task, graph: g }
        };
        bank = bank.update(replayed)?;
    }
    Ok(bank)
}
