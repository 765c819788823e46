use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Graph, Split};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Train/val/test counts for `n >= 3` nodes, each at least one.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        debug_assert!(n >= 3);
        let mut train = ((self.train * n as f64).round() as usize).max(1);
        let mut val = ((self.val * n as f64).round() as usize).max(1);
        while train + val >= n {
            if train >= val {
                train -= 1;
            } else {
                val -= 1;
            }
        }
        (train, val, n - train - val)
    }
}

/// One step of the stream: the node-induced graph of a disjoint class group.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    /// 1-based position in the stream.
    pub index: usize,
    /// Global class ids introduced by this task, ascending.
    pub class_set: Vec<usize>,
    pub incoming: Graph,
    /// Maps incoming-graph node ids to ids in the source graph.
    pub original_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn total_train_nodes(&self) -> usize {
        self.tasks.iter().map(|t| t.incoming.train_nodes().len()).sum()
    }

    /// Number of classes introduced by tasks `1..=k`.
    pub fn classes_upto(&self, k: usize) -> usize {
        self.tasks[..k].iter().map(|t| t.class_set.len()).sum()
    }
}

/// Partitions the classes of `g` in ascending order into groups of
/// `classes_per_task` (the last group takes the remainder) and re-splits
/// every class's nodes at random under `seed`. Edges between tasks are
/// dropped.
pub fn build_task_stream(
    g: &Graph,
    classes_per_task: usize,
    fractions: SplitFractions,
    seed: u64,
) -> Result<TaskStream> {
    if classes_per_task == 0 {
        return Err(Error::InvalidArgument("classes_per_task must be at least 1".into()));
    }
    fractions.validate()?;
    let all: Vec<usize> = (0..g.num_nodes()).collect();
    let by_class = g.nodes_by_class(&all);
    if let Some((c, nodes)) = by_class.iter().enumerate().find(|(_, v)| v.len() < 3) {
        return Err(Error::InvalidArgument(format!(
            "class {c} has {} nodes; a train/val/test split needs at least 3",
            nodes.len()
        )));
    }
    let classes: Vec<usize> = (0..g.num_classes()).collect();
    let mut tasks = Vec::new();
    for (t, group) in classes.chunks(classes_per_task).enumerate() {
        let mut split_of = vec![Split::Train; g.num_nodes()];
        let mut nodes = Vec::new();
        for &c in group {
            let mut members = by_class[c].clone();
            members.shuffle(&mut seed::rng(seed::derive(seed, &[c as u64])));
            let (train, val, _) = fractions.counts(members.len());
            for (rank, &i) in members.iter().enumerate() {
                split_of[i] = if rank < train {
                    Split::Train
                } else if rank < train + val {
                    Split::Val
                } else {
                    Split::Test
                };
            }
            nodes.extend(members);
        }
        let (sub, original_ids) = g.induced_subgraph(&nodes)?;
        let split = original_ids.iter().map(|&i| split_of[i]).collect();
        let incoming = sub.with_split(split)?;
        tasks.push(Task {
            index: t + 1,
            class_set: group.to_vec(),
            incoming,
            original_ids,
        });
    }
    Ok(TaskStream {
        tasks,
        num_classes: g.num_classes(),
        feature_dim: g.feature_dim(),
    })
}
