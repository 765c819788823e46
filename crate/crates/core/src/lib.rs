//! Continual graph learning with condensed replay memory.
//!
//! Each task's incoming graph is condensed into a handful of synthetic,
//! self-loop-only nodes whose class-mean embeddings match the original under
//! many random GCN encoders. The classifier is then trained on the memory
//! bank of condensed graphs alone. Sampling-based banks, weighted replay,
//! finetuning and joint training are provided as baselines.

pub mod condense;
pub mod error;
pub mod gnn;
pub mod gradcheck;
pub mod graph;
pub mod harness;
pub mod memory;
pub mod metrics;
pub mod seed;
pub mod trainer;

pub use condense::{condense, init_condensed, mmd_grad, mmd_loss, CondenseConfig, CondensedGraph, InitMode};
pub use error::{Error, Result};
pub use gnn::{gcn_backward, gcn_forward, init_random_encoder, softmax_cross_entropy, EncoderConfig, GcnParams};
pub use graph::{build_task_stream, normalize_adjacency, sbm_generate, Graph, NormalizedAdjacency, SbmParams, Split, Task, TaskStream};
pub use harness::{run_experiment, ExperimentConfig};
pub use memory::{budget_for_task, merge_bank, sample_replayed, update_memory, BankPolicy, MemoryBank, ReplayedGraph};
pub use metrics::{MetricsReport, PerformanceMatrix};
pub use trainer::{continual_run, evaluate, grow_output, train_task, ClassifierState, IlMode, SchemeKind, TrainConfig, TrainScheme};
