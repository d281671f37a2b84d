//! Deep knowledge tracing with question-relation side information.
//!
//! The crate models a student's evolving knowledge state with a recurrent
//! cell (RNN, LSTM or GRU) over their answer history, represents questions
//! by embeddings learned from a question-question relation graph, and adds a
//! graph-Laplacian smoothness penalty `½ pᵀ L p` on the per-question
//! predictions to the usual cross-entropy loss.
//!
//! Module map:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`numcore`] | tensors, sparse matrices, reverse-mode differentiation, gradient checking |
//! | [`qgraph`] | question graph from skill annotations, Laplacian and its quadratic form |
//! | [`gembed`] | Gaussian, LINE and Node2Vec question embeddings |
//! | [`ktmodel`] | interaction encoding, recurrent cells, prediction head, checkpoints |
//! | [`trainer`] | loss composition, truncated BPTT, optimizers, training loop |
//! | [`evaluator`] | pooled AUC and accuracy on next-answer prediction |
//! | [`dataio`] | interaction logs, filtering, splitting, student simulator |
//! | [`experiment`] | the comparison grid of cells × embeddings plus the regularized model |

pub mod config;
pub mod dataio;
pub mod error;
pub mod evaluator;
pub mod experiment;
pub mod gembed;
pub mod ktmodel;
pub mod numcore;
pub mod qgraph;
pub mod trainer;

mod rng;

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use dataio::{Interaction, InteractionSequence, SimulatorConfig};
pub use error::{Error, Result};
pub use evaluator::Metrics;
pub use gembed::{EmbedMethod, EmbeddingTable, SgnsConfig};
pub use ktmodel::{CellType, KnowledgeState, ModelParams, PredictionVector};
pub use numcore::{CompGraph, NodeId, SparseMatrix, Tensor};
pub use qgraph::{QuestionGraph, SkillMap, Weighting};
pub use trainer::{LossBreakdown, TrainConfig};
