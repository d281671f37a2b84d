//! Numerical core: dense tensors, coordinate-list sparse matrices, a
//! recorded computation graph with reverse-mode differentiation, and a
//! finite-difference gradient checker.
//!
//! Graphs are rebuilt per sequence because sequence lengths vary. Every
//! operation checks shapes and finiteness at its boundary so failures carry
//! the offending node id.

pub mod gradcheck;
mod graph;
mod sparse;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{CompGraph, NamedTensors, NodeId, QuadraticForm};
pub use sparse::SparseMatrix;
pub use tensor::{sigmoid, Tensor};

pub(crate) use tensor::dot;
