//! Minimal reverse-mode autodiff over dense `f64` tensors, plus the SGD
//! optimizer and cosine learning-rate schedule every training loop uses.

mod graph;
mod optim;
mod tensor;

pub use graph::{Graph, Var};
pub(crate) use graph::log_softmax_parts;
pub use optim::{sgd_step, LrSchedule, Sgd, SgdConfig};
pub use tensor::{Parameter, Tensor};
