//! Minimal numerical core: tensors, differentiable layers, losses, Adam and
//! a finite-difference gradient checker.

mod gradcheck;
mod layer;
mod loss;
mod network;
mod optim;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamError, DEFAULT_TOLERANCE};
pub use layer::{log_sum_exp, softmax, Layer, LayerKind, DEFAULT_NORM_EPS, DEFAULT_PRELU_SLOPE};
pub use loss::softmax_cross_entropy;
pub use network::{Gradients, Network, Tape};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use tensor::Tensor;

pub(crate) use layer::dot;
