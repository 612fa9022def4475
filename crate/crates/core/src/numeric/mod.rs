//! Dense tensor math, reverse-mode differentiation and optimisation.

mod init;
mod optim;
mod params;
mod real;
mod tape;
mod tensor;

pub use init::{dropout, dropout_mask, init_uniform, init_uniform_with, INIT_RANGE};
pub use optim::{clip_value, rmsprop_step, OptimizerConfig};
pub use params::{ParamId, ParamStore, Parameter};
pub use real::Real;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{activate, cross_entropy, matmul, Activation, Tensor};

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;
