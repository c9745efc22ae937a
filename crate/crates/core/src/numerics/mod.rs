//! Minimal dense linear algebra and the differentiable pieces of the model.
//!
//! Only the fixed SDA²E computation graph is differentiated: affine layers
//! with ReLU, sigmoid or identity activations, chained into small MLPs. Each
//! forward call returns a trace that the matching backward call consumes.

mod gradcheck;
mod layer;
mod matrix;
mod optim;

pub use gradcheck::{finite_difference_grad, max_relative_error, relative_error};
pub use layer::{Activation, Dense, DenseTrace, Mlp, MlpTrace, ParamTensor};
pub use matrix::{affine_forward, mse, Matrix};
pub use optim::{OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

/// Lower clamp applied to sigmoid outputs.
pub const SIGMOID_FLOOR: f64 = 1e-7;
/// Upper clamp applied to sigmoid outputs.
pub const SIGMOID_CEIL: f64 = 1.0 - 1e-7;

/// Element-wise activation of `x`.
pub fn activation(x: &[f64], kind: Activation) -> Vec<f64> {
    x.iter().map(|&v| kind.apply(v)).collect()
}
