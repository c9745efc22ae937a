use serde::{Deserialize, Serialize};

use super::layer::ParamTensor;
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    PlainSgd,
    AdaptiveMoment,
}

/// First-order optimizer over a fixed, ordered list of parameters.
///
/// Moment buffers are created lazily on the first step and are indexed by the
/// position of each parameter in the slice handed to [`OptimizerState::step`],
/// so callers must always pass parameters in the same order.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update using the accumulated gradients. Gradients are left
    /// in place; zeroing them is the caller's job.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        for p in params.iter() {
            if p.grad.shape() != p.value.shape() {
                return Err(Error::dim(
                    "optimizer_step",
                    format!("gradient of {} has the wrong shape", p.name),
                ));
            }
            if let Some(i) = p.grad.as_slice().iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("gradient of {} at index {i}", p.name),
                });
            }
        }
        self.step_count += 1;
        match self.kind {
            OptimizerKind::PlainSgd => {
                for p in params.iter_mut() {
                    let grad = p.grad.as_slice().to_vec();
                    for (v, g) in p.value.as_mut_slice().iter_mut().zip(grad) {
                        *v -= self.learning_rate * g;
                    }
                }
            }
            OptimizerKind::AdaptiveMoment => {
                if self.first_moment.is_empty() {
                    self.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                }
                if self.first_moment.len() != params.len()
                    || self
                        .first_moment
                        .iter()
                        .zip(params.iter())
                        .any(|(m, p)| m.len() != p.len())
                {
                    return Err(Error::dim(
                        "optimizer_step",
                        "moment accumulators do not match the parameter list",
                    ));
                }
                let t = self.step_count as i32;
                let bias1 = 1.0 - ADAM_BETA1.powi(t);
                let bias2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, m), v) in params
                    .iter_mut()
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    let grad = p.grad.as_slice().to_vec();
                    let value = p.value.as_mut_slice();
                    for i in 0..grad.len() {
                        let g = grad[i];
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = m[i] / bias1;
                        let v_hat = v[i] / bias2;
                        value[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                    }
                }
            }
        }
        Ok(())
    }
}
