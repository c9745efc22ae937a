use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::{SIGMOID_CEIL, SIGMOID_FLOOR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => (1.0 / (1.0 + (-x).exp())).clamp(SIGMOID_FLOOR, SIGMOID_CEIL),
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    ///
    /// ReLU uses 0 at exactly 0. The clamped sigmoid is flat where the clamp
    /// is active.
    #[inline]
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                if out <= SIGMOID_FLOOR || out >= SIGMOID_CEIL {
                    0.0
                } else {
                    out * (1.0 - out)
                }
            }
        }
    }
}

/// A named parameter with its gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    #[serde(skip, default = "empty_matrix")]
    pub grad: Matrix,
}

fn empty_matrix() -> Matrix {
    Matrix::zeros(0, 0)
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        if self.grad.shape() != self.value.shape() {
            self.grad = Matrix::zeros(self.value.rows(), self.value.cols());
        } else {
            self.grad.fill(0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values recorded by [`Dense::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseTrace {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: Vec<f64>,
}

/// Affine map followed by an element-wise activation.
///
/// The weight has shape `out × in`; the bias, when present, is `1 × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: ParamTensor,
    pub bias: Option<ParamTensor>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let values = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        let weight = Matrix::from_vec(out_dim, in_dim, values).expect("shape by construction");
        Self {
            weight: ParamTensor::new(format!("{name}.weight"), weight),
            bias: bias.then(|| ParamTensor::new(format!("{name}.bias"), Matrix::zeros(1, out_dim))),
            activation,
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.value.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseTrace> {
        if x.len() != self.in_dim() {
            return Err(Error::dim(
                "Dense::forward",
                format!(
                    "{} expects input of length {}, got {}",
                    self.weight.name,
                    self.in_dim(),
                    x.len()
                ),
            ));
        }
        let mut pre = self.weight.value.matvec(x)?;
        if let Some(bias) = &self.bias {
            for (p, b) in pre.iter_mut().zip(bias.value.as_slice()) {
                *p += b;
            }
        }
        let output = pre.iter().map(|&p| self.activation.apply(p)).collect();
        Ok(DenseTrace {
            input: x.to_vec(),
            pre,
            output,
        })
    }

    /// Gradient at the pre-activation for the given output gradient.
    fn local_delta(&self, trace: &DenseTrace, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.out_dim() || trace.pre.len() != self.out_dim() {
            return Err(Error::dim(
                "Dense::backward",
                format!(
                    "{} has {} outputs, upstream gradient has {}",
                    self.weight.name,
                    self.out_dim(),
                    upstream.len()
                ),
            ));
        }
        Ok(upstream
            .iter()
            .zip(trace.pre.iter().zip(&trace.output))
            .map(|(g, (&p, &o))| g * self.activation.derivative(p, o))
            .collect())
    }

    fn input_grad_from_delta(&self, delta: &[f64]) -> Vec<f64> {
        let w = &self.weight.value;
        let mut grad = vec![0.0; self.in_dim()];
        for (r, &dr) in delta.iter().enumerate() {
            if dr == 0.0 {
                continue;
            }
            for (g, &wv) in grad.iter_mut().zip(w.row(r)) {
                *g += dr * wv;
            }
        }
        grad
    }

    /// Backpropagates `upstream` and adds the parameter gradients to the
    /// accumulators. Returns the gradient with respect to the input.
    pub fn backward(&mut self, trace: &DenseTrace, upstream: &[f64]) -> Result<Vec<f64>> {
        let delta = self.local_delta(trace, upstream)?;
        let in_dim = self.in_dim();
        let grad = self.weight.grad.as_mut_slice();
        for (r, &dr) in delta.iter().enumerate() {
            if dr == 0.0 {
                continue;
            }
            for (g, &x) in grad[r * in_dim..(r + 1) * in_dim].iter_mut().zip(&trace.input) {
                *g += dr * x;
            }
        }
        if let Some(bias) = &mut self.bias {
            for (g, d) in bias.grad.as_mut_slice().iter_mut().zip(&delta) {
                *g += d;
            }
        }
        Ok(self.input_grad_from_delta(&delta))
    }

    /// Input gradient only; parameters are treated as constants.
    pub fn input_grad(&self, trace: &DenseTrace, upstream: &[f64]) -> Result<Vec<f64>> {
        let delta = self.local_delta(trace, upstream)?;
        Ok(self.input_grad_from_delta(&delta))
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        std::iter::once(&self.weight).chain(self.bias.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        std::iter::once(&mut self.weight).chain(self.bias.iter_mut())
    }
}

/// Forward trace of an [`Mlp`], one entry per layer.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub layers: Vec<DenseTrace>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        &self.layers.last().expect("non-empty mlp").output
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an mlp needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dim(
                    "Mlp::new",
                    format!(
                        "{} outputs {} but {} expects {}",
                        pair[0].weight.name,
                        pair[0].out_dim(),
                        pair[1].weight.name,
                        pair[1].in_dim()
                    ),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpTrace> {
        let mut traces: Vec<DenseTrace> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = traces.last().map_or(x, |t| t.output.as_slice());
            let t = layer.forward(input)?;
            traces.push(t);
        }
        Ok(MlpTrace { layers: traces })
    }

    /// Output only, without keeping a trace.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur)?.output;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, trace: &MlpTrace, upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_trace(trace)?;
        let mut grad = upstream.to_vec();
        for (layer, t) in self.layers.iter_mut().zip(&trace.layers).rev() {
            grad = layer.backward(t, &grad)?;
        }
        Ok(grad)
    }

    pub fn input_grad(&self, trace: &MlpTrace, upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_trace(trace)?;
        let mut grad = upstream.to_vec();
        for (layer, t) in self.layers.iter().zip(&trace.layers).rev() {
            grad = layer.input_grad(t, &grad)?;
        }
        Ok(grad)
    }

    fn check_trace(&self, trace: &MlpTrace) -> Result<()> {
        if trace.layers.len() != self.layers.len() {
            return Err(Error::dim(
                "Mlp::backward",
                format!(
                    "trace has {} layers, network has {}",
                    trace.layers.len(),
                    self.layers.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        self.layers.iter().flat_map(|l| l.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(ParamTensor::zero_grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::activation;

    fn identity_layer(n: usize, act: Activation) -> Dense {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            w.set(i, i, 1.0);
        }
        Dense {
            weight: ParamTensor::new("id.weight", w),
            bias: Some(ParamTensor::new("id.bias", Matrix::zeros(1, n))),
            activation: act,
        }
    }

    #[test]
    fn relu_and_sigmoid_values() {
        assert_eq!(activation(&[-2.0, 0.0, 3.0], Activation::Relu), vec![0.0, 0.0, 3.0]);
        assert_eq!(activation(&[0.0], Activation::Sigmoid), vec![0.5]);
        assert_eq!(activation(&[80.0], Activation::Sigmoid), vec![1.0 - 1e-7]);
        assert_eq!(activation(&[-80.0], Activation::Sigmoid), vec![1e-7]);
    }

    #[test]
    fn identity_affine_backward() {
        let mut layer = identity_layer(2, Activation::Identity);
        let t = layer.forward(&[0.3, -0.4]).unwrap();
        assert_eq!(layer.backward(&t, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(layer.weight.grad.as_slice(), &[0.3, -0.4, 0.0, 0.0]);
    }

    #[test]
    fn relu_backward_uses_zero_subgradient() {
        let mut layer = identity_layer(2, Activation::Relu);
        let t = layer.forward(&[-1.0, 2.0]).unwrap();
        assert_eq!(layer.backward(&t, &[5.0, 5.0]).unwrap(), vec![0.0, 5.0]);
        let t0 = layer.forward(&[0.0, 0.0]).unwrap();
        assert_eq!(layer.input_grad(&t0, &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gradients_accumulate_across_samples() {
        let mut layer = identity_layer(1, Activation::Identity);
        let t1 = layer.forward(&[2.0]).unwrap();
        let t2 = layer.forward(&[3.0]).unwrap();
        layer.backward(&t1, &[1.0]).unwrap();
        layer.backward(&t2, &[1.0]).unwrap();
        assert_eq!(layer.weight.grad.as_slice(), &[5.0]);
        assert_eq!(layer.bias.as_ref().unwrap().grad.as_slice(), &[2.0]);
        layer.weight.zero_grad();
        assert_eq!(layer.weight.grad.as_slice(), &[0.0]);
    }

    #[test]
    fn trace_mismatch_is_an_error() {
        let mut mlp = Mlp::new(vec![identity_layer(2, Activation::Relu)]).unwrap();
        let bogus = MlpTrace { layers: vec![] };
        assert!(mlp.backward(&bogus, &[1.0, 1.0]).is_err());
        let t = mlp.forward(&[1.0, 1.0]).unwrap();
        assert!(mlp.backward(&t, &[1.0]).is_err());
    }

    #[test]
    fn mismatched_layers_rejected() {
        let mut rng = crate::rng::rng_from_seed(0);
        let a = Dense::glorot("a", 3, 4, true, Activation::Relu, &mut rng);
        let b = Dense::glorot("b", 5, 2, true, Activation::Relu, &mut rng);
        assert!(Mlp::new(vec![a, b]).is_err());
    }
}
