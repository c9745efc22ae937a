use crate::{Error, Result};

/// Central-difference gradient of `loss` at `params`:
/// `(f(θ + ε e_i) − f(θ − ε e_i)) / 2ε` for every coordinate.
pub fn finite_difference_grad<F>(mut loss: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let mut theta = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let plus = loss(&theta)?;
        theta[i] = orig - eps;
        let minus = loss(&theta)?;
        theta[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: format!("loss while perturbing parameter {i}"),
            });
        }
        grads.push((plus - minus) / (2.0 * eps));
    }
    Ok(grads)
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y, floor))
        .fold(0.0, f64::max)
}
