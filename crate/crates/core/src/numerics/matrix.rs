use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_vec",
                format!("{} values for a {rows}x{cols} matrix", values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("matrix entry {pos}"),
            });
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from nested rows. Intended for tests and small literals.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("Matrix::from_rows", "ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim(
                "matvec",
                format!("matrix {}x{} times vector of length {}", self.rows, self.cols, x.len()),
            ));
        }
        if self.cols == 0 {
            return Ok(vec![0.0; self.rows]);
        }
        Ok(self.values.chunks_exact(self.cols).map(|row| dot(row, x)).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `W x + b`.
pub fn affine_forward(x: &[f64], w: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.cols() || b.len() != w.rows() {
        return Err(Error::dim(
            "affine_forward",
            format!(
                "x[{}], W[{}x{}], b[{}]",
                x.len(),
                w.rows(),
                w.cols(),
                b.len()
            ),
        ));
    }
    let mut out = w.matvec(x)?;
    for (o, bias) in out.iter_mut().zip(b) {
        *o += bias;
    }
    Ok(out)
}

/// Squared L2 distance `Σ (x_i − y_i)²`.
pub fn mse(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim("mse", format!("lengths {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn affine_identity() {
        let w = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(affine_forward(&[1.0, 0.0], &w, &[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn affine_hand_arithmetic() {
        let w = Matrix::from_rows(&[&[2.0, 3.0]]).unwrap();
        assert_eq!(affine_forward(&[1.0, 1.0], &w, &[-1.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn affine_matches_loop_oracle() {
        let mut rng = crate::rng::rng_from_seed(7);
        let (d_in, d_out) = (5, 3);
        let x: Vec<f64> = (0..d_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wv: Vec<f64> = (0..d_in * d_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Matrix::from_vec(d_out, d_in, wv.clone()).unwrap();
        let got = affine_forward(&x, &w, &b).unwrap();
        for i in 0..d_out {
            let mut acc = 0.0;
            for j in 0..d_in {
                acc += wv[i * d_in + j] * x[j];
            }
            acc += b[i];
            assert_eq!(got[i], acc);
        }
    }

    #[test]
    fn affine_shape_error_names_shapes() {
        let w = Matrix::zeros(2, 3);
        let err = affine_forward(&[1.0], &w, &[0.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("W[2x3]"), "{err}");
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[1.0, 0.5], &[1.0, 0.5]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());

        let mut rng = crate::rng::rng_from_seed(3);
        let a: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
        let mut acc = 0.0;
        for i in 0..16 {
            acc += (a[i] - b[i]) * (a[i] - b[i]);
        }
        assert_eq!(mse(&a, &b).unwrap(), acc);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Matrix::from_vec(1, 1, vec![f64::NAN]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn affine_is_linear_without_bias(
            xs in proptest::collection::vec(-3.0f64..3.0, 4),
            ys in proptest::collection::vec(-3.0f64..3.0, 4),
            ws in proptest::collection::vec(-2.0f64..2.0, 12),
            a in -2.0f64..2.0,
            c in -2.0f64..2.0,
        ) {
            let w = Matrix::from_vec(3, 4, ws).unwrap();
            let zero = [0.0; 3];
            let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + c * y).collect();
            let lhs = affine_forward(&combo, &w, &zero).unwrap();
            let fx = affine_forward(&xs, &w, &zero).unwrap();
            let fy = affine_forward(&ys, &w, &zero).unwrap();
            for i in 0..3 {
                let rhs = a * fx[i] + c * fy[i];
                proptest::prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
