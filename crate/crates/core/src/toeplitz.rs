//! Lower-triangular Toeplitz operators stored by their first column.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laguerre::CoeffVector;

/// Relative size of `|b_0|` below which the operator counts as singular.
pub const SINGULAR_HEAD_TOL: f64 = 1e-12;

/// Entry `(i, j)` is `b_{i-j}` for `j ≤ i` and zero above the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerToeplitz {
    first_col: Vec<f64>,
}

impl LowerToeplitz {
    pub fn new(first_col: Vec<f64>) -> Result<Self> {
        if first_col.is_empty() {
            return Err(Error::InvalidInput(
                "Toeplitz operator needs at least one entry".into(),
            ));
        }
        Ok(Self { first_col })
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn size(&self) -> usize {
        self.first_col.len()
    }

    /// `G_m` for `m ≤ size`.
    pub fn leading(&self, m: usize) -> LowerToeplitz {
        LowerToeplitz {
            first_col: self.first_col[..m.min(self.size())].to_vec(),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let m = self.size();
        nalgebra::DMatrix::from_fn(
            m,
            m,
            |i, j| if j <= i { self.first_col[i - j] } else { 0.0 },
        )
    }

    /// Number of nonzero diagonals, counted up to the last nonzero entry.
    pub fn bandwidth(&self) -> usize {
        self.first_col
            .iter()
            .rposition(|v| *v != 0.0)
            .map_or(0, |p| p + 1)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                got: len,
            });
        }
        Ok(())
    }

    /// `y_i = Σ_{j≤i} b_{i-j} x_j`.
    pub fn mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let b = &self.first_col;
        Ok((0..x.len())
            .map(|i| (0..=i).map(|j| b[i - j] * x[j]).sum())
            .collect())
    }

    /// Fails with [`Error::NearSingular`] unless `|b_0| > 1e-12 · max|b_k|`.
    pub fn check_invertible(&self) -> Result<()> {
        let head = self.first_col[0].abs();
        let max = self.first_col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(head > SINGULAR_HEAD_TOL * max) || head == 0.0 {
            return Err(Error::NearSingular { head, max });
        }
        Ok(())
    }

    /// Forward substitution for `G x = y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y.len())?;
        self.check_invertible()?;
        Ok(self.forward(y))
    }

    fn forward(&self, y: &[f64]) -> Vec<f64> {
        let b = &self.first_col;
        let mut x = vec![0.0; y.len()];
        for i in 0..y.len() {
            let mut s = y[i];
            for j in 0..i {
                s -= b[i - j] * x[j];
            }
            x[i] = s / b[0];
        }
        x
    }

    /// First column of `G^{-1}`, itself lower-triangular Toeplitz.
    pub fn inverse(&self) -> Result<LowerToeplitz> {
        self.check_invertible()?;
        let mut e0 = vec![0.0; self.size()];
        e0[0] = 1.0;
        Ok(LowerToeplitz {
            first_col: self.forward(&e0),
        })
    }
}

/// `G_m` built from the kernel's Laguerre coefficients:
/// `b_0 = (2a)^{-1/2} g_0`, `b_k = (2a)^{-1/2} (g_k − g_{k-1})`.
pub fn build_g(g_coeffs: &CoeffVector, m: usize) -> Result<LowerToeplitz> {
    if m == 0 {
        return Err(Error::InvalidInput("model size must be at least 1".into()));
    }
    if g_coeffs.len() < m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: g_coeffs.len(),
        });
    }
    let scale = 1.0 / (2.0 * g_coeffs.basis().a()).sqrt();
    let g = g_coeffs.coeffs();
    let first_col = (0..m)
        .map(|k| {
            if k == 0 {
                scale * g[0]
            } else {
                scale * (g[k] - g[k - 1])
            }
        })
        .collect();
    LowerToeplitz::new(first_col)
}

/// Symbol `G(a(1+e^{iθ})/(1−e^{iθ}))` of the operator for a kernel with
/// Laplace transform `laplace`. Its Fourier coefficients are the `b_k`.
pub fn symbol_eval<F: Fn(Complex64) -> Complex64>(
    laplace: F,
    a: f64,
    theta: f64,
) -> Result<Complex64> {
    let reduced = theta.rem_euclid(std::f64::consts::TAU);
    if reduced == 0.0 || !theta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "symbol is undefined at theta = {theta}"
        )));
    }
    let z = Complex64::from_polar(1.0, theta);
    let s = (Complex64::new(1.0, 0.0) + z) / (Complex64::new(1.0, 0.0) - z) * a;
    Ok(laplace(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laguerre::LaguerreBasis;
    use approx::assert_abs_diff_eq;

    #[test]
    fn build_examples() {
        let b = LaguerreBasis::new(0.5, 3).unwrap();
        let g = build_g(&CoeffVector::new(vec![1.0, 0.0, 0.0], b).unwrap(), 3).unwrap();
        assert_eq!(g.first_col(), &[1.0, -1.0, 0.0]);
        let g = build_g(&CoeffVector::new(vec![1.0, 1.0, 1.0], b).unwrap(), 3).unwrap();
        assert_eq!(g.first_col(), &[1.0, 0.0, 0.0]);
        assert!(build_g(&CoeffVector::new(vec![1.0, 1.0], b).unwrap(), 3).is_err());
    }

    #[test]
    fn mul_and_solve_examples() {
        let id = LowerToeplitz::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(id.mul(&[3.0, 1.0, 4.0]).unwrap(), vec![3.0, 1.0, 4.0]);
        assert_eq!(id.solve(&[2.0, 7.0, 1.0]).unwrap(), vec![2.0, 7.0, 1.0]);
        let t = LowerToeplitz::new(vec![1.0, -1.0, 0.0]).unwrap();
        assert_eq!(t.mul(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, -1.0, 0.0]);
        assert_eq!(t.solve(&[1.0, -1.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            t.mul(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn near_singular_head() {
        let t = LowerToeplitz::new(vec![1e-13, 1.0, 0.5]).unwrap();
        assert!(matches!(
            t.solve(&[1.0, 1.0, 1.0]),
            Err(Error::NearSingular { .. })
        ));
        let z = LowerToeplitz::new(vec![0.0]).unwrap();
        assert!(z.solve(&[1.0]).is_err());
    }

    #[test]
    fn inverse_column_solves() {
        let t = LowerToeplitz::new(vec![2.0, 0.5, -0.3, 0.1]).unwrap();
        let inv = t.inverse().unwrap();
        let y = [1.0, -2.0, 0.5, 3.0];
        let x1 = t.solve(&y).unwrap();
        let x2 = inv.mul(&y).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn symbol_examples() {
        let a = 0.7;
        let v = symbol_eval(|s| 1.0 / (s + a), a, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(v.re, 1.0 / a, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        let v = symbol_eval(|s| 2.0 / (s + 0.1).powi(3), 1.0, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(v.re, 2000.0, epsilon = 1e-8);
        assert!(symbol_eval(|s| s, 1.0, 0.0).is_err());
        assert!(symbol_eval(|s| s, 1.0, std::f64::consts::TAU).is_err());
    }

    #[test]
    fn bandwidth_counts_diagonals() {
        assert_eq!(
            LowerToeplitz::new(vec![1.0, 2.0, 0.0, 0.0])
                .unwrap()
                .bandwidth(),
            2
        );
        assert_eq!(LowerToeplitz::new(vec![0.0]).unwrap().bandwidth(), 0);
    }
}
