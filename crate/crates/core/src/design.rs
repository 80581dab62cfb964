//! Observations, the normalized Gram matrix `A = (T/n) ΦᵀΦ`, its inverse and
//! the observed Laguerre coefficients `z`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laguerre::{self, LaguerreBasis};
use crate::linalg::{self, Cholesky, QrLeastSquares};

/// Sampled, noisy convolution data on `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    times: Vec<f64>,
    values: Vec<f64>,
    horizon: f64,
    sigma: Option<f64>,
}

impl Observations {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        horizon: f64,
        sigma: Option<f64>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {}",
                times.len()
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if t < 0.0 {
                return Err(Error::NegativeTime(t));
            }
            if !(t > 0.0 && t <= horizon) {
                return Err(Error::InvalidInput(format!(
                    "time {t} at index {i} lies outside (0, {horizon}]"
                )));
            }
            if i > 0 && !(t > times[i - 1]) {
                return Err(Error::InvalidInput(format!(
                    "times must be strictly increasing (index {i})"
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {v}")));
        }
        if let Some(s) = sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "sigma must be nonnegative, got {s}"
                )));
            }
        }
        Ok(Self {
            times,
            values,
            horizon,
            sigma,
        })
    }

    /// Builds observations from unordered pairs, sorting them by time.
    pub fn from_pairs(
        mut pairs: Vec<(f64, f64)>,
        horizon: f64,
        sigma: Option<f64>,
    ) -> Result<Self> {
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (times, values) = pairs.into_iter().unzip();
        Self::new(times, values, horizon, sigma)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn with_sigma(mut self, sigma: Option<f64>) -> Self {
        self.sigma = sigma;
        self
    }
}

/// How `z_m` is obtained for `m < M`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMode {
    /// First `m` entries of `z_M`.
    #[default]
    Truncate,
    /// Least squares with the first `m` basis columns only.
    Refit,
}

#[derive(Debug, Clone)]
pub struct DesignSummary {
    basis: LaguerreBasis,
    a_mat: DMatrix<f64>,
    omega: DMatrix<f64>,
    z: Vec<f64>,
    chol: Cholesky,
    qr: QrLeastSquares,
    values: DVector<f64>,
    n: usize,
    horizon: f64,
}

impl DesignSummary {
    pub fn basis(&self) -> &LaguerreBasis {
        &self.basis
    }

    /// `A_M = (T/n) ΦᵀΦ`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    /// `Ω_M = A_M^{-1}`.
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Cholesky factor of `A_M`. Its leading `m × m` block factors `A_m`.
    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// `z_m` under the chosen mode.
    pub fn z_for(&self, m: usize, mode: ZMode) -> Vec<f64> {
        match mode {
            ZMode::Truncate => self.z[..m].to_vec(),
            ZMode::Refit => self.qr.solve_leading(&self.values, m).as_slice().to_vec(),
        }
    }

    /// `z_M` for other values observed at the same times.
    pub fn z_of(&self, values: &[f64]) -> Result<Vec<f64>> {
        let y = self.check_values(values)?;
        Ok(self.qr.solve(&y).as_slice().to_vec())
    }

    /// Least-squares coefficients on the first `m` columns for other values.
    pub fn z_of_leading(&self, values: &[f64], m: usize) -> Result<Vec<f64>> {
        check_m(self, m)?;
        let y = self.check_values(values)?;
        Ok(self.qr.solve_leading(&y, m).as_slice().to_vec())
    }

    fn check_values(&self, values: &[f64]) -> Result<DVector<f64>> {
        if values.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: values.len(),
            });
        }
        Ok(DVector::from_column_slice(values))
    }
}

/// Gram matrix, its inverse and the least-squares coefficients of `obs`.
pub fn summarize_design(obs: &Observations, basis: &LaguerreBasis) -> Result<DesignSummary> {
    let phi = laguerre::design_matrix(basis, obs.times())?;
    let n = obs.len();
    let size = basis.size();
    let scale = obs.horizon() / n as f64;
    let a_mat = linalg::symmetrize(&((phi.transpose() * &phi) * scale));
    let chol = match linalg::cholesky(&a_mat) {
        Some(c) if c.pivot_ratio() > laguerre::PIVOT_RATIO_MIN => c,
        other => {
            return Err(Error::RankDeficientDesign {
                ratio: other.map_or(0.0, |c| c.pivot_ratio()),
                size,
                n,
            })
        }
    };
    let omega = chol.inverse();
    let qr = QrLeastSquares::new(&phi);
    let values = DVector::from_column_slice(obs.values());
    let z = qr.solve(&values).as_slice().to_vec();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficientDesign {
            ratio: chol.pivot_ratio(),
            size,
            n,
        });
    }
    Ok(DesignSummary {
        basis: *basis,
        a_mat,
        omega,
        z,
        chol,
        qr,
        values,
        n,
        horizon: obs.horizon(),
    })
}

/// Lower factor `L_m` with `A_m = L_m L_mᵀ`, the leading block of `A`'s factor.
pub fn leading_factor(summary: &DesignSummary, m: usize) -> Result<DMatrix<f64>> {
    check_m(summary, m)?;
    Ok(summary.chol.lower.view((0, 0), (m, m)).into_owned())
}

fn check_m(summary: &DesignSummary, m: usize) -> Result<()> {
    if m == 0 || m > summary.basis.size() {
        return Err(Error::DimensionMismatch {
            expected: summary.basis.size(),
            got: m,
        });
    }
    Ok(())
}

/// `Ω_m = (A[0..m, 0..m])^{-1}`.
pub fn omega_sub(summary: &DesignSummary, m: usize) -> Result<DMatrix<f64>> {
    let l = leading_factor(summary, m)?;
    let c = Cholesky {
        lower: l,
        min_pivot: summary.chol.min_pivot,
        max_pivot: summary.chol.max_pivot,
    };
    Ok(c.inverse())
}

/// Moves the convolution origin to `delta`, dropping samples at or before it.
pub fn shift_delay(obs: &Observations, delta: f64) -> Result<Observations> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "delay must be nonnegative, got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(obs.clone());
    }
    if delta >= obs.horizon() {
        return Err(Error::EmptyAfterShift { delta });
    }
    let (times, values): (Vec<f64>, Vec<f64>) = obs
        .times()
        .iter()
        .zip(obs.values())
        .filter(|(t, _)| **t > delta)
        .map(|(t, v)| (t - delta, *v))
        .unzip();
    if times.is_empty() {
        return Err(Error::EmptyAfterShift { delta });
    }
    if times.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} sample remains after shifting by {delta}",
            times.len()
        )));
    }
    Observations::new(times, values, obs.horizon() - delta, obs.sigma())
}

/// Spread of grid steps relative to their mean above which the difference
/// estimator is flagged.
pub const SPACING_WARN_RATIO: f64 = 0.2;

/// First-difference noise estimate `σ̂² = Σ (y_{i+1} − y_i)² / (2(n−1))`.
pub fn estimate_sigma(obs: &Observations) -> Result<f64> {
    let n = obs.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "sigma estimation needs at least 3 samples, got {n}"
        )));
    }
    let t = obs.times();
    let steps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = steps.iter().sum::<f64>() / steps.len() as f64;
    let (lo, hi) = steps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(*s), hi.max(*s))
        });
    if (hi - lo) / mean > SPACING_WARN_RATIO {
        log::warn!(
            "grid spacing varies by {:.0}% of its mean; the difference estimator of sigma is biased",
            100.0 * (hi - lo) / mean
        );
    }
    let y = obs.values();
    let ss: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((ss / (2.0 * (n - 1) as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize, horizon: f64) -> Vec<f64> {
        (1..=n).map(|i| i as f64 * horizon / n as f64).collect()
    }

    #[test]
    fn observations_validate() {
        assert!(Observations::new(vec![1.0], vec![1.0], 2.0, None).is_err());
        assert!(Observations::new(vec![1.0, 1.0], vec![1.0, 2.0], 2.0, None).is_err());
        assert!(Observations::new(vec![1.0, 3.0], vec![1.0, 2.0], 2.0, None).is_err());
        assert!(matches!(
            Observations::new(vec![-1.0, 1.0], vec![1.0, 2.0], 2.0, None),
            Err(Error::NegativeTime(_))
        ));
        assert!(Observations::new(vec![1.0, 2.0], vec![1.0], 2.0, None).is_err());
        assert!(Observations::new(vec![1.0, 2.0], vec![1.0, 2.0], 2.0, Some(0.1)).is_ok());
    }

    #[test]
    fn dense_equispaced_gram_is_near_identity() {
        // Midpoint grid: the right-endpoint grid carries an O(dt) bias from
        // the missing first half-cell.
        let t: Vec<f64> = (0..400).map(|i| (i as f64 + 0.5) * 0.25).collect();
        let obs = Observations::new(t.clone(), vec![0.0; 400], 100.0, None).unwrap();
        let b = LaguerreBasis::new(0.5, 6).unwrap();
        let s = summarize_design(&obs, &b).unwrap();
        let diff = s.a() - DMatrix::<f64>::identity(6, 6);
        assert!(diff.amax() < 0.05, "max deviation {}", diff.amax());
        let prod = s.a() * s.omega();
        assert!((prod - DMatrix::<f64>::identity(6, 6)).amax() < 1e-8);
    }

    #[test]
    fn exact_phi0_gives_unit_coefficient() {
        let b = LaguerreBasis::new(0.5, 5).unwrap();
        let t = grid(100, 50.0);
        let y: Vec<f64> = t.iter().map(|&t| b.eval(0, t)).collect();
        let obs = Observations::new(t, y, 50.0, None).unwrap();
        let s = summarize_design(&obs, &b).unwrap();
        for (k, v) in s.z().iter().enumerate() {
            assert_abs_diff_eq!(*v, if k == 0 { 1.0 } else { 0.0 }, epsilon = 1e-6);
        }
    }

    #[test]
    fn square_or_short_design_never_silent() {
        let b = LaguerreBasis::new(0.5, 4).unwrap();
        for n in [2usize, 3, 4] {
            let t = grid(n, 10.0);
            let obs = Observations::new(t, vec![1.0; n], 10.0, None).unwrap();
            match summarize_design(&obs, &b) {
                Ok(s) => {
                    assert!(s.cholesky().pivot_ratio() > laguerre::PIVOT_RATIO_MIN);
                    assert!(s.z().iter().all(|v| v.is_finite()));
                }
                Err(e) => assert!(matches!(e, Error::RankDeficientDesign { .. })),
            }
        }
        let obs = Observations::new(grid(3, 10.0), vec![1.0; 3], 10.0, None).unwrap();
        assert!(matches!(
            summarize_design(&obs, &b),
            Err(Error::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn omega_sub_examples() {
        let b = LaguerreBasis::new(0.3, 6).unwrap();
        let obs = Observations::new(grid(80, 40.0), vec![0.0; 80], 40.0, None).unwrap();
        let s = summarize_design(&obs, &b).unwrap();
        assert!((omega_sub(&s, 6).unwrap() - s.omega()).amax() < 1e-10);
        for m in 1..=6 {
            let lead = s.a().view((0, 0), (m, m)).into_owned();
            let dense = lead.try_inverse().unwrap();
            assert!((omega_sub(&s, m).unwrap() - dense).amax() < 1e-8);
        }
        assert!(omega_sub(&s, 7).is_err());
    }

    #[test]
    fn refit_mode_uses_leading_columns() {
        let b = LaguerreBasis::new(0.4, 5).unwrap();
        let t = grid(60, 30.0);
        let y: Vec<f64> = t.iter().map(|&t| (-0.2 * t).exp()).collect();
        let obs = Observations::new(t.clone(), y.clone(), 30.0, None).unwrap();
        let s = summarize_design(&obs, &b).unwrap();
        let phi = laguerre::design_matrix(&LaguerreBasis::new(0.4, 2).unwrap(), &t).unwrap();
        let direct = linalg::least_squares_qr(&phi, &DVector::from_vec(y));
        let refit = s.z_for(2, ZMode::Refit);
        assert_abs_diff_eq!(refit[0], direct[0], epsilon = 1e-10);
        assert_abs_diff_eq!(refit[1], direct[1], epsilon = 1e-10);
        assert_eq!(s.z_for(2, ZMode::Truncate), s.z()[..2].to_vec());
    }

    #[test]
    fn shift_examples() {
        let obs =
            Observations::new(vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0], 3.0, Some(0.5)).unwrap();
        assert_eq!(shift_delay(&obs, 0.0).unwrap(), obs);
        let s = shift_delay(&obs, 1.5).unwrap();
        assert_eq!(s.times(), &[0.5, 1.5]);
        assert_eq!(s.values(), &[20.0, 30.0]);
        assert_eq!(s.horizon(), 1.5);
        assert!(matches!(
            shift_delay(&obs, 3.0),
            Err(Error::EmptyAfterShift { .. })
        ));
        assert!(matches!(
            shift_delay(&obs, 5.0),
            Err(Error::EmptyAfterShift { .. })
        ));
    }

    #[test]
    fn sigma_examples() {
        let obs = Observations::new(grid(10, 1.0), vec![2.5; 10], 1.0, None).unwrap();
        assert_eq!(estimate_sigma(&obs).unwrap(), 0.0);
        let c = 0.7;
        let n = 11;
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { c } else { -c }).collect();
        let obs = Observations::new(grid(n, 1.0), y.clone(), 1.0, None).unwrap();
        let direct = (y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>()
            / (2.0 * (n - 1) as f64))
            .sqrt();
        assert_abs_diff_eq!(estimate_sigma(&obs).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(direct, c * 2f64.sqrt(), epsilon = 1e-14);
        let short = Observations::new(vec![1.0, 2.0], vec![0.0, 1.0], 2.0, None).unwrap();
        assert!(estimate_sigma(&short).is_err());
    }
}
