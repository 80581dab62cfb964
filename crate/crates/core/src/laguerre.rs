//! Laguerre polynomials, the orthonormal Laguerre functions
//! `φ_k(t) = √(2a) e^{-at} L_k(2at)`, projections onto the basis and
//! selection of the scale parameter `a`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::gl32;

/// `L_k(x)` by the three-term recurrence.
pub fn laguerre_poly_eval(k: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 - x) * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaguerreBasis {
    a: f64,
    size: usize,
}

impl LaguerreBasis {
    pub fn new(a: f64, size: usize) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidInput(format!(
                "scale a must be positive, got {a}"
            )));
        }
        if size == 0 {
            return Err(Error::InvalidInput(
                "basis size M must be at least 1".into(),
            ));
        }
        Ok(Self { a, size })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `φ_k(t)`. The recurrence runs on the weighted functions, so large
    /// `k·t` neither overflows nor loses the exponential factor.
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        let x = 2.0 * self.a * t;
        let mut prev = (2.0 * self.a).sqrt() * (-self.a * t).exp();
        if k == 0 {
            return prev;
        }
        let mut cur = (1.0 - x) * prev;
        for j in 1..k {
            let jf = j as f64;
            let next = ((2.0 * jf + 1.0 - x) * cur - jf * prev) / (jf + 1.0);
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Writes `φ_0(t), …, φ_{out.len()-1}(t)` into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        let x = 2.0 * self.a * t;
        out[0] = (2.0 * self.a).sqrt() * (-self.a * t).exp();
        if out.len() > 1 {
            out[1] = (1.0 - x) * out[0];
        }
        for j in 1..out.len().saturating_sub(1) {
            let jf = j as f64;
            out[j + 1] = ((2.0 * jf + 1.0 - x) * out[j] - jf * out[j - 1]) / (jf + 1.0);
        }
    }

    pub fn eval_all(&self, t: f64, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        self.eval_into(t, &mut out);
        out
    }

    /// `φ_k(0)`, identical for every `k`.
    pub fn value_at_zero(&self) -> f64 {
        (2.0 * self.a).sqrt()
    }

    /// `∫₀^∞ φ_k`.
    pub fn integral(&self, k: usize) -> f64 {
        let s = (2.0 / self.a).sqrt();
        if k % 2 == 0 {
            s
        } else {
            -s
        }
    }

    /// Laplace transform of `φ_k`, i.e. `√(2a) (s-a)^k / (s+a)^{k+1}`.
    pub fn laplace(&self, k: usize, s: num_complex::Complex64) -> num_complex::Complex64 {
        let a = self.a;
        (s - a).powi(k as i32) / (s + a).powi(k as i32 + 1) * (2.0 * a).sqrt()
    }
}

/// `n × M` matrix with entries `φ_k(t_i)`.
pub fn design_matrix(basis: &LaguerreBasis, times: &[f64]) -> Result<DMatrix<f64>> {
    design_matrix_cols(basis, times, basis.size())
}

pub(crate) fn design_matrix_cols(
    basis: &LaguerreBasis,
    times: &[f64],
    m: usize,
) -> Result<DMatrix<f64>> {
    if times.is_empty() {
        return Err(Error::InvalidInput(
            "design matrix needs at least one time".into(),
        ));
    }
    check_times(times)?;
    let mut phi = DMatrix::<f64>::zeros(times.len(), m);
    let mut row = vec![0.0; m];
    for (i, &t) in times.iter().enumerate() {
        basis.eval_into(t, &mut row);
        for (k, v) in row.iter().enumerate() {
            phi[(i, k)] = *v;
        }
    }
    Ok(phi)
}

fn check_times(times: &[f64]) -> Result<()> {
    for &t in times {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite time {t}")));
        }
    }
    Ok(())
}

/// Laguerre coordinates `c_0..c_{m-1}` attached to their basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector {
    coeffs: Vec<f64>,
    basis: LaguerreBasis,
}

impl CoeffVector {
    pub fn new(coeffs: Vec<f64>, basis: LaguerreBasis) -> Result<Self> {
        if coeffs.len() > basis.size() {
            return Err(Error::DimensionMismatch {
                expected: basis.size(),
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs, basis })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &LaguerreBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// First `m` coordinates.
    pub fn truncate(&self, m: usize) -> CoeffVector {
        CoeffVector {
            coeffs: self.coeffs[..m.min(self.coeffs.len())].to_vec(),
            basis: self.basis,
        }
    }

    /// `Σ c_k φ_k(t)`.
    pub fn value(&self, t: f64) -> f64 {
        let mut phi = vec![0.0; self.coeffs.len()];
        self.basis.eval_into(t, &mut phi);
        phi.iter().zip(&self.coeffs).map(|(p, c)| p * c).sum()
    }
}

/// Values of the expansion at each time.
pub fn expand(coeffs: &CoeffVector, times: &[f64]) -> Result<Vec<f64>> {
    check_times(times)?;
    let m = coeffs.len();
    let mut phi = vec![0.0; m];
    Ok(times
        .iter()
        .map(|&t| {
            coeffs.basis.eval_into(t, &mut phi);
            phi.iter().zip(&coeffs.coeffs).map(|(p, c)| p * c).sum()
        })
        .collect())
}

/// Settings for projections `∫₀^∞ f φ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Target for the weight tail `e^{-a T_quad}` and for the mass of the
    /// last panel.
    pub tail_tol: f64,
    /// Upper bound on the panel width; panels are `min(2/a, max_panel_width)`.
    pub max_panel_width: f64,
    /// The integration range may grow to this multiple of the initial
    /// `T_quad` before the tail is declared too heavy.
    pub max_extension: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            tail_tol: 1e-12,
            max_panel_width: 4.0,
            max_extension: 16.0,
        }
    }
}

/// Coefficients `c_k ≈ ∫₀^∞ func(t) φ_k(t) dt`, `k < m`, by composite
/// 32-point Gauss–Legendre panels.
pub fn project_function<F: Fn(f64) -> f64>(
    func: F,
    basis: &LaguerreBasis,
    m: usize,
    quad: &QuadratureConfig,
) -> Result<CoeffVector> {
    if m > basis.size() {
        return Err(Error::DimensionMismatch {
            expected: basis.size(),
            got: m,
        });
    }
    if !(quad.tail_tol > 0.0 && quad.tail_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail tolerance must lie in (0, 1), got {}",
            quad.tail_tol
        )));
    }
    let a = basis.a();
    let width = (2.0 / a).min(quad.max_panel_width);
    let t_min = -quad.tail_tol.ln() / a;
    let t_max = t_min * quad.max_extension.max(1.0);
    let rule = gl32();
    let mut acc = vec![0.0; m];
    let mut phi = vec![0.0; m];
    let mut lo = 0.0;
    loop {
        let hi = lo + width;
        let mut panel_mass = 0.0;
        for (t, w) in rule.panel(lo, hi) {
            let fv = func(t);
            basis.eval_into(t, &mut phi);
            let mut peak: f64 = 0.0;
            for k in 0..m {
                acc[k] += w * fv * phi[k];
                peak = peak.max(phi[k].abs());
            }
            panel_mass += w * fv.abs() * peak;
        }
        if !panel_mass.is_finite() {
            return Err(Error::TailMassExceeded {
                tail: panel_mass,
                tol: quad.tail_tol,
            });
        }
        lo = hi;
        if lo >= t_min && panel_mass < quad.tail_tol {
            break;
        }
        if lo >= t_max {
            return Err(Error::TailMassExceeded {
                tail: panel_mass,
                tol: quad.tail_tol,
            });
        }
    }
    CoeffVector::new(acc, *basis)
}

/// Least-squares Laguerre fit of sampled values with the full basis.
///
/// Returns the coefficients and the root-mean-square residual on the samples.
pub fn fit_samples(
    basis: &LaguerreBasis,
    times: &[f64],
    values: &[f64],
) -> Result<(CoeffVector, f64)> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    let phi = design_matrix(basis, times)?;
    checked_gram(&phi)?;
    let y = DVector::from_column_slice(values);
    let c = linalg::least_squares_qr(&phi, &y);
    let resid = &phi * &c - &y;
    let rmse = (resid.norm_squared() / times.len() as f64).sqrt();
    Ok((CoeffVector::new(c.as_slice().to_vec(), *basis)?, rmse))
}

/// Smallest-to-largest Cholesky pivot ratio below which `ΦᵀΦ` counts as
/// rank deficient.
pub const PIVOT_RATIO_MIN: f64 = 1e-10;

/// Cholesky factor of `ΦᵀΦ`, failing the pivot test with
/// [`Error::RankDeficientDesign`].
pub(crate) fn checked_gram(phi: &DMatrix<f64>) -> Result<linalg::Cholesky> {
    let (n, size) = phi.shape();
    let gram = phi.transpose() * phi;
    match linalg::cholesky(&gram) {
        Some(c) if n >= size && c.pivot_ratio() > PIVOT_RATIO_MIN => Ok(c),
        Some(c) => Err(Error::RankDeficientDesign {
            ratio: c.pivot_ratio(),
            size,
            n,
        }),
        None => Err(Error::RankDeficientDesign {
            ratio: 0.0,
            size,
            n,
        }),
    }
}

/// What the scale search fits: sampled values or a callable on `[0, horizon]`.
pub enum KernelSource<'a> {
    Samples {
        times: &'a [f64],
        values: &'a [f64],
    },
    Function {
        func: &'a (dyn Fn(f64) -> f64 + Sync),
        horizon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleChoice {
    pub a: f64,
    pub fit_error: f64,
    /// `(a, error)` for every grid point, in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// Points of the evaluation grid used to measure a callable's fit error.
pub const SCALE_EVAL_POINTS: usize = 1001;

/// Relative gap (to the RMS of `g`) under which two errors count as tied.
pub const SCALE_TIE_TOL: f64 = 1e-10;

/// `count` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default search grid for `a`: 32 log-spaced points in `[0.01, 2]`.
pub fn default_scale_grid() -> Vec<f64> {
    log_grid(0.01, 2.0, 32)
}

/// Fit error of an `M`-term expansion at scale `a`.
pub fn scale_fit_error(
    source: &KernelSource<'_>,
    size: usize,
    a: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let basis = LaguerreBasis::new(a, size)?;
    match source {
        KernelSource::Samples { times, values } => {
            fit_samples(&basis, times, values).map(|(_, e)| e)
        }
        KernelSource::Function { func, horizon } => {
            let c = project_function(func, &basis, size, quad)?;
            let grid = eval_grid(*horizon);
            let approx = expand(&c, &grid)?;
            let sse: f64 = grid
                .iter()
                .zip(&approx)
                .map(|(&t, v)| (func(t) - v).powi(2))
                .sum();
            Ok((sse / grid.len() as f64).sqrt())
        }
    }
}

fn eval_grid(horizon: f64) -> Vec<f64> {
    (0..SCALE_EVAL_POINTS)
        .map(|j| horizon * j as f64 / (SCALE_EVAL_POINTS - 1) as f64)
        .collect()
}

/// Grid search for the `a` minimizing the `M`-term reconstruction error.
/// Scales whose sampled design is rank deficient are left out of the curve.
/// Errors within [`SCALE_TIE_TOL`] times the RMS of `g` are treated as ties
/// and resolved toward the smallest `a`.
pub fn select_scale_a(
    source: &KernelSource<'_>,
    size: usize,
    a_grid: &[f64],
    quad: &QuadratureConfig,
) -> Result<ScaleChoice> {
    if a_grid.is_empty() {
        return Err(Error::InvalidInput("a-grid is empty".into()));
    }
    if let Some(bad) = a_grid.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "a-grid entries must be positive, got {bad}"
        )));
    }
    if let KernelSource::Function { horizon, .. } = source {
        if !(*horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
    }
    let mut curve = Vec::with_capacity(a_grid.len());
    let mut first_err = None;
    for &a in a_grid {
        match scale_fit_error(source, size, a, quad) {
            Ok(e) => curve.push((a, e)),
            Err(e @ Error::RankDeficientDesign { .. }) => {
                log::debug!("a = {a} skipped: {e}");
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if curve.is_empty() {
        return Err(first_err.expect("grid is nonempty"));
    }
    let scale = match source {
        KernelSource::Samples { values, .. } => rms(values),
        KernelSource::Function { func, horizon } => {
            let v: Vec<f64> = eval_grid(*horizon).into_iter().map(|t| func(t)).collect();
            rms(&v)
        }
    };
    let best = curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let cutoff = best + SCALE_TIE_TOL * scale;
    let (a, fit_error) = curve
        .iter()
        .filter(|p| p.1 <= cutoff)
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .copied()
        .unwrap_or(curve[0]);
    Ok(ScaleChoice {
        a,
        fit_error,
        curve,
    })
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;
    use approx::assert_abs_diff_eq;

    #[test]
    fn poly_examples() {
        assert_eq!(laguerre_poly_eval(0, 7.3), 1.0);
        assert_eq!(laguerre_poly_eval(1, 2.0), -1.0);
        assert_abs_diff_eq!(laguerre_poly_eval(2, 2.0), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn poly_matches_explicit_sum() {
        // L_k(x) = Σ_j (-1)^j C(k,j) x^j / j!
        for k in 0..12usize {
            for &x in &[0.0f64, 0.3, 1.7, 5.0, 11.0] {
                let mut s = 0.0;
                let mut binom = 1.0;
                let mut fact = 1.0;
                for j in 0..=k {
                    if j > 0 {
                        binom *= (k + 1 - j) as f64 / j as f64;
                        fact *= j as f64;
                    }
                    s += if j % 2 == 0 { 1.0 } else { -1.0 } * binom * x.powi(j as i32) / fact;
                }
                assert_abs_diff_eq!(
                    laguerre_poly_eval(k, x),
                    s,
                    epsilon = 1e-9 * s.abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn basis_examples() {
        let b = LaguerreBasis::new(0.5, 40).unwrap();
        assert_abs_diff_eq!(b.eval(0, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval(37, 0.0), 1.0, epsilon = 1e-12);
        let b1 = LaguerreBasis::new(1.0, 2).unwrap();
        assert_abs_diff_eq!(b1.eval(1, 0.5), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_basis() {
        assert!(LaguerreBasis::new(0.0, 3).is_err());
        assert!(LaguerreBasis::new(-1.0, 3).is_err());
        assert!(LaguerreBasis::new(1.0, 0).is_err());
    }

    #[test]
    fn eval_into_agrees_with_eval() {
        let b = LaguerreBasis::new(0.3, 30).unwrap();
        for &t in &[0.0, 0.7, 12.0, 150.0] {
            let all = b.eval_all(t, 30);
            for (k, v) in all.iter().enumerate() {
                assert_eq!(*v, b.eval(k, t));
            }
        }
    }

    #[test]
    fn design_matrix_examples() {
        let b = LaguerreBasis::new(0.5, 1).unwrap();
        let m = design_matrix(&b, &[0.0]).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 1.0, epsilon = 1e-15);
        let b = LaguerreBasis::new(0.5, 2).unwrap();
        let m = design_matrix(&b, &[0.0, 0.0]).unwrap();
        assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(matches!(
            design_matrix(&b, &[1.0, -0.1]),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn design_matrix_matches_explicit_polynomials() {
        let a = 1.0;
        let b = LaguerreBasis::new(a, 3).unwrap();
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let m = design_matrix(&b, &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let x = 2.0 * a * t;
            let w = (2.0 * a).sqrt() * (-a * t).exp();
            let explicit = [w, w * (1.0 - x), w * (1.0 - 2.0 * x + 0.5 * x * x)];
            for k in 0..3 {
                assert_abs_diff_eq!(m[(i, k)], explicit[k], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn projection_of_basis_functions() {
        let b = LaguerreBasis::new(0.5, 4).unwrap();
        let q = QuadratureConfig::default();
        let c = project_function(|t| b.eval(0, t), &b, 3, &q).unwrap();
        for (k, v) in c.coeffs().iter().enumerate() {
            assert_abs_diff_eq!(*v, if k == 0 { 1.0 } else { 0.0 }, epsilon = 1e-8);
        }
        let c = project_function(|t| b.eval(2, t), &b, 4, &q).unwrap();
        for (k, v) in c.coeffs().iter().enumerate() {
            assert_abs_diff_eq!(*v, if k == 2 { 1.0 } else { 0.0 }, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_of_g2_matches_adaptive_oracle() {
        let g2 = |t: f64| t * t * (-0.1 * t).exp();
        let b = LaguerreBasis::new(0.25, 8).unwrap();
        let c = project_function(g2, &b, 8, &QuadratureConfig::default()).unwrap();
        for k in 0..8 {
            let oracle =
                quadrature::adaptive(|t| g2(t) * laguerre_direct(0.25, k, t), 0.0, 600.0, 1e-11)
                    .unwrap();
            assert_abs_diff_eq!(c.coeffs()[k], oracle, epsilon = 1e-6);
        }
    }

    fn laguerre_direct(a: f64, k: usize, t: f64) -> f64 {
        (2.0 * a).sqrt() * (-a * t).exp() * laguerre_poly_eval(k, 2.0 * a * t)
    }

    #[test]
    fn projection_reports_heavy_tail() {
        let b = LaguerreBasis::new(0.5, 3).unwrap();
        let r = project_function(|t| (0.6 * t).exp(), &b, 3, &QuadratureConfig::default());
        assert!(matches!(r, Err(Error::TailMassExceeded { .. })));
    }

    #[test]
    fn projection_rejects_oversized_m() {
        let b = LaguerreBasis::new(0.5, 3).unwrap();
        assert!(project_function(|_| 0.0, &b, 4, &QuadratureConfig::default()).is_err());
    }

    #[test]
    fn expand_examples() {
        let b = LaguerreBasis::new(0.5, 3).unwrap();
        let c = CoeffVector::new(vec![1.0], b).unwrap();
        assert_abs_diff_eq!(expand(&c, &[0.0]).unwrap()[0], 1.0, epsilon = 1e-15);
        let z = CoeffVector::new(vec![0.0; 3], b).unwrap();
        assert!(expand(&z, &[0.0, 1.0, 50.0])
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(CoeffVector::new(vec![0.0; 4], b).is_err());
    }

    #[test]
    fn g2_round_trip_within_projection_error() {
        let g2 = |t: f64| t * t * (-0.1 * t).exp();
        let b = LaguerreBasis::new(0.1, 3).unwrap();
        let c = project_function(g2, &b, 3, &QuadratureConfig::default()).unwrap();
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 2.0).collect();
        let v = expand(&c, &times).unwrap();
        for (t, v) in times.iter().zip(v) {
            assert_abs_diff_eq!(v, g2(*t), epsilon = 1e-8);
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let b = LaguerreBasis::new(0.4, 8).unwrap();
        for k in 0..8 {
            assert_abs_diff_eq!(b.eval(k, 0.0), b.value_at_zero(), epsilon = 1e-12);
            let q = quadrature::adaptive(|t| b.eval(k, t), 0.0, 200.0, 1e-12).unwrap();
            assert_abs_diff_eq!(q, b.integral(k), epsilon = 1e-9);
        }
    }

    #[test]
    fn scale_selection_examples() {
        let b = LaguerreBasis::new(0.5, 3).unwrap();
        let f = move |t: f64| b.eval(0, t);
        let src = KernelSource::Function {
            func: &f,
            horizon: 20.0,
        };
        let q = QuadratureConfig::default();
        let s = select_scale_a(&src, 3, &[0.25, 0.5, 1.0], &q).unwrap();
        assert_eq!(s.a, 0.5);
        assert!(s.fit_error < 1e-10);
        let s = select_scale_a(&src, 3, &[0.3], &q).unwrap();
        assert_eq!(s.a, 0.3);
        assert!(select_scale_a(&src, 3, &[], &q).is_err());
        assert!(select_scale_a(&src, 3, &[0.1, -1.0], &q).is_err());
    }

    #[test]
    fn scale_selection_from_samples() {
        let b = LaguerreBasis::new(0.5, 3).unwrap();
        let times: Vec<f64> = (1..=40).map(|i| i as f64 * 0.5).collect();
        let values: Vec<f64> = times.iter().map(|&t| b.eval(1, t)).collect();
        let src = KernelSource::Samples {
            times: &times,
            values: &values,
        };
        let s = select_scale_a(&src, 3, &[0.2, 0.5, 0.9], &QuadratureConfig::default()).unwrap();
        assert_eq!(s.a, 0.5);
    }

    #[test]
    fn scale_search_skips_rank_deficient_scales() {
        let b = LaguerreBasis::new(0.1, 3).unwrap();
        let times: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| b.eval(0, t)).collect();
        let src = KernelSource::Samples {
            times: &times,
            values: &values,
        };
        let q = QuadratureConfig::default();
        let s = select_scale_a(&src, 11, &[0.1, 400.0], &q).unwrap();
        assert_eq!(s.a, 0.1);
        assert_eq!(s.curve.len(), 1);
        assert!(matches!(
            select_scale_a(&src, 11, &[400.0], &q),
            Err(Error::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = default_scale_grid();
        assert_eq!(g.len(), 32);
        assert_abs_diff_eq!(g[0], 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(g[31], 2.0, epsilon = 1e-12);
    }
}
