//! Per-model diagnostics, penalized contrast and the assembled estimator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{self, DesignSummary, Observations, ZMode};
use crate::error::{Error, Result};
use crate::laguerre::{CoeffVector, LaguerreBasis};
use crate::linalg;
use crate::toeplitz::{self, LowerToeplitz};

/// Tolerance for the symmetry check in [`spectral_norm`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// `Q_m = G_m^{-1} Ω_m G_m^{-T}`, symmetrized.
pub fn q_matrix(g: &LowerToeplitz, omega_m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = g.size();
    if omega_m.nrows() != m || omega_m.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: omega_m.nrows(),
        });
    }
    match linalg::cholesky(omega_m) {
        Some(c) => q_from_factor(g, &c.lower),
        None => {
            let ginv = g.inverse()?.to_dense();
            Ok(linalg::symmetrize(&(&ginv * omega_m * ginv.transpose())))
        }
    }
}

/// `Q = (G^{-1}U)(G^{-1}U)ᵀ` for any factor `U` with `Ω = U Uᵀ`.
pub fn q_from_factor(g: &LowerToeplitz, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = g.size();
    let mut y = DMatrix::<f64>::zeros(m, u.ncols());
    for j in 0..u.ncols() {
        let col: Vec<f64> = u.column(j).iter().copied().collect();
        let x = g.solve(&col)?;
        for i in 0..m {
            y[(i, j)] = x[i];
        }
    }
    Ok(linalg::symmetrize(&(&y * y.transpose())))
}

/// `v_m² = Tr Q`.
pub fn variance_trace(q: &DMatrix<f64>) -> f64 {
    q.diagonal().sum()
}

/// `ρ_m² = λ_max(Q)` by cyclic Jacobi.
pub fn spectral_norm(q: &DMatrix<f64>) -> Result<f64> {
    linalg::check_symmetric(q, SYMMETRY_TOL)?;
    Ok(linalg::jacobi_eigenvalues(q).last().copied().unwrap_or(0.0))
}

/// Slope and intercept of `log ρ_m²` against `log m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub log_c: f64,
}

/// Ordinary least squares of `log ρ_m²` on `log m`.
pub fn estimate_alpha(ms: &[usize], rho2: &[f64]) -> Result<AlphaFit> {
    if ms.len() != rho2.len() {
        return Err(Error::DimensionMismatch {
            expected: ms.len(),
            got: rho2.len(),
        });
    }
    if let Some(r) = rho2.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "rho^2 must be positive, got {r}"
        )));
    }
    if ms.iter().any(|m| *m == 0) {
        return Err(Error::InvalidInput("model sizes start at 1".into()));
    }
    let x: Vec<f64> = ms.iter().map(|m| (*m as f64).ln()).collect();
    let y: Vec<f64> = rho2.iter().map(|r| r.ln()).collect();
    let k = x.len() as f64;
    if x.is_empty() {
        return Err(Error::DegenerateRegression);
    }
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateRegression);
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let alpha = sxy / sxx;
    Ok(AlphaFit {
        alpha,
        log_c: my - alpha * mx,
    })
}

/// Quantities the penalty needs besides `v_m²`, `ρ_m²` and `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub sigma: f64,
    pub horizon: f64,
    pub n: usize,
    pub b: f64,
    pub alpha: f64,
    pub c_pen: f64,
}

/// `c_pen σ² (T/n) [(1+B) v² + (1+1/B)(2α+2) ρ² log m]`.
///
/// `m` is real so that the arithmetic can be checked at non-integer points.
pub fn penalty(m: f64, v2: f64, rho2: f64, p: &PenaltyParams) -> f64 {
    let scale = p.c_pen * p.sigma * p.sigma * p.horizon / p.n as f64;
    scale * ((1.0 + p.b) * v2 + (1.0 + 1.0 / p.b) * (2.0 * p.alpha + 2.0) * rho2 * m.ln())
}

/// `γ(f̂_m) = −‖f̂_m‖²`, valid when `f̂_m` is a prefix of `G_M^{-1} z_M`.
pub fn contrast_value(fhat_m: &[f64]) -> f64 {
    -fhat_m.iter().map(|v| v * v).sum::<f64>()
}

/// `‖f̂_m‖² − 2⟨f̂_m, f̂_M⟩` with `f̂_m` zero-padded.
pub fn contrast_literal(fhat_m: &[f64], fhat_full: &[f64]) -> f64 {
    let norm: f64 = fhat_m.iter().map(|v| v * v).sum();
    let inner: f64 = fhat_m.iter().zip(fhat_full).map(|(a, b)| a * b).sum();
    norm - 2.0 * inner
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub m: usize,
    pub v2: f64,
    pub rho2: f64,
    pub pen: f64,
    pub contrast: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTable {
    pub rows: Vec<PenaltyRow>,
    pub alpha: AlphaFit,
}

impl PenaltyTable {
    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }
}

/// `m̂ = argmin (contrast + pen)`, smallest `m` on ties.
pub fn select_model(table: &PenaltyTable) -> usize {
    argmin_first(&table.objectives()) + 1
}

fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AlphaMode {
    /// Regress over `m_lo..=m_hi` (clamped to `M`).
    Auto {
        m_lo: usize,
        m_hi: usize,
    },
    Fixed {
        value: f64,
    },
}

impl Default for AlphaMode {
    fn default() -> Self {
        AlphaMode::Auto { m_lo: 1, m_hi: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Maximum model size `M`.
    pub size: usize,
    pub b: f64,
    pub c_pen: f64,
    pub alpha: AlphaMode,
    pub z_mode: ZMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            size: 11,
            b: 0.5,
            c_pen: 1.5,
            alpha: AlphaMode::default(),
            z_mode: ZMode::Truncate,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.size == 0 {
            problems.push("M must be at least 1".to_string());
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            problems.push(format!("B must be positive, got {}", self.b));
        }
        if !(self.c_pen > 0.0) || !self.c_pen.is_finite() {
            problems.push(format!("c_pen must be positive, got {}", self.c_pen));
        }
        match self.alpha {
            AlphaMode::Auto { m_lo, m_hi } if m_lo == 0 || m_hi <= m_lo => {
                problems.push(format!(
                    "alpha range {m_lo}..={m_hi} needs 1 <= m_lo < m_hi"
                ));
            }
            AlphaMode::Fixed { value } if !value.is_finite() => {
                problems.push(format!("alpha must be finite, got {value}"));
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }
}

/// Noise-independent part of the estimator: `G_M`, the per-`m` `Q_m`
/// diagnostics and `α`, for a fixed sampling design.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    config: EstimatorConfig,
    basis: LaguerreBasis,
    g: LowerToeplitz,
    design: DesignSummary,
    v2: Vec<f64>,
    rho2: Vec<f64>,
    alpha: AlphaFit,
}

impl PreparedModel {
    /// `obs` supplies the times and horizon; its values are not used.
    pub fn new(
        obs: &Observations,
        g_coeffs: &CoeffVector,
        config: &EstimatorConfig,
    ) -> Result<Self> {
        config.validate()?;
        let size = config.size;
        let basis = LaguerreBasis::new(g_coeffs.basis().a(), size)?;
        let g = toeplitz::build_g(g_coeffs, size)?;
        g.check_invertible()?;
        let design = design::summarize_design(obs, &basis)?;
        let mut v2 = Vec::with_capacity(size);
        let mut rho2 = Vec::with_capacity(size);
        for m in 1..=size {
            let l = design::leading_factor(&design, m)?;
            let u = l
                .solve_lower_triangular(&DMatrix::identity(m, m))
                .ok_or(Error::RankDeficientDesign {
                    ratio: design.cholesky().pivot_ratio(),
                    size,
                    n: obs.len(),
                })?
                .transpose();
            let q = q_from_factor(&g.leading(m), &u)?;
            v2.push(variance_trace(&q));
            rho2.push(spectral_norm(&q)?);
        }
        let alpha = match config.alpha {
            AlphaMode::Fixed { value } => AlphaFit {
                alpha: value,
                log_c: f64::NAN,
            },
            AlphaMode::Auto { m_lo, m_hi } => {
                let hi = m_hi.min(size);
                if size == 1 {
                    AlphaFit {
                        alpha: 0.0,
                        log_c: rho2[0].ln(),
                    }
                } else {
                    let ms: Vec<usize> = (m_lo..=hi).collect();
                    let r: Vec<f64> = ms.iter().map(|m| rho2[m - 1]).collect();
                    estimate_alpha(&ms, &r)?
                }
            }
        };
        Ok(Self {
            config: *config,
            basis,
            g,
            design,
            v2,
            rho2,
            alpha,
        })
    }

    pub fn basis(&self) -> &LaguerreBasis {
        &self.basis
    }

    pub fn g(&self) -> &LowerToeplitz {
        &self.g
    }

    pub fn design(&self) -> &DesignSummary {
        &self.design
    }

    pub fn v2(&self) -> &[f64] {
        &self.v2
    }

    pub fn rho2(&self) -> &[f64] {
        &self.rho2
    }

    pub fn alpha(&self) -> AlphaFit {
        self.alpha
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// `G_m^{-1} z_m` for `m = 1..M`. In truncate mode each entry is a
    /// prefix of the last.
    pub fn coefficient_path(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        let size = self.config.size;
        let z = self.design.z_of(values)?;
        match self.config.z_mode {
            ZMode::Truncate => {
                let full = self.g.solve(&z)?;
                Ok((1..=size).map(|m| full[..m].to_vec()).collect())
            }
            ZMode::Refit => (1..=size)
                .map(|m| {
                    let zm = self.design.z_of_leading(values, m)?;
                    self.g.leading(m).solve(&zm)
                })
                .collect(),
        }
    }

    /// Penalized selection for values observed on this design.
    pub fn fit(&self, values: &[f64], sigma: f64) -> Result<ModelFit> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        let size = self.config.size;
        let path = self.coefficient_path(values)?;
        let full = path[size - 1].clone();
        let params = PenaltyParams {
            sigma,
            horizon: self.design.horizon(),
            n: self.design.n(),
            b: self.config.b,
            alpha: self.alpha.alpha,
            c_pen: self.config.c_pen,
        };
        let rows: Vec<PenaltyRow> = (1..=size)
            .map(|m| {
                let fm = &path[m - 1];
                let contrast = match self.config.z_mode {
                    ZMode::Truncate => contrast_value(fm),
                    ZMode::Refit => contrast_literal(fm, &full),
                };
                let pen = penalty(m as f64, self.v2[m - 1], self.rho2[m - 1], &params);
                PenaltyRow {
                    m,
                    v2: self.v2[m - 1],
                    rho2: self.rho2[m - 1],
                    pen,
                    contrast,
                    objective: contrast + pen,
                }
            })
            .collect();
        let table = PenaltyTable {
            rows,
            alpha: self.alpha,
        };
        let m_hat = select_model(&table);
        let chosen = path[m_hat - 1].clone();
        let beta_hat = self.basis.value_at_zero() * chosen.iter().sum::<f64>();
        let transit_integral: f64 = chosen
            .iter()
            .enumerate()
            .map(|(k, c)| self.basis.integral(k) * c)
            .sum();
        Ok(ModelFit {
            m_hat,
            coeffs: CoeffVector::new(chosen, self.basis)?,
            full_coeffs: full,
            table,
            beta_hat,
            transit_integral,
            sigma_used: sigma,
            config: self.config,
            path,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub m_hat: usize,
    pub coeffs: CoeffVector,
    /// `G_M^{-1} z_M`.
    pub full_coeffs: Vec<f64>,
    pub table: PenaltyTable,
    /// `f̂(0)`.
    pub beta_hat: f64,
    /// `∫₀^∞ f̂`.
    pub transit_integral: f64,
    pub sigma_used: f64,
    pub config: EstimatorConfig,
    #[serde(skip)]
    pub path: Vec<Vec<f64>>,
}

impl ModelFit {
    /// Coefficients of the size-`m` estimate.
    pub fn coeffs_for(&self, m: usize) -> CoeffVector {
        CoeffVector::new(self.path[m - 1].clone(), *self.coeffs.basis())
            .expect("path entries fit the basis")
    }
}

/// Full pipeline: design, `G_M^{-1} z_M`, penalty table, `m̂` and functionals.
/// Uses `obs.sigma()` when present and the difference estimator otherwise.
pub fn fit(
    obs: &Observations,
    g_coeffs: &CoeffVector,
    config: &EstimatorConfig,
) -> Result<ModelFit> {
    let sigma = match obs.sigma() {
        Some(s) => s,
        None => design::estimate_sigma(obs)?,
    };
    PreparedModel::new(obs, g_coeffs, config)?.fit(obs.values(), sigma)
}
