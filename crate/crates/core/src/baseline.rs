//! Discretized-convolution baselines: Tikhonov regularization and truncated
//! SVD on a quadrature-weighted convolution matrix.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laguerre::log_grid;
use crate::linalg::{self, Cholesky, Svd};
use crate::simulate::{grid_mse, Scenario, ScenarioSetup};

/// Relative spread of grid steps tolerated as equispaced.
pub const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    Rectangular,
    Trapezoid,
}

impl QuadRule {
    pub fn name(&self) -> &'static str {
        match self {
            QuadRule::Rectangular => "rectangular",
            QuadRule::Trapezoid => "trapezoid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionMatrix {
    pub entries: DMatrix<f64>,
    pub rule: QuadRule,
    pub dt: f64,
}

/// Common step of an equispaced grid, or [`Error::IrregularGrid`].
pub fn grid_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 points".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("grid must be increasing".into()));
    }
    let spread = times
        .windows(2)
        .map(|w| ((w[1] - w[0]) - dt).abs() / dt)
        .fold(0.0, f64::max);
    if spread > GRID_TOL {
        return Err(Error::IrregularGrid(spread));
    }
    Ok(dt)
}

/// `C_ij = w_ij · dt · g(t_i − t_j)` for `j ≤ i`. The trapezoid rule halves
/// the weights at `j = 1` and `j = i`, so its first row is zero.
pub fn build_conv_matrix<G: Fn(f64) -> f64>(
    g: G,
    times: &[f64],
    rule: QuadRule,
) -> Result<ConvolutionMatrix> {
    let dt = grid_step(times)?;
    let n = times.len();
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        if rule == QuadRule::Trapezoid && i == 0 {
            continue;
        }
        for j in 0..=i {
            let w = match rule {
                QuadRule::Rectangular => 1.0,
                QuadRule::Trapezoid if j == 0 || j == i => 0.5,
                QuadRule::Trapezoid => 1.0,
            };
            c[(i, j)] = w * dt * g(times[i] - times[j]);
        }
    }
    Ok(ConvolutionMatrix {
        entries: c,
        rule,
        dt,
    })
}

/// Prefactored `CᵀC + λI`.
#[derive(Debug, Clone)]
pub struct Tikhonov {
    ct: DMatrix<f64>,
    chol: Cholesky,
    lambda: f64,
}

impl Tikhonov {
    pub fn new(c: &ConvolutionMatrix, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let ct = c.entries.transpose();
        let n = ct.nrows();
        let normal = &ct * &c.entries + DMatrix::<f64>::identity(n, n) * lambda;
        let chol = linalg::cholesky(&linalg::symmetrize(&normal)).ok_or_else(|| {
            Error::InvalidInput("regularized normal matrix is not positive definite".into())
        })?;
        Ok(Self { ct, chol, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.ct.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ct.ncols(),
                got: y.len(),
            });
        }
        let rhs = &self.ct * DVector::from_column_slice(y);
        Ok(self.chol.solve(&rhs).as_slice().to_vec())
    }
}

/// Minimizer of `‖Cf − y‖² + λ‖f‖²`.
pub fn tikhonov_solve(c: &ConvolutionMatrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    Tikhonov::new(c, lambda)?.solve(y)
}

/// SVD of a convolution matrix, reused across thresholds and data.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    svd: Svd,
}

impl TruncatedSvd {
    pub fn new(c: &ConvolutionMatrix) -> Self {
        Self {
            svd: linalg::jacobi_svd(&c.entries),
        }
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.singular_values
    }

    /// `Uᵀy`, the part of the solve shared by every threshold.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.svd.u.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.svd.u.nrows(),
                got: y.len(),
            });
        }
        Ok((self.svd.u.transpose() * DVector::from_column_slice(y))
            .as_slice()
            .to_vec())
    }

    /// Pseudo-inverse solution from `Uᵀy`, keeping `s_k ≥ τ · s_max`.
    pub fn solve_projected(&self, uty: &[f64], tau: f64) -> Vec<f64> {
        let s = &self.svd.singular_values;
        let cut = tau * s.first().copied().unwrap_or(0.0);
        let n = self.svd.v.nrows();
        let mut x = vec![0.0; n];
        for (k, &sk) in s.iter().enumerate() {
            if sk <= 0.0 || sk < cut {
                continue;
            }
            let coef = uty[k] / sk;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.svd.v[(i, k)];
            }
        }
        x
    }

    pub fn solve(&self, y: &[f64], tau: f64) -> Result<Vec<f64>> {
        check_tau(tau)?;
        Ok(self.solve_projected(&self.project(y)?, tau))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    Ok(())
}

/// Truncated pseudo-inverse solution keeping singular values `≥ τ σ_max`.
pub fn svd_truncate_solve(c: &ConvolutionMatrix, y: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    TruncatedSvd::new(c).solve(y, tau)
}

/// Regularization grids swept by [`compare`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrids {
    pub lambdas: Vec<f64>,
    pub taus: Vec<f64>,
}

impl Default for SweepGrids {
    fn default() -> Self {
        Self {
            lambdas: log_grid(1e-6, 1e2, 25),
            taus: log_grid(1e-6, 1e-1, 25),
        }
    }
}

/// Mean risk of one baseline family across its parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSweep {
    pub method: String,
    pub rule: QuadRule,
    /// `(parameter, mean risk)` in grid order.
    pub curve: Vec<(f64, f64)>,
    pub best_param: f64,
    pub best_mean_risk: f64,
    pub best_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub label: String,
    pub reps: usize,
    pub a: f64,
    pub sigma: f64,
    pub laguerre_mean_risk: f64,
    pub laguerre_std_error: f64,
    pub sweeps: Vec<BaselineSweep>,
    /// Best Tikhonov sweep over both rules.
    pub tikhonov: BaselineSweep,
    /// Best truncated-SVD sweep over both rules.
    pub svd: BaselineSweep,
}

struct RepRisks {
    laguerre: f64,
    /// Per rule: Tikhonov risks then SVD risks, in grid order.
    baselines: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Penalized Laguerre estimator against oracle-tuned Tikhonov and truncated
/// SVD, with both quadrature rules, on the replicates of `scenario`.
pub fn compare(scenario: &Scenario, grids: &SweepGrids) -> Result<ComparisonReport> {
    let setup = ScenarioSetup::new(scenario)?;
    compare_with(&setup, grids)
}

pub fn compare_with(setup: &ScenarioSetup, grids: &SweepGrids) -> Result<ComparisonReport> {
    if grids.lambdas.is_empty() || grids.taus.is_empty() {
        return Err(Error::InvalidInput(
            "baseline grids must be nonempty".into(),
        ));
    }
    for &t in &grids.taus {
        check_tau(t)?;
    }
    let rules = [QuadRule::Rectangular, QuadRule::Trapezoid];
    let kernel = setup.kernel();
    let mut solvers = Vec::new();
    for rule in rules {
        let c = build_conv_matrix(|t| kernel.eval(t), setup.times(), rule)?;
        let tik = grids
            .lambdas
            .iter()
            .map(|&l| Tikhonov::new(&c, l))
            .collect::<Result<Vec<_>>>()?;
        solvers.push((tik, TruncatedSvd::new(&c)));
    }
    let reps = setup.scenario().reps;
    let per_rep: Vec<Result<RepRisks>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let obs = setup.dataset(rep)?;
            let fit = setup.prepared().fit(obs.values(), setup.sigma())?;
            let laguerre = setup.grid_risk(fit.coeffs.coeffs());
            let truth = setup.f_true();
            let mut baselines = Vec::with_capacity(solvers.len());
            for (tik, svd) in &solvers {
                let t_risk = tik
                    .iter()
                    .map(|s| {
                        s.solve(obs.values())
                            .map(|f| grid_mse(&f, truth.iter().copied()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let uty = svd.project(obs.values())?;
                let s_risk = grids
                    .taus
                    .iter()
                    .map(|&tau| grid_mse(&svd.solve_projected(&uty, tau), truth.iter().copied()))
                    .collect();
                baselines.push((t_risk, s_risk));
            }
            Ok(RepRisks {
                laguerre,
                baselines,
            })
        })
        .collect();
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let k = per_rep.len() as f64;
    let (lag_mean, lag_se) = mean_se(per_rep.iter().map(|r| r.laguerre));
    let mut sweeps = Vec::new();
    for (ri, rule) in rules.iter().enumerate() {
        for (method, params) in [("tikhonov", &grids.lambdas), ("tsvd", &grids.taus)] {
            let pick = |r: &RepRisks, j: usize| {
                let (t, s) = &r.baselines[ri];
                if method == "tikhonov" {
                    t[j]
                } else {
                    s[j]
                }
            };
            let curve: Vec<(f64, f64)> = params
                .iter()
                .enumerate()
                .map(|(j, &p)| (p, per_rep.iter().map(|r| pick(r, j)).sum::<f64>() / k))
                .collect();
            let best = curve
                .iter()
                .enumerate()
                .fold(0, |b, (j, v)| if v.1 < curve[b].1 { j } else { b });
            let (_, se) = mean_se(per_rep.iter().map(|r| pick(r, best)));
            sweeps.push(BaselineSweep {
                method: method.to_string(),
                rule: *rule,
                best_param: curve[best].0,
                best_mean_risk: curve[best].1,
                best_std_error: se,
                curve,
            });
        }
    }
    let best_of = |method: &str| {
        sweeps
            .iter()
            .filter(|s| s.method == method)
            .min_by(|a, b| a.best_mean_risk.total_cmp(&b.best_mean_risk))
            .cloned()
            .expect("every method is swept")
    };
    Ok(ComparisonReport {
        label: setup.scenario().label(),
        reps,
        a: setup.scale().a,
        sigma: setup.sigma(),
        laguerre_mean_risk: lag_mean,
        laguerre_std_error: lag_se,
        tikhonov: best_of("tikhonov"),
        svd: best_of("tsvd"),
        sweeps,
    })
}

fn mean_se<I: Iterator<Item = f64>>(it: I) -> (f64, f64) {
    let v: Vec<f64> = it.collect();
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Estimates of all three methods on one replicate, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCurves {
    pub times: Vec<f64>,
    pub observed: Vec<f64>,
    pub truth: Vec<f64>,
    pub laguerre: Vec<f64>,
    pub tikhonov: Vec<f64>,
    pub svd: Vec<f64>,
}

/// Curves for replicate `rep`, using the tuned parameters of `report`.
pub fn comparison_curves(
    setup: &ScenarioSetup,
    report: &ComparisonReport,
    rep: u64,
) -> Result<ComparisonCurves> {
    let obs = setup.dataset(rep)?;
    let fit = setup.prepared().fit(obs.values(), setup.sigma())?;
    let laguerre = crate::laguerre::expand(&fit.coeffs, setup.times())?;
    let kernel = setup.kernel();
    let c_t = build_conv_matrix(|t| kernel.eval(t), setup.times(), report.tikhonov.rule)?;
    let tikhonov = tikhonov_solve(&c_t, obs.values(), report.tikhonov.best_param)?;
    let c_s = build_conv_matrix(|t| kernel.eval(t), setup.times(), report.svd.rule)?;
    let svd = svd_truncate_solve(&c_s, obs.values(), report.svd.best_param)?;
    Ok(ComparisonCurves {
        times: setup.times().to_vec(),
        observed: obs.values().to_vec(),
        truth: setup.f_true().to_vec(),
        laguerre,
        tikhonov,
        svd,
    })
}
