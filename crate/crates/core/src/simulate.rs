//! Synthetic DCE-style data: kernels, target functions, SNR-calibrated noise
//! and Monte-Carlo risk studies.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Observations;
use crate::error::{Error, Result};
use crate::laguerre::{
    self, CoeffVector, KernelSource, LaguerreBasis, QuadratureConfig, ScaleChoice,
};
use crate::quadrature;
use crate::select::{EstimatorConfig, ModelFit, PreparedModel};

/// Absolute tolerance of the Volterra ground truth.
pub const CONVOLUTION_TOL: f64 = 1e-9;

/// A user-supplied real function, shared between threads.
#[derive(Clone)]
pub struct CustomFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl CustomFn {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        CustomFn(Arc::new(f))
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn")
    }
}

impl PartialEq for CustomFn {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `t² e^{-0.1t}`.
    G2,
    /// `t⁷ (100+t)^{-1} exp(−0.9 t^{3/4})`.
    G3,
    /// Parametric stand-in for a measured arterial input function: a gamma
    /// variate plus a delayed, damped recirculation bump. Not one of the
    /// published kernels.
    G1Surrogate,
    /// `e^{-rate·t}`.
    Exponential { rate: f64 },
    #[serde(skip)]
    Custom(CustomFn),
}

impl KernelKind {
    pub fn name(&self) -> String {
        match self {
            KernelKind::G2 => "g2".into(),
            KernelKind::G3 => "g3".into(),
            KernelKind::G1Surrogate => "g1_surrogate".into(),
            KernelKind::Exponential { rate } => format!("exp({rate})"),
            KernelKind::Custom(_) => "custom".into(),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "g2" => Some(KernelKind::G2),
            "g3" => Some(KernelKind::G3),
            "g1_surrogate" | "g1" => Some(KernelKind::G1Surrogate),
            _ => {
                let rate = name.strip_prefix("exp(")?.strip_suffix(')')?.parse().ok()?;
                Some(KernelKind::Exponential { rate })
            }
        }
    }

    /// Unnormalized kernel value.
    pub fn raw(&self, t: f64) -> f64 {
        match self {
            KernelKind::G2 => t * t * (-0.1 * t).exp(),
            KernelKind::G3 => t.powi(7) / (100.0 + t) * (-0.9 * t.powf(0.75)).exp(),
            KernelKind::G1Surrogate => {
                let first = (t / 3.0).powi(3) * (-(t / 3.0)).exp();
                let s = t - 15.0;
                let recirc = if s > 0.0 {
                    0.35 * (s / 6.0).powi(2) * (-(s / 6.0)).exp()
                } else {
                    0.0
                };
                first + recirc
            }
            KernelKind::Exponential { rate } => (-rate * t).exp(),
            KernelKind::Custom(f) => (f.0)(t),
        }
    }

    /// Laplace transform of the unnormalized kernel, where a closed form
    /// exists.
    pub fn raw_laplace(&self, s: Complex64) -> Option<Complex64> {
        match self {
            KernelKind::G2 => Some(2.0 / (s + 0.1).powi(3)),
            KernelKind::Exponential { rate } => Some(1.0 / (s + *rate)),
            _ => None,
        }
    }
}

/// Kernel rescaled so that its maximum over `[0, T]` is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kind: KernelKind,
    scale: f64,
    argmax: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, horizon: f64) -> Result<Self> {
        if let KernelKind::Exponential { rate } = kind {
            if !rate.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "kernel rate must be finite, got {rate}"
                )));
            }
        }
        let (argmax, max) = maximize(|t| kind.raw(t), 0.0, horizon);
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::InvalidInput(format!(
                "kernel {} has no positive maximum on [0, {horizon}]",
                kind.name()
            )));
        }
        Ok(Self {
            kind,
            scale: 1.0 / max,
            argmax,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    /// Multiplier applied to the raw kernel.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Location of the maximum on `[0, T]`.
    pub fn argmax(&self) -> f64 {
        self.argmax
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.scale * self.kind.raw(t)
    }

    pub fn laplace(&self, s: Complex64) -> Option<Complex64> {
        self.kind.raw_laplace(s).map(|v| v * self.scale)
    }
}

/// Grid search followed by golden-section refinement.
fn maximize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    const GRID: usize = 4000;
    let step = (hi - lo) / GRID as f64;
    let mut best = 0;
    let mut best_val = f(lo);
    for i in 1..=GRID {
        let v = f(lo + i as f64 * step);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    let mut a = lo + best.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best + 1) as f64 * step).min(hi);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        if b - a <= 1e-14 * (1.0 + b.abs()) {
            break;
        }
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v >= best_val {
        (x, v)
    } else {
        (lo + best as f64 * step, best_val)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `e^{-0.1x}`.
    F1,
    /// `e^{-0.6x}`.
    F2,
    /// `(f1 + f2) / 2`.
    F3,
    /// Survival function of Gamma(shape 2, scale 0.5): `e^{-2x}(1+2x)`.
    F4,
    /// `(x+1)^{-1/3}`.
    F5,
    /// `Σ c_k φ_k` for a Laguerre basis with scale `a`.
    Laguerre { a: f64, coeffs: Vec<f64> },
    #[serde(skip)]
    Custom(CustomFn),
}

impl TargetKind {
    pub fn name(&self) -> String {
        match self {
            TargetKind::F1 => "f1".into(),
            TargetKind::F2 => "f2".into(),
            TargetKind::F3 => "f3".into(),
            TargetKind::F4 => "f4".into(),
            TargetKind::F5 => "f5".into(),
            TargetKind::Laguerre { .. } => "laguerre".into(),
            TargetKind::Custom(_) => "custom".into(),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "f1" => TargetKind::F1,
            "f2" => TargetKind::F2,
            "f3" => TargetKind::F3,
            "f4" => TargetKind::F4,
            "f5" => TargetKind::F5,
            _ => return None,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TargetKind::F1 => (-0.1 * x).exp(),
            TargetKind::F2 => (-0.6 * x).exp(),
            TargetKind::F3 => 0.5 * (-0.1 * x).exp() + 0.5 * (-0.6 * x).exp(),
            TargetKind::F4 => (-2.0 * x).exp() * (1.0 + 2.0 * x),
            TargetKind::F5 => (x + 1.0).powf(-1.0 / 3.0),
            TargetKind::Laguerre { a, coeffs } => {
                let b = laguerre_basis_unchecked(*a, coeffs.len());
                b.eval_all(x, coeffs.len())
                    .iter()
                    .zip(coeffs)
                    .map(|(p, c)| p * c)
                    .sum()
            }
            TargetKind::Custom(f) => (f.0)(x),
        }
    }
}

fn laguerre_basis_unchecked(a: f64, m: usize) -> LaguerreBasis {
    LaguerreBasis::new(a, m.max(1))
        .unwrap_or_else(|_| LaguerreBasis::new(1.0, 1).expect("valid basis"))
}

/// `∫₀^t g(t−τ) f(τ) dτ` by adaptive Gauss–Legendre quadrature.
pub fn true_convolution<G: Fn(f64) -> f64, F: Fn(f64) -> f64>(g: G, f: F, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    quadrature::adaptive(|tau| g(t - tau) * f(tau), 0.0, t, CONVOLUTION_TOL)
}

/// How the variances in the SNR definition are normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrVariance {
    /// `(1/T)∫φ² − ((1/T)∫φ)²`.
    #[default]
    TimeAveraged,
    /// `∫φ² − (∫φ)²`, which can be negative.
    Literal,
}

fn variance_on<F: Fn(f64) -> f64>(f: F, horizon: f64, mode: SnrVariance) -> Result<f64> {
    let m1 = quadrature::adaptive(&f, 0.0, horizon, 1e-11)?;
    let m2 = quadrature::adaptive(|t| f(t).powi(2), 0.0, horizon, 1e-11)?;
    let var = match mode {
        SnrVariance::TimeAveraged => m2 / horizon - (m1 / horizon).powi(2),
        SnrVariance::Literal => m2 - m1 * m1,
    };
    let roundoff = 1e-12 * m2.abs().max(m1 * m1);
    if var < -roundoff {
        return Err(Error::NegativeVariance(var));
    }
    Ok(var.max(0.0))
}

/// `σ = √(Var_T(f) / (snr² Var_T(g)))`.
pub fn sigma_from_variances(var_f: f64, var_g: f64, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::InvalidInput(format!(
            "snr must be positive, got {snr}"
        )));
    }
    if var_f < 0.0 {
        return Err(Error::NegativeVariance(var_f));
    }
    if !(var_g > 0.0) {
        return Err(Error::NegativeVariance(var_g));
    }
    Ok((var_f / (snr * snr * var_g)).sqrt())
}

pub fn snr_to_sigma<G: Fn(f64) -> f64, F: Fn(f64) -> f64>(
    g: G,
    f: F,
    snr: f64,
    horizon: f64,
    mode: SnrVariance,
) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let var_f = variance_on(f, horizon, mode)?;
    let var_g = variance_on(g, horizon, mode)?;
    sigma_from_variances(var_f, var_g, snr)
}

/// Counter-based standard normal draws keyed by `(seed, rep, i)`.
///
/// Stream `rep` of a ChaCha8 generator seeded from `seed`; draw `i` uses the
/// two 64-bit words at word position `4i` through Box–Muller.
pub fn standard_normal(seed: u64, rep: u64, i: u64) -> f64 {
    let mut rng = noise_rng(seed, rep);
    rng.set_word_pos(u128::from(i) * 4);
    box_muller(rng.next_u64(), rng.next_u64())
}

/// The first `n` draws of [`standard_normal`] for one replicate.
pub fn standard_normals(seed: u64, rep: u64, n: usize) -> Vec<f64> {
    let mut rng = noise_rng(seed, rep);
    (0..n)
        .map(|_| box_muller(rng.next_u64(), rng.next_u64()))
        .collect()
}

fn noise_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn box_muller(x: u64, y: u64) -> f64 {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = ((x >> 11) + 1) as f64 * scale;
    let u2 = (y >> 11) as f64 * scale;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Choice of the Laguerre scale for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleSetting {
    /// Grid search over the default log grid.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kernel: KernelKind,
    pub target: TargetKind,
    pub n: usize,
    pub horizon: f64,
    pub snr: f64,
    pub reps: usize,
    pub seed: u64,
    pub a: ScaleSetting,
    pub estimator: EstimatorConfig,
    pub snr_variance: SnrVariance,
    /// Noise level used instead of the SNR calibration when set.
    pub sigma: Option<f64>,
}

impl Scenario {
    /// Defaults of the simulation study: `T = 100`, `M = 11`, automatic `a`.
    pub fn new(kernel: KernelKind, target: TargetKind, n: usize, snr: f64) -> Self {
        Self {
            kernel,
            target,
            n,
            horizon: 100.0,
            snr,
            reps: 400,
            seed: 20_240_601,
            a: ScaleSetting::Auto,
            estimator: EstimatorConfig::default(),
            snr_variance: SnrVariance::TimeAveraged,
            sigma: None,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}/snr{}/n{}",
            self.kernel.name(),
            self.target.name(),
            self.snr,
            self.n
        )
    }

    /// Every problem with the scenario, or `Ok` when there are none.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n < 2 {
            problems.push(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            problems.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.sigma.is_none() && (!(self.snr > 0.0) || !self.snr.is_finite()) {
            problems.push(format!("snr must be positive, got {}", self.snr));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0) || !s.is_finite() {
                problems.push(format!("sigma must be nonnegative, got {s}"));
            }
        }
        if self.reps < 1 {
            problems.push(format!("reps must be at least 1, got {}", self.reps));
        }
        if let ScaleSetting::Fixed(a) = self.a {
            if !(a > 0.0) || !a.is_finite() {
                problems.push(format!("a must be positive, got {a}"));
            }
        }
        if let TargetKind::Laguerre { a, coeffs } = &self.target {
            if !(*a > 0.0) || coeffs.is_empty() {
                problems.push(format!(
                    "laguerre target needs a > 0 and coefficients, got a = {a}"
                ));
            }
        }
        if let Err(Error::InvalidInput(msg)) = self.estimator.validate() {
            problems.push(msg);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }
}

/// Everything a scenario needs that does not depend on the replicate.
#[derive(Debug, Clone)]
pub struct ScenarioSetup {
    scenario: Scenario,
    kernel: Kernel,
    scale: ScaleChoice,
    g_coeffs: CoeffVector,
    times: Vec<f64>,
    q: Vec<f64>,
    f_true: Vec<f64>,
    sigma: f64,
    prepared: PreparedModel,
    phi: DMatrix<f64>,
}

/// Laguerre scale for a kernel under a setting.
pub fn resolve_scale(
    kernel: &Kernel,
    size: usize,
    horizon: f64,
    setting: &ScaleSetting,
) -> Result<ScaleChoice> {
    let quad = QuadratureConfig::default();
    let func = |t: f64| kernel.eval(t);
    let grid = match setting {
        ScaleSetting::Auto => laguerre::default_scale_grid(),
        ScaleSetting::Fixed(a) => vec![*a],
    };
    laguerre::select_scale_a(
        &KernelSource::Function {
            func: &func,
            horizon,
        },
        size,
        &grid,
        &quad,
    )
}

impl ScenarioSetup {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let kernel = Kernel::new(scenario.kernel.clone(), scenario.horizon)?;
        let size = scenario.estimator.size;
        let scale = resolve_scale(&kernel, size, scenario.horizon, &scenario.a)?;
        let basis = LaguerreBasis::new(scale.a, size)?;
        let g_coeffs = laguerre::project_function(
            |t| kernel.eval(t),
            &basis,
            size,
            &QuadratureConfig::default(),
        )?;
        let n = scenario.n;
        let times: Vec<f64> = (1..=n)
            .map(|i| i as f64 * scenario.horizon / n as f64)
            .collect();
        let target = &scenario.target;
        let q = times
            .iter()
            .map(|&t| true_convolution(|s| kernel.eval(s), |x| target.eval(x), t))
            .collect::<Result<Vec<_>>>()?;
        let f_true: Vec<f64> = times.iter().map(|&t| target.eval(t)).collect();
        let sigma = match scenario.sigma {
            Some(s) => s,
            None => snr_to_sigma(
                |t| kernel.eval(t),
                |x| target.eval(x),
                scenario.snr,
                scenario.horizon,
                scenario.snr_variance,
            )?,
        };
        let obs = Observations::new(times.clone(), q.clone(), scenario.horizon, Some(sigma))?;
        let prepared = PreparedModel::new(&obs, &g_coeffs, &scenario.estimator)?;
        let phi = laguerre::design_matrix(&basis, &times)?;
        Ok(Self {
            scenario: scenario.clone(),
            kernel,
            scale,
            g_coeffs,
            times,
            q,
            f_true,
            sigma,
            prepared,
            phi,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn scale(&self) -> &ScaleChoice {
        &self.scale
    }

    pub fn g_coeffs(&self) -> &CoeffVector {
        &self.g_coeffs
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Noiseless convolution on the grid.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Target values on the grid.
    pub fn f_true(&self) -> &[f64] {
        &self.f_true
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn prepared(&self) -> &PreparedModel {
        &self.prepared
    }

    /// Replicate `rep`: `y_i = q(t_i) + σ ε_i`.
    pub fn dataset(&self, rep: u64) -> Result<Observations> {
        let eps = standard_normals(self.scenario.seed, rep, self.times.len());
        let y = self
            .q
            .iter()
            .zip(&eps)
            .map(|(q, e)| q + self.sigma * e)
            .collect();
        Observations::new(
            self.times.clone(),
            y,
            self.scenario.horizon,
            Some(self.sigma),
        )
    }

    /// Grid risk of the first `m` entries of `coeffs`.
    pub fn grid_risk(&self, coeffs: &[f64]) -> f64 {
        let n = self.times.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut v = 0.0;
            for (k, c) in coeffs.iter().enumerate() {
                v += self.phi[(i, k)] * c;
            }
            acc += (v - self.f_true[i]).powi(2);
        }
        acc / n as f64
    }

    /// Fit and risks for one replicate.
    pub fn run_replicate(&self, rep: u64) -> Result<ReplicateOutcome> {
        let obs = self.dataset(rep)?;
        let fit = self.prepared.fit(obs.values(), self.sigma)?;
        let risk = self.grid_risk(fit.coeffs.coeffs());
        let fixed_m_risk = fit.path.iter().map(|c| self.grid_risk(c)).collect();
        Ok(ReplicateOutcome {
            risk,
            m_hat: fit.m_hat,
            fixed_m_risk,
            beta_hat: fit.beta_hat,
            transit_integral: fit.transit_integral,
        })
    }
}

/// Summary of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub risk: f64,
    pub m_hat: usize,
    pub fixed_m_risk: Vec<f64>,
    pub beta_hat: f64,
    pub transit_integral: f64,
}

/// One simulated dataset of a scenario.
pub fn simulate_dataset(scenario: &Scenario, rep: u64) -> Result<Observations> {
    ScenarioSetup::new(scenario)?.dataset(rep)
}

/// `n^{-1} Σ (f̂(t_i) − f(t_i))²`.
pub fn empirical_risk<F: Fn(f64) -> f64>(fit: &ModelFit, target: F, times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::InvalidInput("risk needs at least one time".into()));
    }
    let fhat = laguerre::expand(&fit.coeffs, times)?;
    Ok(grid_mse(&fhat, times.iter().map(|&t| target(t))))
}

/// Mean squared difference between `estimate` and `truth`.
pub fn grid_mse<I: IntoIterator<Item = f64>>(estimate: &[f64], truth: I) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for (e, t) in estimate.iter().zip(truth) {
        acc += (e - t).powi(2);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        acc / count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub label: String,
    pub kernel: String,
    pub target: String,
    pub n: usize,
    pub snr: f64,
    pub horizon: f64,
    pub reps: usize,
    pub failed_reps: usize,
    pub a: f64,
    pub sigma: f64,
    pub mean_risk: f64,
    /// `100 · mean_risk`.
    pub risk_x100: f64,
    pub std_error: f64,
    /// Counts of `m̂ = 1..M`.
    pub m_hat_histogram: Vec<usize>,
    /// Mean risk of the size-`m` estimate, `m = 1..M`.
    pub fixed_m_risk: Vec<f64>,
    pub oracle_m: usize,
    pub oracle_risk: f64,
    pub mean_beta_hat: f64,
    pub mean_transit_integral: f64,
}

/// Largest fraction of failing replicates a report tolerates.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Runs all replicates of a scenario in parallel and aggregates them in
/// replicate order.
pub fn monte_carlo(scenario: &Scenario) -> Result<RiskReport> {
    let setup = ScenarioSetup::new(scenario)?;
    monte_carlo_with(&setup)
}

pub fn monte_carlo_with(setup: &ScenarioSetup) -> Result<RiskReport> {
    let scenario = setup.scenario();
    let reps = scenario.reps;
    let outcomes: Vec<Result<ReplicateOutcome>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| setup.run_replicate(r))
        .collect();
    let size = scenario.estimator.size;
    let mut ok = Vec::with_capacity(reps);
    let mut first_err = None;
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    if failed as f64 > MAX_FAILURE_RATE * reps as f64 || ok.is_empty() {
        return Err(Error::ReplicateFailures {
            failed,
            total: reps,
            first: Box::new(first_err.expect("at least one failure")),
        });
    }
    if failed > 0 {
        log::warn!("{}: {failed} of {reps} replicates failed", scenario.label());
    }
    let k = ok.len() as f64;
    let mean_risk = ok.iter().map(|o| o.risk).sum::<f64>() / k;
    let var = if ok.len() > 1 {
        ok.iter().map(|o| (o.risk - mean_risk).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let mut hist = vec![0usize; size];
    let mut fixed = vec![0.0; size];
    for o in &ok {
        hist[o.m_hat - 1] += 1;
        for (acc, r) in fixed.iter_mut().zip(&o.fixed_m_risk) {
            *acc += r;
        }
    }
    for v in fixed.iter_mut() {
        *v /= k;
    }
    let oracle_idx = fixed
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < fixed[best] { i } else { best });
    Ok(RiskReport {
        label: scenario.label(),
        kernel: scenario.kernel.name(),
        target: scenario.target.name(),
        n: scenario.n,
        snr: scenario.snr,
        horizon: scenario.horizon,
        reps,
        failed_reps: failed,
        a: setup.scale().a,
        sigma: setup.sigma(),
        mean_risk,
        risk_x100: 100.0 * mean_risk,
        std_error: (var / k).sqrt(),
        m_hat_histogram: hist,
        oracle_m: oracle_idx + 1,
        oracle_risk: fixed[oracle_idx],
        fixed_m_risk: fixed,
        mean_beta_hat: ok.iter().map(|o| o.beta_hat).sum::<f64>() / k,
        mean_transit_integral: ok.iter().map(|o| o.transit_integral).sum::<f64>() / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_examples() {
        assert_eq!(KernelKind::G2.raw(0.0), 0.0);
        assert_abs_diff_eq!(
            KernelKind::G2.raw(20.0),
            400.0 * (-2.0f64).exp(),
            epsilon = 1e-12
        );
        let k = Kernel::new(KernelKind::G2, 100.0).unwrap();
        assert_abs_diff_eq!(k.argmax(), 20.0, epsilon = 1e-6);
        assert_abs_diff_eq!(k.eval(20.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k.scale(), 1.0 / (400.0 * (-2.0f64).exp()), epsilon = 1e-14);
    }

    #[test]
    fn kernels_are_normalized() {
        for kind in [
            KernelKind::G3,
            KernelKind::G1Surrogate,
            KernelKind::Exponential { rate: 0.3 },
        ] {
            let k = Kernel::new(kind, 100.0).unwrap();
            let grid_max = (0..=100_000)
                .map(|i| k.eval(i as f64 * 1e-3))
                .fold(0.0, f64::max);
            assert!(grid_max <= 1.0 + 1e-12);
            assert!(grid_max > 1.0 - 1e-6);
        }
    }

    #[test]
    fn kernel_names_round_trip() {
        for kind in [
            KernelKind::G2,
            KernelKind::G3,
            KernelKind::G1Surrogate,
            KernelKind::Exponential { rate: 0.5 },
        ] {
            assert_eq!(KernelKind::parse(&kind.name()), Some(kind));
        }
        assert_eq!(KernelKind::parse("g9"), None);
    }

    #[test]
    fn target_examples() {
        assert_eq!(TargetKind::F1.eval(0.0), 1.0);
        assert_eq!(TargetKind::F4.eval(0.0), 1.0);
        for &x in &[0.1, 0.7, 2.0, 5.0] {
            let density_tail =
                quadrature::adaptive(|s| 4.0 * s * (-2.0 * s).exp(), x, x + 60.0, 1e-13).unwrap();
            assert_abs_diff_eq!(TargetKind::F4.eval(x), density_tail, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(TargetKind::F5.eval(7.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn convolution_examples() {
        let g = |t: f64| KernelKind::G2.raw(t);
        assert_eq!(true_convolution(g, |_| 0.0, 30.0).unwrap(), 0.0);
        let phi0 = |t: f64| (-0.5 * t).exp();
        for &t in &[0.5, 3.0, 17.0] {
            let v = true_convolution(phi0, phi0, t).unwrap();
            assert_abs_diff_eq!(v, t * (-0.5 * t).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn convolution_matches_refined_trapezoid() {
        let g = |t: f64| KernelKind::G2.raw(t);
        let f = |x: f64| TargetKind::F1.eval(x);
        let t = 10.0;
        let n = 200_000;
        let h = t / n as f64;
        let mut trap = 0.5 * (g(t) * f(0.0) + g(0.0) * f(t));
        for i in 1..n {
            let s = i as f64 * h;
            trap += g(t - s) * f(s);
        }
        trap *= h;
        assert_abs_diff_eq!(true_convolution(g, f, t).unwrap(), trap, epsilon = 1e-7);
    }

    #[test]
    fn sigma_examples() {
        assert_abs_diff_eq!(
            sigma_from_variances(0.04, 0.01, 2.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let g = |t: f64| KernelKind::G2.raw(t);
        assert_abs_diff_eq!(
            snr_to_sigma(g, |_| 3.0, 5.0, 100.0, SnrVariance::TimeAveraged).unwrap(),
            0.0,
            epsilon = 1e-6
        );
        let r = snr_to_sigma(
            g,
            |x| TargetKind::F1.eval(x),
            5.0,
            100.0,
            SnrVariance::Literal,
        );
        assert!(matches!(r, Err(Error::NegativeVariance(_))));
    }

    #[test]
    fn noise_is_counter_based() {
        let seq = standard_normals(7, 3, 50);
        for (i, v) in seq.iter().enumerate() {
            assert_eq!(*v, standard_normal(7, 3, i as u64));
        }
        assert_ne!(standard_normals(7, 4, 5), standard_normals(7, 3, 5));
        assert_ne!(standard_normals(8, 3, 5), standard_normals(7, 3, 5));
    }

    #[test]
    fn noise_moments() {
        let v = standard_normals(1, 0, 100_000);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn scenario_validation_lists_problems() {
        let mut s = Scenario::new(KernelKind::G2, TargetKind::F1, 1, -1.0);
        s.reps = 0;
        let Err(Error::InvalidInput(msg)) = s.validate() else {
            panic!("expected validation error")
        };
        assert!(msg.contains("n must") && msg.contains("snr") && msg.contains("reps"));
    }
}
