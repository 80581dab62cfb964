//! The `fit-kernel`, `fit`, `simulate`, `compare` and `replay` commands.
//!
//! Every output embeds `{tool, version, command, config}`. The config is fully
//! resolved, with absolute input paths, so `replay` reproduces the outputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use lapdeconv::baseline::{self, ComparisonReport, SweepGrids};
use lapdeconv::design::{self, Observations, ZMode};
use lapdeconv::laguerre::{self, CoeffVector, KernelSource, LaguerreBasis, QuadratureConfig};
use lapdeconv::select::{self, AlphaMode, EstimatorConfig, ModelFit};
use lapdeconv::simulate::{self, RiskReport, ScenarioSetup};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::io;
use crate::scenario::{AutoOr, ScenarioFile};
use crate::{CliError, CliResult, TOOL, VERSION};

pub const KERNEL_FILE: &str = "kernel.json";
pub const FIT_REPORT: &str = "fit_report.json";
pub const FIT_CURVES: &str = "fit_curves.csv";
pub const RISK_REPORT: &str = "risk_report.json";
pub const RISK_TABLE: &str = "risk_table.csv";
pub const RISK_CELLS: &str = "risk_cells.csv";
pub const COMPARISON_REPORT: &str = "comparison_report.json";
pub const COMPARISON_SUMMARY: &str = "comparison_summary.csv";
pub const COMPARISON_CURVES: &str = "comparison_curves.csv";
pub const TIMING: &str = "timing.json";

/// A fixed noise level, or `estimate` for the difference estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaArg {
    Estimate,
    Value(f64),
}

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("estimate") {
            return Ok(SigmaArg::Estimate);
        }
        s.parse::<f64>()
            .map(SigmaArg::Value)
            .map_err(|_| format!("expected a number or `estimate`, got `{s}`"))
    }
}

impl fmt::Display for SigmaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaArg::Estimate => f.write_str("estimate"),
            SigmaArg::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for SigmaArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SigmaArg::Estimate => s.serialize_str("estimate"),
            SigmaArg::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for SigmaArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(SigmaArg::Value(v)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<C, R> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: C,
    pub result: R,
}

fn envelope<C, R>(command: &str, config: C, result: R) -> Envelope<C, R> {
    Envelope {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: command.into(),
        config,
        result,
    }
}

// ---------------------------------------------------------------- fit-kernel

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitKernelConfig {
    pub data: PathBuf,
    #[serde(rename = "M")]
    pub size: usize,
    pub a: AutoOr,
    /// Candidate scales searched when `a` is `auto`.
    pub a_grid: Vec<f64>,
}

impl FitKernelConfig {
    pub fn new(data: &Path, size: usize, a: AutoOr) -> CliResult<Self> {
        let a_grid = match a {
            AutoOr::Auto => laguerre::default_scale_grid(),
            AutoOr::Value(v) => vec![v],
        };
        Ok(Self {
            data: io::absolute(data)?,
            size,
            a,
            a_grid,
        })
    }
}

/// Kernel coefficient file. Only `a` and `coeffs` are needed to read one back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<FitKernelConfig>,
    pub a: f64,
    #[serde(rename = "M", default)]
    pub size: usize,
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub fit_rmse: f64,
    /// `(a, rmse)` over the searched grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scale_curve: Vec<(f64, f64)>,
}

impl KernelFile {
    /// Coefficients on a basis of at least `size` terms, zero-padded.
    pub fn coeff_vector(&self, size: usize) -> CliResult<CoeffVector> {
        if self.coeffs.is_empty() {
            return Err(CliError::Validation(
                "kernel file has no coefficients".into(),
            ));
        }
        let mut c = self.coeffs.clone();
        if c.len() < size {
            log::info!(
                "kernel has {} coefficients, padding with zeros to M = {size}",
                c.len()
            );
            c.resize(size, 0.0);
        }
        let basis = LaguerreBasis::new(self.a, c.len())?;
        Ok(CoeffVector::new(c, basis)?)
    }
}

pub fn run_fit_kernel(config: &FitKernelConfig, out: &Path) -> CliResult<KernelFile> {
    if config.size == 0 {
        return Err(CliError::Validation("M must be at least 1".into()));
    }
    let series = io::read_series(&config.data)?;
    if series.times.len() < config.size + 1 {
        log::warn!(
            "{} rows for M = {}; the kernel fit needs at least M + 1",
            series.times.len(),
            config.size
        );
    }
    let source = KernelSource::Samples {
        times: &series.times,
        values: &series.values,
    };
    let quad = QuadratureConfig::default();
    let choice = laguerre::select_scale_a(&source, config.size, &config.a_grid, &quad)?;
    let basis = LaguerreBasis::new(choice.a, config.size)?;
    let (coeffs, rmse) = laguerre::fit_samples(&basis, &series.times, &series.values)?;
    let file = KernelFile {
        tool: Some(TOOL.into()),
        version: Some(VERSION.into()),
        command: Some("fit-kernel".into()),
        config: Some(config.clone()),
        a: choice.a,
        size: config.size,
        coeffs: coeffs.coeffs().to_vec(),
        fit_rmse: rmse,
        scale_curve: choice.curve,
    };
    io::write_json(&out.join(KERNEL_FILE), &file)?;
    Ok(file)
}

// ----------------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub data: PathBuf,
    pub kernel: PathBuf,
    #[serde(rename = "M")]
    pub size: usize,
    #[serde(rename = "B")]
    pub b: f64,
    pub c_pen: f64,
    pub alpha: AutoOr,
    pub alpha_range: [usize; 2],
    pub z_mode: ZMode,
    pub sigma: SigmaArg,
    pub delay: f64,
    /// Observation horizon `T`; the last sample time when not given.
    pub horizon: f64,
}

/// Command-line view of [`FitConfig`] before paths and the horizon are resolved.
#[derive(Debug, Clone)]
pub struct FitArgs {
    pub data: PathBuf,
    pub kernel: PathBuf,
    pub size: usize,
    pub b: f64,
    pub c_pen: f64,
    pub alpha: AutoOr,
    pub alpha_range: [usize; 2],
    pub z_mode: ZMode,
    pub sigma: SigmaArg,
    pub delay: f64,
    pub horizon: Option<f64>,
}

impl FitConfig {
    pub fn resolve(args: FitArgs) -> CliResult<Self> {
        let data = io::absolute(&args.data)?;
        let kernel = io::absolute(&args.kernel)?;
        let horizon = match args.horizon {
            Some(h) => h,
            None => {
                let s = io::read_series(&data)?;
                s.times.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        };
        Ok(Self {
            data,
            kernel,
            size: args.size,
            b: args.b,
            c_pen: args.c_pen,
            alpha: args.alpha,
            alpha_range: args.alpha_range,
            z_mode: args.z_mode,
            sigma: args.sigma,
            delay: args.delay,
            horizon,
        })
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            size: self.size,
            b: self.b,
            c_pen: self.c_pen,
            alpha: match self.alpha {
                AutoOr::Auto => AlphaMode::Auto {
                    m_lo: self.alpha_range[0],
                    m_hi: self.alpha_range[1],
                },
                AutoOr::Value(v) => AlphaMode::Fixed { value: v },
            },
            z_mode: self.z_mode,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub n: usize,
    pub a: f64,
    pub m_hat: usize,
    pub coeffs: Vec<f64>,
    pub beta_hat: f64,
    pub transit_integral: f64,
    pub sigma_used: f64,
    pub sigma_estimated: bool,
    pub fit: ModelFit,
}

pub fn run_fit(config: &FitConfig, out: &Path) -> CliResult<FitResult> {
    if !config.delay.is_finite() || config.delay < 0.0 {
        return Err(CliError::Validation(format!(
            "delay must be nonnegative, got {}",
            config.delay
        )));
    }
    if let SigmaArg::Value(s) = config.sigma {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(CliError::Validation(format!(
                "sigma must be nonnegative, got {s}"
            )));
        }
    }
    let series = io::read_series(&config.data)?;
    let kernel: KernelFile = io::read_json(&config.kernel)?;
    let estimator = config.estimator();
    estimator.validate()?;
    let g = kernel.coeff_vector(config.size)?;
    let sigma = match config.sigma {
        SigmaArg::Value(s) => Some(s),
        SigmaArg::Estimate => None,
    };
    let mut obs = Observations::new(series.times, series.values, config.horizon, sigma)?;
    if config.delay != 0.0 {
        obs = design::shift_delay(&obs, config.delay)?;
    }
    let sigma_used = match sigma {
        Some(s) => s,
        None => design::estimate_sigma(&obs)?,
    };
    let prepared = select::PreparedModel::new(&obs, &g, &estimator)?;
    let fit = prepared.fit(obs.values(), sigma_used)?;

    let f_hat = laguerre::expand(&fit.coeffs, obs.times())?;
    let q_hat = forward_curve(&fit, &g, config.size, obs.times())?;
    let rows: Vec<Vec<String>> = (0..obs.len())
        .map(|i| {
            vec![
                obs.times()[i].to_string(),
                obs.values()[i].to_string(),
                f_hat[i].to_string(),
                q_hat[i].to_string(),
            ]
        })
        .collect();
    io::write_table(&out.join(FIT_CURVES), &["t", "y", "f_hat", "q_hat"], &rows)?;

    let result = FitResult {
        n: obs.len(),
        a: g.basis().a(),
        m_hat: fit.m_hat,
        coeffs: fit.coeffs.coeffs().to_vec(),
        beta_hat: fit.beta_hat,
        transit_integral: fit.transit_integral,
        sigma_used,
        sigma_estimated: sigma.is_none(),
        fit,
    };
    let env = envelope("fit", config.clone(), result);
    io::write_json(&out.join(FIT_REPORT), &env)?;
    Ok(env.result)
}

/// `q̂ = G_M f̂` expanded on the same basis.
fn forward_curve(
    fit: &ModelFit,
    g: &CoeffVector,
    size: usize,
    times: &[f64],
) -> CliResult<Vec<f64>> {
    let op = lapdeconv::toeplitz::build_g(g, size)?;
    let mut f = fit.coeffs.coeffs().to_vec();
    f.resize(size, 0.0);
    let q = op.mul(&f)?;
    let basis = LaguerreBasis::new(g.basis().a(), size)?;
    Ok(laguerre::expand(&CoeffVector::new(q, basis)?, times)?)
}

// ------------------------------------------------------------------ simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    /// Source file, for provenance only; replay uses `scenario`.
    pub scenario_file: Option<PathBuf>,
    pub scenario: ScenarioFile,
    pub emit_samples: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateResult {
    pub cells: Vec<RiskReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub cells: Vec<(String, f64)>,
}

/// Reads a scenario file and applies command-line overrides.
pub fn load_scenario(
    path: &Path,
    reps: Option<usize>,
    seed: Option<u64>,
) -> CliResult<(PathBuf, ScenarioFile)> {
    let abs = io::absolute(path)?;
    let text = std::fs::read_to_string(&abs).map_err(|source| CliError::Io {
        path: abs.clone(),
        source,
    })?;
    let mut s = ScenarioFile::parse(&text)?;
    if let Some(r) = reps {
        s.reps = r;
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s.validate()?;
    Ok((abs, s))
}

fn file_stem(label: &str) -> String {
    label.replace('/', "_")
}

pub fn run_simulate(config: &SimulateConfig, out: &Path) -> CliResult<SimulateResult> {
    config.scenario.validate()?;
    let started = Instant::now();
    let mut cells = Vec::new();
    let mut timing = Vec::new();
    for sc in config.scenario.cells() {
        let t0 = Instant::now();
        let setup = ScenarioSetup::new(&sc)?;
        if config.emit_samples {
            let obs = setup.dataset(0)?;
            let path = out
                .join("samples")
                .join(format!("{}.csv", file_stem(&sc.label())));
            io::write_series(&path, obs.times(), obs.values())?;
        }
        let report = simulate::monte_carlo_with(&setup)?;
        let secs = t0.elapsed().as_secs_f64();
        log::info!(
            "{}: 100*R = {:.4} ({secs:.2} s)",
            report.label,
            report.risk_x100
        );
        timing.push((report.label.clone(), secs));
        cells.push(report);
    }
    let total = started.elapsed().as_secs_f64();
    log::info!("{} cells in {total:.2} s", cells.len());

    write_risk_table(&out.join(RISK_TABLE), &config.scenario, &cells)?;
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|r| {
            vec![
                r.kernel.clone(),
                r.target.clone(),
                r.snr.to_string(),
                r.n.to_string(),
                r.reps.to_string(),
                r.failed_reps.to_string(),
                r.a.to_string(),
                r.sigma.to_string(),
                r.risk_x100.to_string(),
                (100.0 * r.std_error).to_string(),
                r.oracle_m.to_string(),
                (100.0 * r.oracle_risk).to_string(),
            ]
        })
        .collect();
    io::write_table(
        &out.join(RISK_CELLS),
        &[
            "kernel",
            "target",
            "snr",
            "n",
            "reps",
            "failed_reps",
            "a",
            "sigma",
            "risk_x100",
            "std_error_x100",
            "oracle_m",
            "oracle_risk_x100",
        ],
        &rows,
    )?;
    io::write_json(
        &out.join(TIMING),
        &Timing {
            total_seconds: total,
            cells: timing,
        },
    )?;
    let env = envelope("simulate", config.clone(), SimulateResult { cells });
    io::write_json(&out.join(RISK_REPORT), &env)?;
    Ok(env.result)
}

/// Rows by kernel, SNR and n; one column of `100·R̂` per target.
fn write_risk_table(path: &Path, s: &ScenarioFile, cells: &[RiskReport]) -> CliResult<()> {
    let mut header = vec!["kernel", "snr", "n"];
    header.extend(s.targets.iter().map(String::as_str));
    let per_row = s.targets.len();
    let rows: Vec<Vec<String>> = cells
        .chunks(per_row)
        .map(|chunk| {
            let first = &chunk[0];
            let mut row = vec![
                first.kernel.clone(),
                first.snr.to_string(),
                first.n.to_string(),
            ];
            row.extend(chunk.iter().map(|r| r.risk_x100.to_string()));
            row
        })
        .collect();
    io::write_table(path, &header, &rows)
}

// ------------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub scenario_file: Option<PathBuf>,
    pub scenario: ScenarioFile,
    pub grids: SweepGrids,
    /// Replicate whose estimates go into the curves file.
    pub curve_rep: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareResult {
    pub cells: Vec<ComparisonReport>,
}

pub fn run_compare(config: &CompareConfig, out: &Path) -> CliResult<CompareResult> {
    config.scenario.validate()?;
    if config.curve_rep as usize >= config.scenario.reps {
        return Err(CliError::Validation(format!(
            "curve replicate {} is outside 0..{}",
            config.curve_rep, config.scenario.reps
        )));
    }
    let started = Instant::now();
    let mut cells = Vec::new();
    let mut timing = Vec::new();
    let mut curve_rows = Vec::new();
    for sc in config.scenario.cells() {
        let t0 = Instant::now();
        let setup = ScenarioSetup::new(&sc)?;
        let report = baseline::compare_with(&setup, &config.grids)?;
        let curves = baseline::comparison_curves(&setup, &report, config.curve_rep)?;
        let series: [(&str, &[f64]); 5] = [
            ("observed", &curves.observed),
            ("truth", &curves.truth),
            ("laguerre", &curves.laguerre),
            ("tikhonov", &curves.tikhonov),
            ("svd", &curves.svd),
        ];
        for (name, values) in series {
            for (t, v) in curves.times.iter().zip(values) {
                curve_rows.push(vec![
                    report.label.clone(),
                    name.to_string(),
                    t.to_string(),
                    v.to_string(),
                ]);
            }
        }
        let secs = t0.elapsed().as_secs_f64();
        log::info!(
            "{}: laguerre {:.4e}, tikhonov {:.4e}, svd {:.4e} ({secs:.2} s)",
            report.label,
            report.laguerre_mean_risk,
            report.tikhonov.best_mean_risk,
            report.svd.best_mean_risk
        );
        timing.push((report.label.clone(), secs));
        cells.push(report);
    }
    let total = started.elapsed().as_secs_f64();
    io::write_table(
        &out.join(COMPARISON_CURVES),
        &["cell", "series", "t", "value"],
        &curve_rows,
    )?;
    let summary: Vec<Vec<String>> = cells
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.laguerre_mean_risk.to_string(),
                r.tikhonov.best_mean_risk.to_string(),
                r.tikhonov.rule.name().to_string(),
                r.tikhonov.best_param.to_string(),
                r.svd.best_mean_risk.to_string(),
                r.svd.rule.name().to_string(),
                r.svd.best_param.to_string(),
            ]
        })
        .collect();
    io::write_table(
        &out.join(COMPARISON_SUMMARY),
        &[
            "cell",
            "laguerre_risk",
            "tikhonov_risk",
            "tikhonov_rule",
            "tikhonov_lambda",
            "svd_risk",
            "svd_rule",
            "svd_tau",
        ],
        &summary,
    )?;
    io::write_json(
        &out.join(TIMING),
        &Timing {
            total_seconds: total,
            cells: timing,
        },
    )?;
    let env = envelope("compare", config.clone(), CompareResult { cells });
    io::write_json(&out.join(COMPARISON_REPORT), &env)?;
    Ok(env.result)
}

// -------------------------------------------------------------------- replay

fn config_of<C: DeserializeOwned>(report: &serde_json::Value, path: &Path) -> CliResult<C> {
    let cfg = report
        .get("config")
        .cloned()
        .ok_or_else(|| CliError::Format {
            path: path.to_path_buf(),
            msg: "report has no `config`".into(),
        })?;
    serde_json::from_value(cfg).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        msg: format!("embedded config: {e}"),
    })
}

/// Reruns the command recorded in any output report, writing to `out`.
pub fn run_replay(report: &Path, out: &Path) -> CliResult<String> {
    let value: serde_json::Value = io::read_json(report)?;
    let command = value
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or_else(|| CliError::Format {
            path: report.to_path_buf(),
            msg: "report has no `command`".into(),
        })?
        .to_string();
    match command.as_str() {
        "fit-kernel" => {
            run_fit_kernel(&config_of(&value, report)?, out)?;
        }
        "fit" => {
            run_fit(&config_of(&value, report)?, out)?;
        }
        "simulate" => {
            run_simulate(&config_of(&value, report)?, out)?;
        }
        "compare" => {
            run_compare(&config_of(&value, report)?, out)?;
        }
        other => {
            return Err(CliError::Format {
                path: report.to_path_buf(),
                msg: format!("unknown command `{other}`"),
            })
        }
    }
    Ok(command)
}
