use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lapdeconv::baseline::SweepGrids;
use lapdeconv::ZMode;
use lapdeconv_cli::commands::{
    self, CompareConfig, FitArgs, FitConfig, FitKernelConfig, SigmaArg, SimulateConfig,
};
use lapdeconv_cli::scenario::AutoOr;
use lapdeconv_cli::CliResult;

/// Laguerre-expansion deconvolution of indicator-dilution curves.
#[derive(Parser)]
#[command(name = "lapdeconv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZModeArg {
    Truncate,
    Refit,
}

impl From<ZModeArg> for ZMode {
    fn from(z: ZModeArg) -> Self {
        match z {
            ZModeArg::Truncate => ZMode::Truncate,
            ZModeArg::Refit => ZMode::Refit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit Laguerre coefficients to a sampled kernel (`t,value` CSV).
    FitKernel {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "M", default_value_t = 11)]
        size: usize,
        /// Laguerre scale, or `auto` for a grid search.
        #[arg(long, default_value = "auto")]
        a: AutoOr,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the input function from observations and a kernel file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long = "M", default_value_t = 11)]
        size: usize,
        #[arg(long = "B", default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 1.5)]
        c_pen: f64,
        #[arg(long, default_value = "auto")]
        alpha: AutoOr,
        /// Model sizes used to fit alpha, as `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1, 7])]
        alpha_range: Vec<usize>,
        #[arg(long, value_enum, default_value = "truncate")]
        z_mode: ZModeArg,
        #[arg(long, default_value = "estimate")]
        sigma: SigmaArg,
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
        /// Observation horizon; defaults to the last sample time.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo risk study from a TOML scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write replicate 0 of every cell as a `t,value` CSV.
        #[arg(long)]
        emit_samples: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Laguerre estimator against tuned Tikhonov and truncated SVD.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Replicate plotted in the curves file.
        #[arg(long, default_value_t = 0)]
        curve_rep: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun the command recorded in an output report.
    Replay {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::FitKernel { data, size, a, out } => {
            let cfg = FitKernelConfig::new(&data, size, a)?;
            let k = commands::run_fit_kernel(&cfg, &out)?;
            log::info!("a = {}, rmse = {:.3e}", k.a, k.fit_rmse);
        }
        Command::Fit {
            data,
            kernel,
            size,
            b,
            c_pen,
            alpha,
            alpha_range,
            z_mode,
            sigma,
            delay,
            horizon,
            out,
        } => {
            let cfg = FitConfig::resolve(FitArgs {
                data,
                kernel,
                size,
                b,
                c_pen,
                alpha,
                alpha_range: [alpha_range[0], alpha_range[1]],
                z_mode: z_mode.into(),
                sigma,
                delay,
                horizon,
            })?;
            let r = commands::run_fit(&cfg, &out)?;
            log::info!("m_hat = {}, sigma = {:.4e}", r.m_hat, r.sigma_used);
        }
        Command::Simulate {
            scenario,
            reps,
            seed,
            emit_samples,
            out,
        } => {
            let (path, s) = commands::load_scenario(&scenario, reps, seed)?;
            let cfg = SimulateConfig {
                scenario_file: Some(path),
                scenario: s,
                emit_samples,
            };
            commands::run_simulate(&cfg, &out)?;
        }
        Command::Compare {
            scenario,
            reps,
            seed,
            curve_rep,
            out,
        } => {
            let (path, s) = commands::load_scenario(&scenario, reps, seed)?;
            let cfg = CompareConfig {
                scenario_file: Some(path),
                scenario: s,
                grids: SweepGrids::default(),
                curve_rep,
            };
            commands::run_compare(&cfg, &out)?;
        }
        Command::Replay { report, out } => {
            let cmd = commands::run_replay(&report, &out)?;
            log::info!("replayed `{cmd}`");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
