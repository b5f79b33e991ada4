use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use waci_core::config::RunConfig;
use waci_core::metrics::Metric;
use waci_core::pipelines::{cmd_coef_trace, cmd_epf, cmd_sigma_sweep, cmd_synth, SYNTH_TABLES};
use waci_core::qr::ModelKind;
use waci_core::{Error, ErrorClass};

/// Ensemble prediction intervals: quantile regression on point forecasts
/// followed by adaptive conformal recalibration.
///
/// Settings come from an optional `--config` file of `key = value` lines
/// (keys are the long flag names with `_` for `-`); flags given on the
/// command line override it.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "waci", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Two-regime synthetic benchmark: writes table1.csv (high-noise steps),
    /// table2.csv (low-noise steps), table3.csv (all steps) and
    /// traces/run_NNN.csv.
    Synth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        conformal: ConformalArgs,
        /// Independent runs [default: 100].
        #[arg(long)]
        n_runs: Option<usize>,
        /// Steps per run [default: 10000].
        #[arg(long)]
        length: Option<usize>,
        /// Runs whose step traces are written [default: 1].
        #[arg(long)]
        trace_runs: Option<usize>,
    },
    /// QRA, HQR and HQR-W, each unconformalized, with ACI and with WACI,
    /// conformalized per hour of day: writes epf_alpha_<a>.csv per level and
    /// per-stream traces.
    Epf {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        conformal: ConformalArgs,
        /// Restrict to one model (QRA, HQR, HQR-W) [default: all three].
        #[arg(long)]
        model: Option<ModelKind>,
        /// Bootstrap replicates for standard errors; 0 disables [default: 1000].
        #[arg(long)]
        bootstrap_samples: Option<usize>,
        /// Records per bootstrap replicate [default: 1000].
        #[arg(long)]
        bootstrap_size: Option<usize>,
        /// Mean block length of the stationary bootstrap [default: 24].
        #[arg(long)]
        bootstrap_block: Option<f64>,
    },
    /// WACI at a range of kernel widths plus an ACI reference row (sigma
    /// `inf`): writes sigma_sweep.csv. Uses HQR intervals of the panel, or
    /// one synthetic two-regime run with `--synthetic` and no `--input`.
    SigmaSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        conformal: ConformalArgs,
        /// Model for panel input [default: HQR].
        #[arg(long)]
        model: Option<ModelKind>,
        /// Smallest sigma [default: 0.1].
        #[arg(long)]
        sigma_min: Option<f64>,
        /// Largest sigma [default: 200].
        #[arg(long)]
        sigma_max: Option<f64>,
        /// Sigma increment [default: 0.1].
        #[arg(long)]
        sigma_step: Option<f64>,
        /// Steps of the synthetic run [default: 10000].
        #[arg(long)]
        length: Option<usize>,
    },
    /// Dispersion coefficients of the rolling HQR or HQR-W quantile fits:
    /// writes coef_trace.csv with one row per (window, alpha).
    CoefTrace {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        panel: PanelArgs,
        /// HQR or HQR-W [default: HQR].
        #[arg(long)]
        model: Option<ModelKind>,
        /// Miscoverage level; repeat for several [default: 0.2 and 0.1].
        #[arg(long = "alpha")]
        alphas: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Settings file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: out/<command>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed [default: 2024 for synth and bootstrap, 7 for the
    /// synthetic panel].
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a JSON copy of every CSV.
    #[arg(long)]
    json: bool,
    /// Render standard errors as `value (std)` instead of `_std` columns.
    #[arg(long)]
    paper_style: bool,
}

#[derive(Debug, Args)]
struct PanelArgs {
    /// Panel CSV with header `timestamp,y,f1,...,fM`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Use a generated heteroscedastic ensemble panel instead of `--input`.
    #[arg(long)]
    synthetic: bool,
    /// Days of the generated panel [default: 365].
    #[arg(long)]
    panel_days: Option<usize>,
    /// Rolling training window in days of 24 rows [default: 180].
    #[arg(long)]
    window_days: Option<usize>,
}

#[derive(Debug, Args)]
struct ConformalArgs {
    /// Target miscoverage [default: 0.2 for synth and sigma-sweep, both 0.2
    /// and 0.1 for epf].
    #[arg(long)]
    alpha: Option<f64>,
    /// Adaptation rate of ACI and WACI [default: 0.01 synth, 0.02 otherwise].
    #[arg(long)]
    gamma: Option<f64>,
    /// Gaussian kernel width of WACI in length units [default: 1 synth, 3 epf].
    #[arg(long)]
    sigma: Option<f64>,
    /// Use geometric WACI weights with this decay instead of the kernel.
    #[arg(long)]
    decay: Option<f64>,
    /// WACI length grid step [default: 0.25 synth, 0.1 otherwise].
    #[arg(long)]
    grid_step: Option<f64>,
    /// Sliding score window per group, 0 for unbounded [default: unbounded
    /// synth, 200 otherwise].
    #[arg(long)]
    calibration_size: Option<usize>,
    /// Records per group that only seed the scores [default: 500 synth, 30
    /// otherwise].
    #[arg(long)]
    warmup: Option<usize>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Common {
    fn apply(&self, c: &mut RunConfig) {
        c.out = self.out.clone();
        c.seed = self.seed;
        c.json = flag(self.json);
        c.paper_style = flag(self.paper_style);
    }
}

impl PanelArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.input = self.input.clone();
        c.synthetic = flag(self.synthetic);
        c.panel_days = self.panel_days;
        c.window_days = self.window_days;
    }
}

impl ConformalArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.alpha = self.alpha;
        c.gamma = self.gamma;
        c.sigma = self.sigma;
        c.decay = self.decay;
        c.grid_step = self.grid_step;
        c.calibration_size = self.calibration_size;
        c.warmup = self.warmup;
    }
}

enum Failure {
    Usage(String),
    Run(Error),
}

fn resolve(common: &Common, overrides: RunConfig) -> Result<RunConfig, Failure> {
    let base = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    Ok(base.merge(overrides))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let mut o = RunConfig::default();
    let written = match cli.command {
        Command::Synth {
            common,
            conformal,
            n_runs,
            length,
            trace_runs,
        } => {
            common.apply(&mut o);
            conformal.apply(&mut o);
            o.n_runs = n_runs;
            o.length = length;
            o.trace_runs = trace_runs;
            let cfg = resolve(&common, o)?;
            let out = cmd_synth(&cfg).map_err(Failure::Run)?;
            for (stem, subset) in SYNTH_TABLES {
                eprintln!("{stem} ({subset:?} steps)");
                for row in out.result.table(subset, &Metric::SYNTHETIC) {
                    let cov = row.value(Metric::Coverage).unwrap_or(f64::NAN);
                    let len = row.value(Metric::MeanLength).unwrap_or(f64::NAN);
                    eprintln!("  {:<8} coverage {cov:6.2}  length {len:6.2}", row.label);
                }
            }
            out.written
        }
        Command::Epf {
            common,
            panel,
            conformal,
            model,
            bootstrap_samples,
            bootstrap_size,
            bootstrap_block,
        } => {
            common.apply(&mut o);
            panel.apply(&mut o);
            conformal.apply(&mut o);
            o.model = model;
            o.bootstrap_samples = bootstrap_samples;
            o.bootstrap_size = bootstrap_size;
            o.bootstrap_block = bootstrap_block;
            cmd_epf(&resolve(&common, o)?)
                .map_err(Failure::Run)?
                .written
        }
        Command::SigmaSweep {
            common,
            panel,
            conformal,
            model,
            sigma_min,
            sigma_max,
            sigma_step,
            length,
        } => {
            common.apply(&mut o);
            panel.apply(&mut o);
            conformal.apply(&mut o);
            o.model = model;
            o.sigma_min = sigma_min;
            o.sigma_max = sigma_max;
            o.sigma_step = sigma_step;
            o.length = length;
            cmd_sigma_sweep(&resolve(&common, o)?)
                .map_err(Failure::Run)?
                .written
        }
        Command::CoefTrace {
            common,
            panel,
            model,
            alphas,
        } => {
            common.apply(&mut o);
            panel.apply(&mut o);
            o.model = model;
            o.alphas = (!alphas.is_empty()).then_some(alphas);
            cmd_coef_trace(&resolve(&common, o)?)
                .map_err(Failure::Run)?
                .written
        }
    };
    Ok(written)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
