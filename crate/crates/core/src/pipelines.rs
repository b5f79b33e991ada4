//! End-to-end runs behind the command-line subcommands: resolve a
//! [`RunConfig`] against per-command defaults, run, and write artifacts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::conformal::{
    run_conformal_stream, ConformalOutput, ConformalParams, GridSpec, Method, WeightScheme,
};
use crate::error::{Error, Result};
use crate::io::{ensure_dir, ingest_panel, write_csv_rows, write_json, Table, MISSING};
use crate::metrics::{
    bootstrap_report_std, evaluate, BootstrapConfig, Cell, EvalContext, EvaluationRecord, Metric,
    MetricsReport, ReplacementInterval, SummaryRow,
};
use crate::qr::{coefficient_trace, rolling_intervals, ModelKind, RollingConfig};
use crate::seed::derive_seed;
use crate::series::{ForecastPanel, IntervalStream};
use crate::synth::{
    ensemble_panel, generate_run, run_experiment, run_single, EnsemblePanelConfig,
    ExperimentParams, ExperimentResult, Subset, SyntheticConfig,
};

pub const HOURS_PER_DAY: usize = 24;

/// Collects written artifact paths; mirrors every CSV as JSON on request.
#[derive(Debug)]
struct Sink {
    dir: PathBuf,
    json: bool,
    written: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: &Path, json: bool) -> Result<Self> {
        ensure_dir(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            json,
            written: Vec::new(),
        })
    }

    fn subdir(&self, name: &str) -> Result<PathBuf> {
        let d = self.dir.join(name);
        ensure_dir(&d)?;
        Ok(d)
    }

    fn table(&mut self, stem: &str, table: &Table) -> Result<()> {
        let csv = self.dir.join(format!("{stem}.csv"));
        table.write_csv(&csv)?;
        self.written.push(csv);
        if self.json {
            let js = self.dir.join(format!("{stem}.json"));
            table.write_json(&js)?;
            self.written.push(js);
        }
        Ok(())
    }

    fn rows<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        let csv = self.dir.join(format!("{stem}.csv"));
        write_csv_rows(&csv, rows)?;
        self.written.push(csv);
        if self.json {
            let js = self.dir.join(format!("{stem}.json"));
            write_json(&js, rows)?;
            self.written.push(js);
        }
        Ok(())
    }
}

fn weight_scheme(cfg: &RunConfig, default_sigma: f64) -> WeightScheme {
    match cfg.decay {
        Some(decay) => WeightScheme::Geometric { decay },
        None => WeightScheme::Gaussian {
            sigma: cfg.sigma.unwrap_or(default_sigma),
        },
    }
}

fn output_dir(cfg: &RunConfig, default: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// Replacement interval spanning the finite intervals of the first `n` records.
fn replacement_from(stream: &IntervalStream, n: usize) -> Result<ReplacementInterval> {
    let n = n.clamp(1, stream.len());
    ReplacementInterval::from_intervals(stream.records[..n].iter().map(|r| &r.interval))
}

fn evaluation_records(out: &ConformalOutput) -> Vec<EvaluationRecord> {
    out.stream
        .records
        .iter()
        .zip(&out.base)
        .map(|(r, base)| EvaluationRecord {
            y: r.y,
            base: *base,
            conformalized: r.interval,
            point: r.point,
            state: None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub config: SyntheticConfig,
    pub params: ExperimentParams,
    /// Leading runs whose step traces are written.
    pub trace_runs: usize,
}

impl SynthSettings {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let mut config = SyntheticConfig::default();
        let mut params = ExperimentParams::default();
        if let Some(s) = cfg.seed {
            config.seed = s;
        }
        if let Some(n) = cfg.n_runs {
            config.n_runs = n;
        }
        if let Some(l) = cfg.length {
            config.length = l;
        }
        if let Some(&a) = cfg.levels(&[config.alpha]).first() {
            config.alpha = a;
        }
        if let Some(g) = cfg.gamma {
            params.aci_gamma = g;
            params.waci_gamma = g;
        }
        params.weights = weight_scheme(cfg, 1.0);
        if let Some(step) = cfg.grid_step {
            params.grid = GridSpec::FromWarmup { step, margin: 0.1 };
        }
        params.calibration_size = cfg.calibration_window(params.calibration_size);
        if let Some(w) = cfg.warmup {
            params.warmup = w;
        }
        config.validate()?;
        Ok(Self {
            config,
            params,
            trace_runs: cfg.trace_runs.unwrap_or(1).min(config.n_runs),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct SynthTraceRow {
    t: usize,
    delta: u8,
    y: f64,
    lower: f64,
    upper: f64,
    aci_lower: f64,
    aci_upper: f64,
    aci_alpha: f64,
    waci_lower: f64,
    waci_upper: f64,
    waci_alpha: f64,
    waci_grid_index: usize,
}

#[derive(Debug)]
pub struct SynthOutcome {
    pub result: ExperimentResult,
    pub written: Vec<PathBuf>,
}

/// Table file stem and record subset, in output order.
pub const SYNTH_TABLES: [(&str, Subset); 3] = [
    ("table1", Subset::High),
    ("table2", Subset::Low),
    ("table3", Subset::All),
];

/// Two-regime experiment: three tables (high-noise state, low-noise state,
/// all steps) and step traces of the first runs.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthOutcome> {
    let settings = SynthSettings::from_config(cfg)?;
    let (sc, params) = (&settings.config, &settings.params);
    let result = run_experiment(sc, params)?;
    let mut sink = Sink::new(&output_dir(cfg, "out/synth"), cfg.json.unwrap_or(false))?;
    let paper_style = cfg.paper_style.unwrap_or(false);
    for (stem, subset) in SYNTH_TABLES {
        let rows = result.table(subset, &Metric::SYNTHETIC);
        sink.table(
            stem,
            &Table::from_summary(&rows, &Metric::SYNTHETIC, paper_style),
        )?;
    }

    if settings.trace_runs > 0 {
        let trace_dir = sink.subdir("traces")?;
        let mut traces = Sink::new(&trace_dir, sink.json)?;
        for i in 0..settings.trace_runs {
            let detail = run_single(sc, params, derive_seed(sc.seed, i as u64))?;
            let [none, aci, waci] = [&detail.outputs[0], &detail.outputs[1], &detail.outputs[2]];
            let rows: Vec<SynthTraceRow> = none
                .stream
                .records
                .iter()
                .zip(aci.trace.iter().zip(&waci.trace))
                .map(|(r, (a, w))| SynthTraceRow {
                    t: r.t,
                    delta: detail.run.delta[r.t],
                    y: r.y,
                    lower: r.interval.lower(),
                    upper: r.interval.upper(),
                    aci_lower: a.lower,
                    aci_upper: a.upper,
                    aci_alpha: a.alpha_used,
                    waci_lower: w.lower,
                    waci_upper: w.upper,
                    waci_alpha: w.alpha_used,
                    waci_grid_index: w.grid_index,
                })
                .collect();
            traces.rows(&format!("run_{i:03}"), &rows)?;
        }
        sink.written.extend(traces.written);
    }
    Ok(SynthOutcome {
        result,
        written: sink.written,
    })
}

/// The panel named by `input`, or the synthetic ensemble panel when
/// `synthetic` is set.
pub fn load_panel(cfg: &RunConfig) -> Result<ForecastPanel> {
    cfg.validate()?;
    match (&cfg.input, cfg.synthetic.unwrap_or(false)) {
        (_, true) => ensemble_panel(&EnsemblePanelConfig {
            days: cfg.panel_days.unwrap_or(365),
            seed: cfg.seed.unwrap_or(EnsemblePanelConfig::default().seed),
            ..Default::default()
        }),
        (Some(path), false) => ingest_panel(path),
        (None, false) => Err(Error::param(
            "input",
            "no input panel given and synthetic mode is off",
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpfSettings {
    pub models: Vec<ModelKind>,
    pub window_days: usize,
    pub levels: Vec<f64>,
    pub gamma: f64,
    pub weights: WeightScheme,
    pub grid_step: f64,
    pub calibration_size: Option<usize>,
    /// Records per hour that only seed the score set.
    pub warmup: usize,
    pub bootstrap: Option<BootstrapConfig>,
}

impl EpfSettings {
    pub const DEFAULT_LEVELS: [f64; 2] = [0.2, 0.1];

    pub fn from_config(cfg: &RunConfig) -> Self {
        let samples = cfg.bootstrap_samples.unwrap_or(1000);
        Self {
            models: match cfg.model {
                Some(m) => vec![m],
                None => ModelKind::ALL.to_vec(),
            },
            window_days: cfg.window_days.unwrap_or(180),
            levels: cfg.levels(&Self::DEFAULT_LEVELS),
            gamma: cfg.gamma.unwrap_or(0.02),
            weights: weight_scheme(cfg, 3.0),
            grid_step: cfg.grid_step.unwrap_or(0.1),
            calibration_size: cfg.calibration_window(Some(200)),
            warmup: cfg.warmup.unwrap_or(30),
            bootstrap: (samples > 0).then(|| BootstrapConfig {
                n_samples: samples,
                sample_size: cfg.bootstrap_size.unwrap_or(1000),
                mean_block_length: cfg.bootstrap_block.unwrap_or(24.0),
                seed: cfg.seed.unwrap_or(2024),
            }),
        }
    }

    pub fn rolling(&self, alpha: f64) -> RollingConfig {
        RollingConfig {
            window_size: self.window_days * HOURS_PER_DAY,
            alpha,
            refit_every: HOURS_PER_DAY,
            truncate_at_start: true,
        }
    }

    pub fn conformal(&self, alpha: f64) -> ConformalParams {
        ConformalParams {
            alpha_star: alpha,
            gamma: self.gamma,
            calibration_size: self.calibration_size,
            weights: self.weights,
            grid: GridSpec::FromWarmup {
                step: self.grid_step,
                margin: 0.1,
            },
        }
    }

    /// Rows needed so that every group has one evaluated record after the
    /// first prediction and the warmup.
    pub fn required_rows(&self, panel: &ForecastPanel) -> usize {
        let m = panel.n_forecasters();
        let groups = panel
            .group_key()
            .map_or(1, |g| g.iter().collect::<BTreeSet<_>>().len());
        let first = self
            .models
            .iter()
            .map(|k| self.rolling(0.5).first_predictable(k.n_features(m)))
            .max()
            .unwrap_or(0);
        first + groups * (self.warmup + 1)
    }
}

/// One conformalized stream of the panel comparison.
#[derive(Debug, Clone)]
pub struct EpfRun {
    pub model: ModelKind,
    pub method: Method,
    pub output: ConformalOutput,
    pub report: MetricsReport,
    pub std: Option<Vec<(Metric, Option<f64>)>>,
}

impl EpfRun {
    pub fn label(&self) -> String {
        match self.method {
            Method::None => self.model.to_string(),
            m => format!("{} ({m})", self.model),
        }
    }

    pub fn summary(&self, metrics: &[Metric]) -> SummaryRow {
        let cells = metrics
            .iter()
            .map(|m| {
                let std = self
                    .std
                    .as_ref()
                    .and_then(|s| s.iter().find(|(k, _)| k == m).and_then(|(_, v)| *v));
                let value = self.report.get(*m);
                (
                    *m,
                    Cell {
                        value,
                        std: value.and(std),
                    },
                )
            })
            .collect();
        SummaryRow {
            label: self.label(),
            cells,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpfTable {
    pub alpha: f64,
    /// Every model unconformalized, then with ACI, then with WACI.
    pub runs: Vec<EpfRun>,
}

/// Model × method comparison on a panel at every requested level.
pub fn epf_tables(panel: &ForecastPanel, settings: &EpfSettings) -> Result<Vec<EpfTable>> {
    let required = settings.required_rows(panel);
    if panel.len() < required {
        return Err(Error::InsufficientHistory {
            required,
            available: panel.len(),
        });
    }
    let mut tables = Vec::with_capacity(settings.levels.len());
    for (li, &alpha) in settings.levels.iter().enumerate() {
        let rolling = settings.rolling(alpha);
        let streams: Vec<(ModelKind, IntervalStream)> = settings
            .models
            .iter()
            .map(|&k| rolling_intervals(k, panel, &rolling).map(|s| (k, s)))
            .collect::<Result<_>>()?;
        let params = settings.conformal(alpha);
        let jobs: Vec<(Method, usize)> = Method::ALL
            .iter()
            .flat_map(|&m| (0..streams.len()).map(move |i| (m, i)))
            .collect();
        let runs = jobs
            .par_iter()
            .map(|&(method, i)| {
                let (model, stream) = &streams[i];
                let groups = stream.groups().len();
                let replacement = replacement_from(stream, groups * settings.warmup)?;
                let output = run_conformal_stream(stream, method, &params, settings.warmup)?;
                let records = evaluation_records(&output);
                let ctx = EvalContext::new(alpha, replacement, method != Method::None);
                let report = evaluate(&records, &ctx)?;
                let std = match &settings.bootstrap {
                    Some(b) => Some(bootstrap_report_std(
                        &records,
                        &ctx,
                        &BootstrapConfig {
                            seed: derive_seed(b.seed, li as u64),
                            ..*b
                        },
                    )?),
                    None => None,
                };
                Ok(EpfRun {
                    model: *model,
                    method,
                    output,
                    report,
                    std,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tables.push(EpfTable { alpha, runs });
    }
    Ok(tables)
}

fn level_tag(alpha: f64) -> String {
    format!("alpha_{alpha:.2}")
}

#[derive(Debug, Clone, Serialize)]
struct EpfTraceRow {
    timestamp: String,
    hour: u32,
    y: f64,
    base_lower: f64,
    base_upper: f64,
    grid_index: usize,
    alpha_used: f64,
    err: bool,
    lower: f64,
    upper: f64,
}

#[derive(Debug)]
pub struct EpfOutcome {
    pub tables: Vec<EpfTable>,
    pub written: Vec<PathBuf>,
}

/// Panel comparison: one table per level plus per-hour conformal traces.
pub fn cmd_epf(cfg: &RunConfig) -> Result<EpfOutcome> {
    let panel = load_panel(cfg)?;
    let settings = EpfSettings::from_config(cfg);
    let tables = epf_tables(&panel, &settings)?;
    let mut sink = Sink::new(&output_dir(cfg, "out/epf"), cfg.json.unwrap_or(false))?;
    let trace_dir = sink.subdir("traces")?;
    let mut traces = Sink::new(&trace_dir, sink.json)?;
    let paper_style = cfg.paper_style.unwrap_or(false);
    for t in &tables {
        let rows: Vec<SummaryRow> = t.runs.iter().map(|r| r.summary(&Metric::ALL)).collect();
        sink.table(
            &format!("epf_{}", level_tag(t.alpha)),
            &Table::from_summary(&rows, &Metric::ALL, paper_style),
        )?;
        for run in t.runs.iter().filter(|r| r.method != Method::None) {
            let rows: Vec<EpfTraceRow> = run
                .output
                .trace
                .iter()
                .zip(&run.output.base)
                .map(|(tr, base)| EpfTraceRow {
                    timestamp: panel.timestamps()[tr.t]
                        .format("%Y-%m-%dT%H:%M:%S")
                        .to_string(),
                    hour: tr.group,
                    y: panel.y()[tr.t],
                    base_lower: base.lower(),
                    base_upper: base.upper(),
                    grid_index: tr.grid_index,
                    alpha_used: tr.alpha_used,
                    err: tr.err,
                    lower: tr.lower,
                    upper: tr.upper,
                })
                .collect();
            let stem =
                format!("{}_{}_{}", run.model, run.method, level_tag(t.alpha)).to_lowercase();
            traces.rows(&stem, &rows)?;
        }
    }
    sink.written.extend(traces.written);
    Ok(EpfOutcome {
        tables,
        written: sink.written,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    /// `None` for the ACI reference row.
    #[serde(serialize_with = "sigma_or_inf")]
    pub sigma: Option<f64>,
    pub coverage: f64,
    pub mean_length: f64,
    #[serde(serialize_with = "value_or_missing")]
    pub ils: Option<f64>,
    pub mcd: f64,
    pub pearson: f64,
}

fn sigma_or_inf<S: serde::Serializer>(
    v: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("inf"),
    }
}

fn value_or_missing<S: serde::Serializer>(
    v: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str(MISSING),
    }
}

/// `min, min + step, …` up to `max` inclusive, snapped to nine decimals.
pub fn sigma_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && step > 0.0 && min.is_finite() && max.is_finite()) {
        return Err(Error::param(
            "sigma range",
            format!("need 0 < min <= max and step > 0, got {min}..{max} by {step}"),
        ));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((min + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// WACI at every `sigma` plus one ACI row, on a fixed interval stream.
pub fn sigma_sweep(
    stream: &IntervalStream,
    params: &ConformalParams,
    warmup: usize,
    sigmas: &[f64],
) -> Result<Vec<SweepRow>> {
    let groups = stream.groups().len();
    let replacement = replacement_from(stream, groups * warmup)?;
    let ctx = EvalContext::new(params.alpha_star, replacement, true);
    let row = |sigma: Option<f64>| -> Result<SweepRow> {
        let out = match sigma {
            Some(sigma) => {
                let p = ConformalParams {
                    weights: WeightScheme::Gaussian { sigma },
                    ..*params
                };
                run_conformal_stream(stream, Method::Waci, &p, warmup)?
            }
            None => run_conformal_stream(stream, Method::Aci, params, warmup)?,
        };
        let r = evaluate(&evaluation_records(&out), &ctx)?;
        Ok(SweepRow {
            sigma,
            coverage: r.coverage,
            mean_length: r.mean_length,
            ils: r.ils,
            mcd: r.mcd,
            pearson: r.pearson,
        })
    };
    let mut rows: Vec<SweepRow> = sigmas
        .par_iter()
        .map(|&s| row(Some(s)))
        .collect::<Result<_>>()?;
    rows.push(row(None)?);
    Ok(rows)
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub written: Vec<PathBuf>,
}

/// Sensitivity of WACI to the kernel width, on HQR intervals of a panel or
/// on one run of the two-regime stream.
pub fn cmd_sigma_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    let sigmas = sigma_grid(
        cfg.sigma_min.unwrap_or(0.1),
        cfg.sigma_max.unwrap_or(200.0),
        cfg.sigma_step.unwrap_or(0.1),
    )?;
    let alpha = cfg.levels(&[0.2])[0];
    let gamma = cfg.gamma.unwrap_or(0.02);
    let rows = if cfg.synthetic.unwrap_or(false) && cfg.input.is_none() {
        let settings = SynthSettings::from_config(cfg)?;
        let run = generate_run(&settings.config, derive_seed(settings.config.seed, 0))?;
        let params = ConformalParams {
            gamma,
            ..settings
                .params
                .conformal(Method::Waci, settings.config.alpha)
        };
        sigma_sweep(&run.stream, &params, settings.params.warmup, &sigmas)?
    } else {
        let panel = load_panel(cfg)?;
        let settings = EpfSettings::from_config(&RunConfig {
            model: Some(cfg.model.unwrap_or(ModelKind::Hqr)),
            gamma: Some(gamma),
            alpha: Some(alpha),
            ..cfg.clone()
        });
        let required = settings.required_rows(&panel);
        if panel.len() < required {
            return Err(Error::InsufficientHistory {
                required,
                available: panel.len(),
            });
        }
        let stream = rolling_intervals(settings.models[0], &panel, &settings.rolling(alpha))?;
        sigma_sweep(
            &stream,
            &settings.conformal(alpha),
            settings.warmup,
            &sigmas,
        )?
    };
    let mut sink = Sink::new(
        &output_dir(cfg, "out/sigma_sweep"),
        cfg.json.unwrap_or(false),
    )?;
    sink.rows("sigma_sweep", &rows)?;
    Ok(SweepOutcome {
        rows,
        written: sink.written,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefTraceRow {
    pub date: String,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub degenerate: bool,
}

#[derive(Debug)]
pub struct CoefOutcome {
    pub rows: Vec<CoefTraceRow>,
    pub written: Vec<PathBuf>,
}

/// Dispersion coefficients of the rolling HQR fits.
pub fn cmd_coef_trace(cfg: &RunConfig) -> Result<CoefOutcome> {
    let panel = load_panel(cfg)?;
    let settings = EpfSettings::from_config(cfg);
    let kind = cfg.model.unwrap_or(ModelKind::Hqr);
    let rows: Vec<CoefTraceRow> =
        coefficient_trace(kind, &panel, &settings.rolling(0.5), &settings.levels)?
            .into_iter()
            .map(|r| CoefTraceRow {
                date: panel.timestamps()[r.t].format("%Y-%m-%d").to_string(),
                alpha: r.alpha,
                lower: r.lower,
                upper: r.upper,
                degenerate: r.degenerate,
            })
            .collect();
    let mut sink = Sink::new(
        &output_dir(cfg, "out/coef_trace"),
        cfg.json.unwrap_or(false),
    )?;
    sink.rows("coef_trace", &rows)?;
    Ok(CoefOutcome {
        rows,
        written: sink.written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_synth(out: &Path, n_runs: usize) -> RunConfig {
        RunConfig {
            n_runs: Some(n_runs),
            length: Some(1500),
            warmup: Some(300),
            out: Some(out.to_path_buf()),
            ..Default::default()
        }
    }

    #[test]
    fn synth_writes_three_tables_and_a_trace() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_synth(&small_synth(dir.path(), 3)).unwrap();
        for stem in ["table1", "table2", "table3"] {
            let text = std::fs::read_to_string(dir.path().join(format!("{stem}.csv"))).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines.len(), 4);
            assert!(lines[0].starts_with("method,coverage,coverage_std,mean_length"));
            assert!(lines[1].starts_with("Initial,"));
            assert!(lines[3].starts_with("WACI,"));
        }
        assert!(dir.path().join("traces/run_000.csv").is_file());
        assert_eq!(out.written.len(), 4);
    }

    #[test]
    fn single_run_has_no_std_columns() {
        let dir = tempfile::tempdir().unwrap();
        cmd_synth(&small_synth(dir.path(), 1)).unwrap();
        let text = std::fs::read_to_string(dir.path().join("table3.csv")).unwrap();
        assert!(!text.lines().next().unwrap().contains("_std"));
    }

    #[test]
    fn synth_is_byte_identical_across_invocations() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        cmd_synth(&small_synth(a.path(), 2)).unwrap();
        cmd_synth(&small_synth(b.path(), 2)).unwrap();
        for f in [
            "table1.csv",
            "table2.csv",
            "table3.csv",
            "traces/run_000.csv",
        ] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn sigma_grid_cardinality() {
        let g = sigma_grid(0.1, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[2], 0.3);
        assert_eq!(sigma_grid(0.1, 200.0, 0.1).unwrap().len(), 2000);
        assert!(sigma_grid(0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn sweep_emits_one_row_per_sigma_and_an_aci_row() {
        let sc = SyntheticConfig {
            length: 2000,
            ..Default::default()
        };
        let run = generate_run(&sc, 5).unwrap();
        let params = ExperimentParams::default().conformal(Method::Waci, 0.2);
        let rows = sigma_sweep(
            &run.stream,
            &params,
            300,
            &sigma_grid(0.1, 1.0, 0.1).unwrap(),
        )
        .unwrap();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[10].sigma, None);
    }

    #[test]
    fn epf_on_short_panel_reports_required_rows() {
        let panel = ensemble_panel(&EnsemblePanelConfig {
            days: 10,
            ..Default::default()
        })
        .unwrap();
        let settings = EpfSettings::from_config(&RunConfig::default());
        match epf_tables(&panel, &settings) {
            Err(Error::InsufficientHistory {
                required,
                available,
            }) => {
                assert_eq!(available, 240);
                assert_eq!(required, settings.required_rows(&panel));
                assert!(required > available);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn epf_smoke_has_nine_labelled_rows() {
        let panel = ensemble_panel(&EnsemblePanelConfig {
            days: 60,
            ..Default::default()
        })
        .unwrap();
        let cfg = RunConfig {
            alpha: Some(0.2),
            window_days: Some(20),
            warmup: Some(10),
            bootstrap_samples: Some(20),
            bootstrap_size: Some(200),
            ..Default::default()
        };
        let tables = epf_tables(&panel, &EpfSettings::from_config(&cfg)).unwrap();
        assert_eq!(tables.len(), 1);
        let labels: Vec<String> = tables[0].runs.iter().map(|r| r.label()).collect();
        assert_eq!(
            labels,
            [
                "QRA",
                "HQR",
                "HQR-W",
                "QRA (ACI)",
                "HQR (ACI)",
                "HQR-W (ACI)",
                "QRA (WACI)",
                "HQR (WACI)",
                "HQR-W (WACI)"
            ]
        );
        for run in &tables[0].runs {
            let row = run.summary(&Metric::ALL);
            assert_eq!(row.value(Metric::Ils).is_none(), run.method == Method::None);
            assert!(row.value(Metric::Coverage).unwrap().is_finite());
        }
    }
}
