//! Two-regime synthetic benchmark: a Gaussian process switching between a
//! high- and a low-variance state, with analytic intervals built from a
//! slightly wrong volatility estimate.

use chrono::NaiveDate;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use crate::conformal::{
    run_conformal_stream, ConformalOutput, ConformalParams, GridSpec, Method, WeightScheme,
};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate, EvalContext, EvaluationRecord, Metric, MetricsReport, ReplacementInterval, SummaryRow,
};
use crate::seed::derive_seed;
use crate::series::{
    mean, population_std, ForecastPanel, Interval, IntervalRecord, IntervalStream,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub mu: f64,
    pub sigma_high: f64,
    pub sigma_low: f64,
    /// Added to the switching probability after every step without a switch.
    pub transition_increment: f64,
    pub length: usize,
    pub alpha: f64,
    pub n_runs: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            mu: 100.0,
            sigma_high: 7.0,
            sigma_low: 2.0,
            transition_increment: 1e-4,
            length: 10_000,
            alpha: 0.2,
            n_runs: 100,
            seed: 2024,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_high", self.sigma_high),
            ("sigma_low", self.sigma_low),
            ("transition_increment", self.transition_increment),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        if !self.mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidLevel(self.alpha));
        }
        if self.length == 0 || self.n_runs == 0 {
            return Err(Error::param(
                "length",
                "length and run count must be positive",
            ));
        }
        Ok(())
    }

    /// Volatility estimate used for the intervals at step `t`.
    pub fn sigma_hat(&self, high: bool, t: usize) -> f64 {
        let t = t as f64;
        if high {
            self.sigma_high + 2.0 * (0.001 * t).sin()
        } else {
            self.sigma_low + (0.005 * t).cos()
        }
    }
}

/// Regime index: 0 is the high-variance state the process starts in.
pub const HIGH_STATE: u8 = 0;
pub const LOW_STATE: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRun {
    pub y: Vec<f64>,
    pub delta: Vec<u8>,
    pub sigma: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub stream: IntervalStream,
}

/// Uniform draw in the open unit interval.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// `p`-quantile of Student's t with `df` degrees of freedom, by bisection
/// on its distribution function.
pub fn t_critical(p: f64, df: u32) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidLevel(p));
    }
    if df == 0 {
        return Err(Error::param("df", "degrees of freedom must be positive"));
    }
    let v = df as f64;
    // mass between 0 and |x|, from whichever incomplete-beta form is accurate
    let cdf = |x: f64| {
        let x2 = x * x;
        let inner = if x2 < v {
            0.5 * beta_reg(0.5, 0.5 * v, x2 / (v + x2))
        } else {
            0.5 - 0.5 * beta_reg(0.5 * v, 0.5, v / (v + x2))
        };
        if x >= 0.0 {
            0.5 + inner
        } else {
            0.5 - inner
        }
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while cdf(lo) > p {
        lo *= 2.0;
    }
    while cdf(hi) < p {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn generate_run(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::standard();
    let half = t_critical(1.0 - cfg.alpha / 2.0, 9)? * 1.1f64.sqrt();
    let n = cfg.length;
    let mut run = SyntheticRun {
        y: Vec::with_capacity(n),
        delta: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        sigma_hat: Vec::with_capacity(n),
        stream: IntervalStream::default(),
    };
    let mut state = HIGH_STATE;
    let mut p_switch = 0.0;
    for t in 0..n {
        if open_uniform(&mut rng) < p_switch {
            state = 1 - state;
            p_switch = 0.0;
        } else {
            p_switch += cfg.transition_increment;
        }
        let high = state == HIGH_STATE;
        let sigma = if high { cfg.sigma_high } else { cfg.sigma_low };
        let y = cfg.mu + sigma * std_normal.inverse_cdf(open_uniform(&mut rng));
        let s_hat = cfg.sigma_hat(high, t);
        run.y.push(y);
        run.delta.push(state);
        run.sigma.push(sigma);
        run.sigma_hat.push(s_hat);
        run.stream.records.push(IntervalRecord {
            t,
            interval: Interval::new(cfg.mu - half * s_hat, cfg.mu + half * s_hat, cfg.alpha),
            y,
            group: 0,
            point: cfg.mu,
        });
    }
    Ok(run)
}

/// Conformal settings of the synthetic experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub aci_gamma: f64,
    pub waci_gamma: f64,
    pub weights: WeightScheme,
    pub grid: GridSpec,
    pub calibration_size: Option<usize>,
    /// Leading steps that only seed the score set and are not evaluated.
    pub warmup: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            aci_gamma: 0.01,
            waci_gamma: 0.01,
            weights: WeightScheme::Gaussian { sigma: 1.0 },
            grid: GridSpec::FromWarmup {
                step: 0.25,
                margin: 0.1,
            },
            calibration_size: None,
            warmup: 500,
        }
    }
}

impl ExperimentParams {
    pub fn conformal(&self, method: Method, alpha: f64) -> ConformalParams {
        ConformalParams {
            alpha_star: alpha,
            gamma: if method == Method::Waci {
                self.waci_gamma
            } else {
                self.aci_gamma
            },
            calibration_size: self.calibration_size,
            weights: self.weights,
            grid: self.grid,
        }
    }
}

/// Which records a table row is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    High,
    Low,
    All,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::High, Subset::Low, Subset::All];

    pub fn contains(&self, state: Option<u8>) -> bool {
        match self {
            Subset::High => state == Some(HIGH_STATE),
            Subset::Low => state == Some(LOW_STATE),
            Subset::All => true,
        }
    }
}

/// Everything produced by one run, kept for trace output.
#[derive(Debug, Clone)]
pub struct RunDetail {
    pub seed: u64,
    pub run: SyntheticRun,
    /// One output per entry of [`Method::ALL`].
    pub outputs: Vec<ConformalOutput>,
    pub reports: RunReports,
}

/// Metrics of one run, indexed by subset then method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunReports {
    pub seed: u64,
    pub reports: [[MetricsReport; 3]; 3],
    /// Miss rate of ACI over the evaluated steps and its deterministic bound.
    pub aci_error_rate: f64,
    pub aci_bound: f64,
}

impl RunReports {
    pub fn get(&self, subset: Subset, method: Method) -> &MetricsReport {
        let s = Subset::ALL.iter().position(|x| *x == subset).unwrap();
        let m = Method::ALL.iter().position(|x| *x == method).unwrap();
        &self.reports[s][m]
    }
}

pub fn run_single(
    cfg: &SyntheticConfig,
    params: &ExperimentParams,
    seed: u64,
) -> Result<RunDetail> {
    let run = generate_run(cfg, seed)?;
    let warmup = params.warmup;
    let replacement = ReplacementInterval::from_intervals(
        run.stream.records[..warmup.min(run.stream.len())]
            .iter()
            .map(|r| &r.interval),
    )?;
    let outputs: Vec<ConformalOutput> = Method::ALL
        .iter()
        .map(|m| run_conformal_stream(&run.stream, *m, &params.conformal(*m, cfg.alpha), warmup))
        .collect::<Result<_>>()?;

    let mut reports = [[None; 3]; 3];
    for (mi, (method, out)) in Method::ALL.iter().zip(&outputs).enumerate() {
        let records: Vec<EvaluationRecord> = out
            .stream
            .records
            .iter()
            .zip(&out.base)
            .map(|(r, base)| EvaluationRecord {
                y: r.y,
                base: *base,
                conformalized: r.interval,
                point: r.point,
                state: Some(run.delta[r.t]),
            })
            .collect();
        let ctx = EvalContext::new(cfg.alpha, replacement, *method != Method::None);
        for (si, subset) in Subset::ALL.iter().enumerate() {
            let part: Vec<EvaluationRecord> = records
                .iter()
                .filter(|r| subset.contains(r.state))
                .copied()
                .collect();
            reports[si][mi] = Some(evaluate(&part, &ctx)?);
        }
    }

    let aci = &outputs[1].trace;
    let gamma = params.aci_gamma;
    let alpha = cfg.alpha;
    let aci_error_rate = aci.iter().filter(|r| r.err).count() as f64 / aci.len() as f64;
    let aci_bound = (alpha.max(1.0 - alpha) + gamma) / (aci.len() as f64 * gamma);
    Ok(RunDetail {
        seed,
        reports: RunReports {
            seed,
            reports: reports.map(|row| row.map(|r| r.expect("every cell evaluated"))),
            aci_error_rate,
            aci_bound,
        },
        run,
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunReports>,
}

impl ExperimentResult {
    /// Rows Initial, ACI, WACI with mean and standard deviation across runs.
    pub fn table(&self, subset: Subset, metrics: &[Metric]) -> Vec<SummaryRow> {
        Method::ALL
            .iter()
            .map(|m| {
                let reports: Vec<MetricsReport> =
                    self.runs.iter().map(|r| *r.get(subset, *m)).collect();
                let label = match m {
                    Method::None => "Initial".to_string(),
                    other => other.to_string(),
                };
                SummaryRow::across_runs(label, &reports, metrics)
            })
            .collect()
    }
}

/// Runs `cfg.n_runs` independent replications in parallel; run `i` uses the
/// seed derived from `(cfg.seed, i)`.
pub fn run_experiment(
    cfg: &SyntheticConfig,
    params: &ExperimentParams,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if params.warmup >= cfg.length {
        return Err(Error::WarmupTooLong {
            group: 0,
            warmup: params.warmup,
            available: cfg.length,
        });
    }
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| run_single(cfg, params, derive_seed(cfg.seed, i as u64)).map(|d| d.reports))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { runs })
}

/// Hourly ensemble panel with a known dispersion structure: every row's
/// forecasts have mean equal to a smooth level and population spread equal
/// to a persistent random scale `v_t`, and the target is the level plus
/// `noise_ratio · v_t` times standard normal noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePanelConfig {
    pub days: usize,
    pub n_forecasters: usize,
    pub noise_ratio: f64,
    pub seed: u64,
}

impl Default for EnsemblePanelConfig {
    fn default() -> Self {
        Self {
            days: 90,
            n_forecasters: 3,
            noise_ratio: 1.0,
            seed: 7,
        }
    }
}

pub fn ensemble_panel(cfg: &EnsemblePanelConfig) -> Result<ForecastPanel> {
    if cfg.n_forecasters < 2 {
        return Err(Error::param(
            "n_forecasters",
            "need at least 2 forecasters for a spread",
        ));
    }
    if cfg.days == 0 || cfg.noise_ratio.is_nan() || cfg.noise_ratio <= 0.0 {
        return Err(Error::param(
            "days",
            "days and noise ratio must be positive",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::standard();
    let mut draw = || normal.inverse_cdf(open_uniform(&mut rng));
    let start = NaiveDate::from_ymd_opt(2023, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let n = cfg.days * 24;
    let m = cfg.n_forecasters;
    let base_log = 5f64.ln();
    let mut log_v = base_log;
    let (mut ts, mut y, mut rows) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for t in 0..n {
        let hour = (t % 24) as f64;
        let level = 60.0
            + 15.0 * (std::f64::consts::TAU * (hour - 8.0) / 24.0).sin()
            + 5.0 * (std::f64::consts::TAU * t as f64 / 168.0).sin();
        log_v = 0.995 * log_v + 0.005 * base_log + 0.08 * draw();
        let v = log_v.exp();
        let mut z: Vec<f64> = (0..m).map(|_| draw()).collect();
        let mz = mean(&z);
        let sz = population_std(&z).max(1e-12);
        z.iter_mut().for_each(|x| *x = (*x - mz) / sz);
        rows.push(z.iter().map(|x| level + v * x).collect::<Vec<f64>>());
        y.push(level + cfg.noise_ratio * v * draw());
        ts.push(start + chrono::Duration::hours(t as i64));
    }
    let groups = (0..n).map(|t| (t % 24) as u32).collect();
    ForecastPanel::new(ts, y, rows, Some(groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(length: usize) -> SyntheticConfig {
        SyntheticConfig {
            length,
            n_runs: 2,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn t_critical_values() {
        assert!(t_critical(0.5, 9).unwrap().abs() < 1e-9);
        assert!(t_critical(0.5, 1).unwrap().abs() < 1e-9);
        assert!((t_critical(0.9, 9).unwrap() - 1.3830).abs() < 5e-5);
        assert!((t_critical(0.95, 9).unwrap() - 1.8331).abs() < 5e-5);
        // df = 1 is Cauchy
        let c = t_critical(0.75, 1).unwrap();
        assert!((c - 1.0).abs() < 1e-9);
        assert!(t_critical(1.0, 9).is_err());
    }

    #[test]
    fn half_width_at_base_volatility() {
        let half = t_critical(0.9, 9).unwrap() * 7.0 * 1.1f64.sqrt();
        assert!((half - 10.153).abs() < 1e-3);
        let run = generate_run(&short(5), 1).unwrap();
        // t = 0 and high state: sin(0) = 0
        let iv = run.stream.records[0].interval;
        assert!((0.5 * iv.length() - half).abs() < 1e-12);
    }

    #[test]
    fn run_invariants() {
        let cfg = short(5000);
        let run = generate_run(&cfg, 9).unwrap();
        assert_eq!(run.delta[0], HIGH_STATE);
        for t in 0..cfg.length {
            let iv = run.stream.records[t].interval;
            assert!((iv.center() - cfg.mu).abs() < 1e-12);
            let s = run.sigma_hat[t];
            if run.delta[t] == HIGH_STATE {
                assert_eq!(run.sigma[t], 7.0);
                assert!((5.0..=9.0).contains(&s));
            } else {
                assert_eq!(run.sigma[t], 2.0);
                assert!((1.0..=3.0).contains(&s));
            }
        }
        assert!(run.delta.contains(&LOW_STATE));
    }

    #[test]
    fn same_seed_same_run() {
        let cfg = short(300);
        assert_eq!(
            generate_run(&cfg, 5).unwrap(),
            generate_run(&cfg, 5).unwrap()
        );
        assert_ne!(
            generate_run(&cfg, 5).unwrap().y,
            generate_run(&cfg, 6).unwrap().y
        );
    }

    #[test]
    fn subsets_partition_the_records() {
        let cfg = short(2000);
        let params = ExperimentParams::default();
        let d = run_single(&cfg, &params, 3).unwrap();
        for m in Method::ALL {
            let n = |s| d.reports.get(s, m).n;
            assert_eq!(n(Subset::High) + n(Subset::Low), n(Subset::All));
            assert_eq!(n(Subset::All), 1500);
        }
        assert!(d.reports.get(Subset::All, Method::None).ils.is_none());
        assert!(d.reports.get(Subset::All, Method::Waci).ils.is_some());
    }

    #[test]
    fn ensemble_panel_spread_tracks_scale() {
        let p = ensemble_panel(&EnsemblePanelConfig::default()).unwrap();
        assert_eq!(p.len(), 90 * 24);
        assert_eq!(p.n_forecasters(), 3);
        assert_eq!(p.group(25), 1);
        let spreads: Vec<f64> = (0..p.len()).map(|t| p.forecast_std(t)).collect();
        let lo = spreads.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = spreads.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.5 && hi > 3.0 * lo, "{lo} {hi}");
        assert!(ensemble_panel(&EnsemblePanelConfig {
            n_forecasters: 1,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = short(1500);
        let params = ExperimentParams::default();
        let a = run_experiment(&cfg, &params).unwrap();
        let b = run_experiment(&cfg, &params).unwrap();
        assert_eq!(a, b);
        let t = a.table(Subset::All, &Metric::SYNTHETIC);
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].label, "Initial");
    }
}
