//! Interval evaluation metrics. Coverage-type values are in percent.

mod bootstrap;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use bootstrap::{
    bootstrap_report_std, stationary_bootstrap, stationary_bootstrap_indices,
    stationary_bootstrap_std, BootstrapConfig,
};

use crate::error::{Error, Result};
use crate::series::{mean, population_std, Interval, IntervalKind};

/// One evaluated step: the interval before and after conformalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub y: f64,
    pub base: Interval,
    pub conformalized: Interval,
    /// Ensemble mean forecast.
    pub point: f64,
    pub state: Option<u8>,
}

impl EvaluationRecord {
    /// A record whose interval was not post-processed.
    pub fn unconformalized(y: f64, interval: Interval, point: f64) -> Self {
        Self {
            y,
            base: interval,
            conformalized: interval,
            point,
            state: None,
        }
    }

    pub fn covered(&self) -> bool {
        self.conformalized.covers(self.y)
    }
}

/// Finite stand-in for infinite intervals when averaging lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplacementInterval {
    lower: f64,
    upper: f64,
}

impl ReplacementInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::param(
                "replacement",
                format!("[{lower}, {upper}] must be finite and ordered"),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// Smallest lower and largest upper bound among the finite intervals.
    pub fn from_intervals<'a>(intervals: impl IntoIterator<Item = &'a Interval>) -> Result<Self> {
        let (lo, hi) = intervals
            .into_iter()
            .filter(|iv| iv.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), iv| {
                (lo.min(iv.lower()), hi.max(iv.upper()))
            });
        Self::new(lo, hi)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    /// Length of `iv` with infinite intervals replaced.
    pub fn effective_length(&self, iv: &Interval) -> f64 {
        match iv.kind() {
            IntervalKind::Infinite => self.length(),
            _ => iv.length(),
        }
    }
}

/// Settings shared by every metric of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalContext {
    pub alpha: f64,
    pub replacement: ReplacementInterval,
    /// Fraction of most-modified records entering ILS.
    pub ils_lambda: f64,
    /// Bin width of MCD in percent of the records.
    pub mcd_lambda: f64,
    /// Whether a conformal step was applied; ILS is undefined otherwise.
    pub conformalized: bool,
}

impl EvalContext {
    pub fn new(alpha: f64, replacement: ReplacementInterval, conformalized: bool) -> Self {
        Self {
            alpha,
            replacement,
            ils_lambda: 0.10,
            mcd_lambda: 5.0,
            conformalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    /// Set when one of the series is constant and the value defaults to 0.
    pub degenerate: bool,
}

fn require(metric: &'static str, records: usize, required: usize) -> Result<()> {
    if records < required {
        return Err(Error::TooFewRecords {
            metric,
            required,
            available: records,
        });
    }
    Ok(())
}

pub fn empirical_coverage(records: &[EvaluationRecord]) -> Result<f64> {
    require("coverage", records.len(), 1)?;
    let hits = records.iter().filter(|r| r.covered()).count();
    Ok(100.0 * hits as f64 / records.len() as f64)
}

pub fn mean_interval_length(
    records: &[EvaluationRecord],
    replacement: &ReplacementInterval,
) -> Result<f64> {
    require("mean_length", records.len(), 1)?;
    Ok(mean(&lengths(records, replacement)))
}

fn lengths(records: &[EvaluationRecord], replacement: &ReplacementInterval) -> Vec<f64> {
    records
        .iter()
        .map(|r| replacement.effective_length(&r.conformalized))
        .collect()
}

/// Winkler score of one interval. Empty intervals have length 0 and are
/// penalized by the distance to the point they collapsed onto.
pub fn winkler(iv: &Interval, y: f64, alpha: f64, replacement: &ReplacementInterval) -> f64 {
    let k = 2.0 / alpha;
    if iv.kind() == IntervalKind::Empty {
        return k * (y - iv.center()).abs();
    }
    let len = replacement.effective_length(iv);
    if y < iv.lower() {
        len + k * (iv.lower() - y)
    } else if y > iv.upper() {
        len + k * (y - iv.upper())
    } else {
        len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinklerScore {
    pub value: f64,
    pub empty_count: usize,
}

pub fn winkler_score(
    records: &[EvaluationRecord],
    alpha: f64,
    replacement: &ReplacementInterval,
) -> Result<WinklerScore> {
    require("winkler", records.len(), 1)?;
    let total: f64 = records
        .iter()
        .map(|r| winkler(&r.conformalized, r.y, alpha, replacement))
        .sum();
    Ok(WinklerScore {
        value: total / records.len() as f64,
        empty_count: records
            .iter()
            .filter(|r| r.conformalized.kind() == IntervalKind::Empty)
            .count(),
    })
}

/// Pearson coefficient; 0 and flagged when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Correlation {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Correlation {
            value: 0.0,
            degenerate: true,
        };
    }
    Correlation {
        value: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Correlation {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Correlation between conformalized length and the coverage indicator.
pub fn pearson_len_cov(
    records: &[EvaluationRecord],
    replacement: &ReplacementInterval,
) -> Result<Correlation> {
    require("pearson", records.len(), 2)?;
    let cov: Vec<f64> = records
        .iter()
        .map(|r| if r.covered() { 1.0 } else { 0.0 })
        .collect();
    Ok(pearson(&lengths(records, replacement), &cov))
}

/// Rank correlation between the absolute error of the ensemble mean and the
/// conformalized length.
pub fn spearman_err_len(
    records: &[EvaluationRecord],
    replacement: &ReplacementInterval,
) -> Result<Correlation> {
    require("spearman", records.len(), 2)?;
    let err: Vec<f64> = records.iter().map(|r| (r.y - r.point).abs()).collect();
    Ok(spearman(&err, &lengths(records, replacement)))
}

pub fn interval_length_std(
    records: &[EvaluationRecord],
    replacement: &ReplacementInterval,
) -> Result<f64> {
    require("length_std", records.len(), 2)?;
    Ok(population_std(&lengths(records, replacement)))
}

/// Empirical `p`-quantile of ascending `sorted`, interpolating linearly
/// between order statistics.
pub fn linear_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Coverage deviation on the `lambda` fraction of records whose length the
/// conformal step changed most.
pub fn ils_lambda_coverage(
    records: &[EvaluationRecord],
    lambda: f64,
    alpha: f64,
    replacement: &ReplacementInterval,
) -> Result<f64> {
    require("ils", records.len(), 1)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::param(
            "ils_lambda",
            format!("{lambda} is outside (0, 1]"),
        ));
    }
    let delta: Vec<f64> = records
        .iter()
        .map(|r| {
            (replacement.effective_length(&r.conformalized) - replacement.effective_length(&r.base))
                .abs()
        })
        .collect();
    let mut sorted = delta.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = linear_quantile(&sorted, 1.0 - lambda);
    let (mut n, mut hits) = (0usize, 0usize);
    for (r, d) in records.iter().zip(&delta) {
        if *d >= threshold {
            n += 1;
            hits += usize::from(r.covered());
        }
    }
    Ok(100.0 * (hits as f64 / n as f64 - (1.0 - alpha)).abs())
}

/// Mean coverage deviation over `100 / lambda` equal-frequency length bins.
/// Bins left empty by tied lengths are skipped.
pub fn mcd(
    records: &[EvaluationRecord],
    lambda: f64,
    alpha: f64,
    replacement: &ReplacementInterval,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 100.0) {
        return Err(Error::param(
            "mcd_lambda",
            format!("{lambda} is outside (0, 100]"),
        ));
    }
    let k = (100.0 / lambda).round().max(1.0) as usize;
    require("mcd", records.len(), k)?;
    let len = lengths(records, replacement);
    let mut sorted = len.clone();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..k)
        .map(|j| linear_quantile(&sorted, j as f64 / k as f64))
        .collect();
    let mut count = vec![0usize; k];
    let mut hits = vec![0usize; k];
    for (r, l) in records.iter().zip(&len) {
        let bin = cuts.partition_point(|c| *c <= *l);
        count[bin] += 1;
        hits[bin] += usize::from(r.covered());
    }
    let deviations: Vec<f64> = count
        .iter()
        .zip(&hits)
        .filter(|(c, _)| **c > 0)
        .map(|(c, h)| (*h as f64 / *c as f64 - (1.0 - alpha)).abs())
        .collect();
    Ok(100.0 * mean(&deviations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Coverage,
    MeanLength,
    Winkler,
    Pearson,
    Ils,
    Spearman,
    LengthStd,
    Mcd,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Coverage,
        Metric::MeanLength,
        Metric::Winkler,
        Metric::Pearson,
        Metric::Ils,
        Metric::Spearman,
        Metric::LengthStd,
        Metric::Mcd,
    ];

    /// Columns of the synthetic tables.
    pub const SYNTHETIC: [Metric; 6] = [
        Metric::Coverage,
        Metric::MeanLength,
        Metric::Winkler,
        Metric::Pearson,
        Metric::Ils,
        Metric::Mcd,
    ];

    pub fn column(&self) -> &'static str {
        match self {
            Metric::Coverage => "coverage",
            Metric::MeanLength => "mean_length",
            Metric::Winkler => "winkler",
            Metric::Pearson => "pearson",
            Metric::Ils => "ils_0.10",
            Metric::Spearman => "spearman",
            Metric::LengthStd => "length_std",
            Metric::Mcd => "mcd_5",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub coverage: f64,
    pub mean_length: f64,
    pub winkler: f64,
    pub pearson: f64,
    /// Absent when no conformal step was applied.
    pub ils: Option<f64>,
    pub spearman: f64,
    pub length_std: f64,
    pub mcd: f64,
    pub empty_count: usize,
    pub infinite_count: usize,
    pub pearson_degenerate: bool,
    pub spearman_degenerate: bool,
}

impl MetricsReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Coverage => Some(self.coverage),
            Metric::MeanLength => Some(self.mean_length),
            Metric::Winkler => Some(self.winkler),
            Metric::Pearson => Some(self.pearson),
            Metric::Ils => self.ils,
            Metric::Spearman => Some(self.spearman),
            Metric::LengthStd => Some(self.length_std),
            Metric::Mcd => Some(self.mcd),
        }
    }
}

pub fn evaluate(records: &[EvaluationRecord], ctx: &EvalContext) -> Result<MetricsReport> {
    let repl = &ctx.replacement;
    let w = winkler_score(records, ctx.alpha, repl)?;
    let p = pearson_len_cov(records, repl)?;
    let s = spearman_err_len(records, repl)?;
    Ok(MetricsReport {
        n: records.len(),
        coverage: empirical_coverage(records)?,
        mean_length: mean_interval_length(records, repl)?,
        winkler: w.value,
        pearson: p.value,
        ils: if ctx.conformalized {
            Some(ils_lambda_coverage(
                records,
                ctx.ils_lambda,
                ctx.alpha,
                repl,
            )?)
        } else {
            None
        },
        spearman: s.value,
        length_std: interval_length_std(records, repl)?,
        mcd: mcd(records, ctx.mcd_lambda, ctx.alpha, repl)?,
        empty_count: w.empty_count,
        infinite_count: records
            .iter()
            .filter(|r| r.conformalized.kind() == IntervalKind::Infinite)
            .count(),
        pearson_degenerate: p.degenerate,
        spearman_degenerate: s.degenerate,
    })
}

/// A metric value with an optional dispersion estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: Option<f64>,
    pub std: Option<f64>,
}

/// One table row, e.g. a method evaluated on one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub cells: Vec<(Metric, Cell)>,
}

impl SummaryRow {
    /// Values of a single evaluation, without dispersion.
    pub fn single(label: impl Into<String>, report: &MetricsReport, metrics: &[Metric]) -> Self {
        Self {
            label: label.into(),
            cells: metrics
                .iter()
                .map(|m| {
                    (
                        *m,
                        Cell {
                            value: report.get(*m),
                            std: None,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Mean and sample standard deviation across runs; the deviation is
    /// absent for a single run.
    pub fn across_runs(
        label: impl Into<String>,
        reports: &[MetricsReport],
        metrics: &[Metric],
    ) -> Self {
        let cells = metrics
            .iter()
            .map(|m| {
                let vals: Vec<f64> = reports.iter().filter_map(|r| r.get(*m)).collect();
                let cell = if vals.is_empty() {
                    Cell {
                        value: None,
                        std: None,
                    }
                } else {
                    let mu = mean(&vals);
                    let std = (vals.len() > 1).then(|| {
                        let ss: f64 = vals.iter().map(|v| (v - mu) * (v - mu)).sum();
                        (ss / (vals.len() - 1) as f64).sqrt()
                    });
                    Cell {
                        value: Some(mu),
                        std,
                    }
                };
                (*m, cell)
            })
            .collect();
        Self {
            label: label.into(),
            cells,
        }
    }

    pub fn get(&self, metric: Metric) -> Option<Cell> {
        self.cells
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|(_, c)| *c)
    }

    pub fn value(&self, metric: Metric) -> Option<f64> {
        self.get(metric).and_then(|c| c.value)
    }
}
