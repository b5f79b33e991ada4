//! Data model shared by every stage: the forecast panel, extended-real
//! prediction intervals and the interval streams passed between the
//! quantile-regression and conformal stages.

use std::collections::HashMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Realized targets aligned with an ensemble of `M` point forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPanel {
    timestamps: Vec<NaiveDateTime>,
    y: Vec<f64>,
    forecasts: Vec<f64>,
    n_forecasters: usize,
    group_key: Option<Vec<u32>>,
}

impl ForecastPanel {
    /// `forecasts` holds one row of `M` forecasts per timestamp.
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        y: Vec<f64>,
        forecasts: Vec<Vec<f64>>,
        group_key: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = y.len();
        if timestamps.len() != n || forecasts.len() != n {
            return Err(Error::InvalidPanel(format!(
                "length mismatch: {} timestamps, {} targets, {} forecast rows",
                timestamps.len(),
                n,
                forecasts.len()
            )));
        }
        let m = forecasts.first().map_or(0, Vec::len);
        if n > 0 && m == 0 {
            return Err(Error::InvalidPanel(
                "at least one forecast column is required".into(),
            ));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPanel(format!(
                "timestamps not strictly increasing at row {} ({} after {})",
                w + 1,
                timestamps[w + 1],
                timestamps[w]
            )));
        }
        let mut flat = Vec::with_capacity(n * m);
        for (t, row) in forecasts.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidPanel(format!(
                    "row {t} has {} forecasts, expected {m}",
                    row.len()
                )));
            }
            if !y[t].is_finite() || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPanel(format!("non-finite value in row {t}")));
            }
            flat.extend_from_slice(row);
        }
        if let Some(g) = &group_key {
            if g.len() != n {
                return Err(Error::InvalidPanel(format!(
                    "group_key has {} entries for {n} rows",
                    g.len()
                )));
            }
        }
        Ok(Self {
            timestamps,
            y,
            forecasts: flat,
            n_forecasters: m,
            group_key,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_forecasters(&self) -> usize {
        self.n_forecasters
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.forecasts[t * self.n_forecasters..(t + 1) * self.n_forecasters]
    }

    pub fn group_key(&self) -> Option<&[u32]> {
        self.group_key.as_deref()
    }

    /// Group of row `t`; 0 when the panel carries no grouping.
    pub fn group(&self, t: usize) -> u32 {
        self.group_key.as_ref().map_or(0, |g| g[t])
    }

    pub fn with_group_key(mut self, group_key: Option<Vec<u32>>) -> Result<Self> {
        if let Some(g) = &group_key {
            if g.len() != self.len() {
                return Err(Error::InvalidPanel(format!(
                    "group_key has {} entries for {} rows",
                    g.len(),
                    self.len()
                )));
            }
        }
        self.group_key = group_key;
        Ok(self)
    }

    /// Arithmetic mean of the forecasts at row `t`.
    pub fn mean_forecast(&self, t: usize) -> f64 {
        mean(self.row(t))
    }

    /// Dispersion of the forecasts at row `t` (population form, divisor `M`).
    pub fn forecast_std(&self, t: usize) -> f64 {
        population_std(self.row(t))
    }

    /// Rows `range` as a new panel.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let m = self.n_forecasters;
        Self {
            timestamps: self.timestamps[range.clone()].to_vec(),
            y: self.y[range.clone()].to_vec(),
            forecasts: self.forecasts[range.start * m..range.end * m].to_vec(),
            n_forecasters: m,
            group_key: self.group_key.as_ref().map(|g| g[range].to_vec()),
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    var.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    Finite,
    Infinite,
    Empty,
}

/// Closed prediction interval over the extended reals.
///
/// An empty interval keeps the point it collapsed onto in both bounds so that
/// interval scores can still measure how far the target fell from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lower: f64,
    upper: f64,
    alpha_nominal: f64,
    kind: IntervalKind,
}

impl Interval {
    /// Classifies `[lower, upper]`. Crossed bounds give the empty set.
    pub fn new(lower: f64, upper: f64, alpha_nominal: f64) -> Self {
        if lower > upper {
            let center = 0.5 * (lower + upper);
            return Self::empty(
                if center.is_finite() { center } else { f64::NAN },
                alpha_nominal,
            );
        }
        let kind = if lower.is_finite() && upper.is_finite() {
            IntervalKind::Finite
        } else {
            IntervalKind::Infinite
        };
        Self {
            lower,
            upper,
            alpha_nominal,
            kind,
        }
    }

    pub fn empty(center: f64, alpha_nominal: f64) -> Self {
        Self {
            lower: center,
            upper: center,
            alpha_nominal,
            kind: IntervalKind::Empty,
        }
    }

    pub fn with_alpha(mut self, alpha_nominal: f64) -> Self {
        self.alpha_nominal = alpha_nominal;
        self
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn alpha_nominal(&self) -> f64 {
        self.alpha_nominal
    }

    pub fn kind(&self) -> IntervalKind {
        self.kind
    }

    pub fn is_finite(&self) -> bool {
        self.kind == IntervalKind::Finite
    }

    /// Collapse point of an empty interval, midpoint otherwise.
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn covers(&self, y: f64) -> bool {
        match self.kind {
            IntervalKind::Empty => false,
            _ => self.lower <= y && y <= self.upper,
        }
    }

    pub fn length(&self) -> f64 {
        match self.kind {
            IntervalKind::Finite => self.upper - self.lower,
            IntervalKind::Infinite => f64::INFINITY,
            IntervalKind::Empty => 0.0,
        }
    }
}

/// One step of an interval stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    /// Row index in the originating panel.
    pub t: usize,
    pub interval: Interval,
    pub y: f64,
    pub group: u32,
    /// Ensemble mean forecast at `t`.
    pub point: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalStream {
    pub records: Vec<IntervalRecord>,
    /// Number of quantile crossings repaired by swapping bounds.
    pub crossings: usize,
}

impl IntervalStream {
    pub fn new(records: Vec<IntervalRecord>) -> Result<Self> {
        let stream = Self {
            records,
            crossings: 0,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks that time indices increase strictly within each group.
    pub fn validate(&self) -> Result<()> {
        let mut last: HashMap<u32, usize> = HashMap::new();
        for r in &self.records {
            if let Some(prev) = last.insert(r.group, r.t) {
                if r.t <= prev {
                    return Err(Error::InvalidPanel(format!(
                        "time index {} does not follow {} in group {}",
                        r.t, prev, r.group
                    )));
                }
            }
        }
        Ok(())
    }

    /// Group keys in order of first appearance.
    pub fn groups(&self) -> Vec<u32> {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.group) {
                seen.push(r.group);
            }
        }
        seen
    }
}
