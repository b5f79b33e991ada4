use serde::{Deserialize, Serialize};

use super::aci::{check_common, StepOutcome};
use super::scores::{cqr_conformalize, cqr_score, ScoreSet};
use crate::error::{Error, Result};
use crate::series::Interval;

/// Equally spaced interval lengths `l_min, l_min + δ, …` indexing the
/// per-length miscoverages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthGrid {
    l_min: f64,
    step: f64,
    n_points: usize,
}

impl LengthGrid {
    /// Points from `l_min` up to the first point at or beyond `l_max`.
    pub fn new(l_min: f64, l_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::param(
                "grid_step",
                format!("{step} must be positive"),
            ));
        }
        if !(l_min.is_finite() && l_max.is_finite() && l_min < l_max) {
            return Err(Error::param(
                "grid",
                format!("bounds [{l_min}, {l_max}] must be finite with l_min < l_max"),
            ));
        }
        let span = (l_max - l_min) / step;
        let n_points = (span - 1e-9).ceil().max(1.0) as usize + 1;
        Ok(Self {
            l_min,
            step,
            n_points,
        })
    }

    /// A one-point grid; WACI over it reproduces ACI.
    pub fn single(length: f64) -> Self {
        Self {
            l_min: length,
            step: 1.0,
            n_points: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn l_min(&self) -> f64 {
        self.l_min
    }

    pub fn l_max(&self) -> f64 {
        self.point(self.n_points - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn point(&self, i: usize) -> f64 {
        self.l_min + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.point(i))
    }

    /// Index of the grid point closest to `length`; ties go to the lower
    /// index and lengths off the grid clamp to an endpoint.
    pub fn nearest(&self, length: f64) -> usize {
        if self.n_points == 1 || length.is_nan() || length <= self.l_min {
            return 0;
        }
        let last = self.n_points - 1;
        let pos = (length - self.l_min) / self.step;
        if pos >= last as f64 {
            return last;
        }
        let lo = pos.floor() as usize;
        let hi = lo + 1;
        if (self.point(hi) - length).abs() < (length - self.point(lo)).abs() {
            hi
        } else {
            lo
        }
    }
}

/// How a miss or hit at one grid point spreads to its neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum WeightScheme {
    /// Kernel over length distance, in length units.
    Gaussian { sigma: f64 },
    /// `decay^|i − j|` over grid positions.
    Geometric { decay: f64 },
}

impl WeightScheme {
    pub const DEFAULT_DECAY: f64 = 0.5;

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightScheme::Gaussian { sigma } if sigma.is_nan() || sigma <= 0.0 => {
                Err(Error::param("sigma", format!("{sigma} must be positive")))
            }
            WeightScheme::Geometric { decay } if !(decay > 0.0 && decay < 1.0) => {
                Err(Error::param("decay", format!("{decay} is outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    /// Weight of every grid point for an interval of `length` matched to `idx`.
    pub fn weights(&self, grid: &LengthGrid, idx: usize, length: f64) -> Vec<f64> {
        match *self {
            WeightScheme::Gaussian { sigma } => {
                let two_var = 2.0 * sigma * sigma;
                let d0 = grid.point(idx) - length;
                let d0 = d0 * d0;
                grid.points()
                    .enumerate()
                    .map(|(j, l)| {
                        if j == idx {
                            1.0
                        } else {
                            let d = l - length;
                            let e = -(d * d - d0) / two_var;
                            // exp underflows to exactly zero below this
                            if e < -746.0 {
                                0.0
                            } else {
                                e.exp()
                            }
                        }
                    })
                    .collect()
            }
            WeightScheme::Geometric { decay } => (0..grid.len())
                .map(|j| decay.powi(j.abs_diff(idx) as i32))
                .collect(),
        }
    }
}

/// Width-adaptive conformal inference: one effective miscoverage per grid
/// length, updated with distance-decaying weights after every observation.
#[derive(Debug, Clone)]
pub struct WaciState {
    pub grid: LengthGrid,
    pub alpha_vec: Vec<f64>,
    pub alpha_star: f64,
    pub gamma: f64,
    pub weights: WeightScheme,
    pub scores: ScoreSet,
    pub errors: Vec<bool>,
}

impl WaciState {
    pub fn new(
        grid: LengthGrid,
        alpha_star: f64,
        gamma: f64,
        weights: WeightScheme,
        scores: ScoreSet,
    ) -> Result<Self> {
        check_common(alpha_star, gamma)?;
        weights.validate()?;
        Ok(Self {
            alpha_vec: vec![alpha_star; grid.len()],
            grid,
            alpha_star,
            gamma,
            weights,
            scores,
            errors: Vec::new(),
        })
    }

    /// Grid index, effective miscoverage, conformalized interval and correction.
    pub fn conformalize(&self, interval: &Interval) -> (usize, f64, Interval, f64) {
        let idx = self.grid.nearest(interval.length());
        let alpha = self.alpha_vec[idx];
        let q = self.scores.quantile(1.0 - alpha);
        let out = cqr_conformalize(interval, q).with_alpha(self.alpha_star);
        (idx, alpha, out, q)
    }

    pub fn step(&mut self, interval: &Interval, y: f64) -> Result<StepOutcome> {
        let score = cqr_score(y, interval)?;
        let (idx, alpha_used, conformalized, correction) = self.conformalize(interval);
        let err = !conformalized.covers(y);
        let e = if err { 1.0 } else { 0.0 };
        let w = self.weights.weights(&self.grid, idx, interval.length());
        for (a, w) in self.alpha_vec.iter_mut().zip(w) {
            *a += self.gamma * w * (self.alpha_star - e);
        }
        self.scores.push(score);
        self.errors.push(err);
        Ok(StepOutcome {
            conformalized,
            alpha_used,
            grid_index: idx,
            correction,
            err,
        })
    }
}
