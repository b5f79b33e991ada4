use serde::{Deserialize, Serialize};

use super::scores::{cqr_conformalize, cqr_score, ScoreSet};
use crate::error::{Error, Result};
use crate::series::Interval;

/// What a single online conformal step produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub conformalized: Interval,
    /// Effective miscoverage used for this step.
    pub alpha_used: f64,
    /// Grid position the step was matched to (always 0 for ACI).
    pub grid_index: usize,
    /// Correction added to both bounds.
    pub correction: f64,
    pub err: bool,
}

pub(crate) fn check_common(alpha_star: f64, gamma: f64) -> Result<()> {
    if !(alpha_star > 0.0 && alpha_star < 1.0) {
        return Err(Error::param(
            "alpha",
            format!("{alpha_star} is outside (0, 1)"),
        ));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("{gamma} must be positive")));
    }
    Ok(())
}

/// Adaptive conformal inference over CQR scores: one effective miscoverage,
/// nudged by `γ(α* − err)` after every observation and left unclipped.
#[derive(Debug, Clone)]
pub struct AciState {
    pub alpha_t: f64,
    pub alpha_star: f64,
    pub gamma: f64,
    pub scores: ScoreSet,
    pub errors: Vec<bool>,
}

impl AciState {
    pub fn new(alpha_star: f64, gamma: f64, scores: ScoreSet) -> Result<Self> {
        check_common(alpha_star, gamma)?;
        Ok(Self {
            alpha_t: alpha_star,
            alpha_star,
            gamma,
            scores,
            errors: Vec::new(),
        })
    }

    /// Conformalizes `interval` with the current state, without updating it.
    pub fn conformalize(&self, interval: &Interval) -> (Interval, f64) {
        let q = self.scores.quantile(1.0 - self.alpha_t);
        (cqr_conformalize(interval, q).with_alpha(self.alpha_star), q)
    }

    pub fn step(&mut self, interval: &Interval, y: f64) -> Result<StepOutcome> {
        let alpha_used = self.alpha_t;
        let (conformalized, correction) = self.conformalize(interval);
        let err = !conformalized.covers(y);
        let e = if err { 1.0 } else { 0.0 };
        self.alpha_t += self.gamma * (self.alpha_star - e);
        self.scores.push(cqr_score(y, interval)?);
        self.errors.push(err);
        Ok(StepOutcome {
            conformalized,
            alpha_used,
            grid_index: 0,
            correction,
            err,
        })
    }

    /// `(max{α₁, 1−α₁} + γ) / (Tγ)` for the `T` steps taken so far.
    pub fn coverage_bound(&self) -> f64 {
        let t = self.errors.len() as f64;
        (self.alpha_star.max(1.0 - self.alpha_star) + self.gamma) / (t * self.gamma)
    }

    pub fn mean_error(&self) -> f64 {
        self.errors.iter().filter(|e| **e).count() as f64 / self.errors.len() as f64
    }
}
