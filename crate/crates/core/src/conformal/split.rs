//! Split conformal prediction around a point forecast (SCP) and conformalized
//! quantile regression with a fixed calibration set (CQR).

use super::scores::{cqr_conformalize, cqr_score, ScoreSet};
use crate::error::Result;
use crate::series::Interval;

/// Symmetric intervals around a point prediction, calibrated on absolute
/// residuals. New residuals can be appended as targets are revealed.
#[derive(Debug, Clone, Default)]
pub struct ScpState {
    pub scores: ScoreSet,
}

impl ScpState {
    pub fn new(scores: ScoreSet) -> Self {
        Self { scores }
    }

    /// Seeds the residual store from calibration pairs `(y, mu_hat)`.
    pub fn calibrate(pairs: impl IntoIterator<Item = (f64, f64)>, capacity: Option<usize>) -> Self {
        Self::new(ScoreSet::from_scores(
            pairs.into_iter().map(|(y, mu)| (y - mu).abs()),
            capacity,
        ))
    }

    pub fn predict(&self, mu_hat: f64, alpha: f64) -> Interval {
        let q = self.scores.quantile(1.0 - alpha);
        if q == f64::INFINITY {
            Interval::new(f64::NEG_INFINITY, f64::INFINITY, alpha)
        } else {
            Interval::new(mu_hat - q, mu_hat + q, alpha)
        }
    }

    pub fn observe(&mut self, mu_hat: f64, y: f64) {
        self.scores.push((y - mu_hat).abs());
    }

    /// Predicts, then appends the realized residual when `y` is known.
    pub fn step(&mut self, mu_hat: f64, y: Option<f64>, alpha: f64) -> Interval {
        let interval = self.predict(mu_hat, alpha);
        if let Some(y) = y {
            self.observe(mu_hat, y);
        }
        interval
    }
}

/// CQR with a static calibration split: one correction `Q_{1-α}` shared by
/// every test interval.
#[derive(Debug, Clone)]
pub struct SplitCqr {
    pub alpha: f64,
    pub correction: f64,
}

impl SplitCqr {
    /// `calibration` holds the quantile-regression interval and realized
    /// target of every calibration point.
    pub fn calibrate<'a>(
        calibration: impl IntoIterator<Item = (&'a Interval, f64)>,
        alpha: f64,
    ) -> Result<Self> {
        let mut scores = ScoreSet::new(None);
        for (iv, y) in calibration {
            scores.push(cqr_score(y, iv)?);
        }
        Ok(Self {
            alpha,
            correction: scores.quantile(1.0 - alpha),
        })
    }

    pub fn apply(&self, interval: &Interval) -> Interval {
        cqr_conformalize(interval, self.correction)
    }
}
