use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::series::{Interval, IntervalKind};

/// Calibration scores with an implicit `+∞` element, optionally limited to
/// the most recent `capacity` values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    fifo: VecDeque<f64>,
    sorted: Vec<f64>,
    capacity: Option<usize>,
}

impl ScoreSet {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            fifo: VecDeque::with_capacity(capacity.unwrap_or(0)),
            sorted: Vec::with_capacity(capacity.unwrap_or(0)),
            capacity,
        }
    }

    pub fn from_scores(scores: impl IntoIterator<Item = f64>, capacity: Option<usize>) -> Self {
        let mut set = Self::new(capacity);
        for s in scores {
            set.push(s);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Scores in insertion order, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.fifo.iter().copied()
    }

    /// Finite scores only; non-finite input is ignored.
    pub fn push(&mut self, score: f64) {
        if !score.is_finite() {
            return;
        }
        if self.capacity == Some(0) {
            return;
        }
        if self.capacity.is_some_and(|c| self.fifo.len() == c) {
            let old = self.fifo.pop_front().unwrap();
            let pos = self.sorted.partition_point(|v| *v < old);
            self.sorted.remove(pos);
        }
        self.fifo.push_back(score);
        let pos = self.sorted.partition_point(|v| *v <= score);
        self.sorted.insert(pos, score);
    }

    /// Level-`p` quantile of the scores augmented with `+∞`.
    pub fn quantile(&self, p: f64) -> f64 {
        augmented_quantile(&self.sorted, p)
    }
}

/// `k`-th smallest of `sorted ∪ {+∞}` with `k = ⌈p (n + 1)⌉`; `-∞` for
/// `k ≤ 0`, `+∞` for `k > n`. `sorted` must be ascending.
pub fn augmented_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = (p * (n as f64 + 1.0)).ceil();
    if k <= 0.0 {
        f64::NEG_INFINITY
    } else if k > n as f64 {
        f64::INFINITY
    } else {
        sorted[k as usize - 1]
    }
}

/// CQR conformity score: signed exceedance of the nearer bound, negative
/// when `y` lies strictly inside.
pub fn cqr_score(y: f64, interval: &Interval) -> Result<f64> {
    match interval.kind() {
        IntervalKind::Finite => Ok((y - interval.upper()).max(interval.lower() - y)),
        IntervalKind::Infinite => Err(Error::ScoreUndefined("infinite")),
        IntervalKind::Empty => Err(Error::ScoreUndefined("empty")),
    }
}

/// Widens (or, for negative `q`, narrows) a finite interval by `q` on both sides.
pub fn cqr_conformalize(interval: &Interval, q: f64) -> Interval {
    let alpha = interval.alpha_nominal();
    if !interval.is_finite() {
        return *interval;
    }
    if q == f64::INFINITY {
        Interval::new(f64::NEG_INFINITY, f64::INFINITY, alpha)
    } else if q == f64::NEG_INFINITY {
        Interval::empty(interval.center(), alpha)
    } else {
        Interval::new(interval.lower() - q, interval.upper() + q, alpha)
    }
}
