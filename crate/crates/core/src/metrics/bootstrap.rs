//! Stationary bootstrap: resampling blocks of geometric random length.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{evaluate, EvalContext, EvaluationRecord, Metric};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_samples: usize,
    pub sample_size: usize,
    pub mean_block_length: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if self.mean_block_length.is_nan() || self.mean_block_length < 1.0 {
            return Err(Error::param(
                "mean_block_length",
                format!("{} must be at least 1", self.mean_block_length),
            ));
        }
        if self.n_samples < 2 || self.sample_size == 0 {
            return Err(Error::param(
                "bootstrap",
                format!(
                    "need at least 2 samples of positive size, got {} of size {}",
                    self.n_samples, self.sample_size
                ),
            ));
        }
        Ok(())
    }
}

/// `sample_size` indices into `0..n`: each step restarts at a uniform index
/// with probability `1 / mean_block_length`, otherwise continues to the next
/// index, wrapping at the end.
pub fn stationary_bootstrap_indices<R: Rng>(
    n: usize,
    sample_size: usize,
    mean_block_length: f64,
    rng: &mut R,
) -> Vec<usize> {
    let p = 1.0 / mean_block_length;
    let mut out = Vec::with_capacity(sample_size);
    let mut i = rng.random_range(0..n);
    for k in 0..sample_size {
        if k > 0 {
            i = if rng.random::<f64>() < p {
                rng.random_range(0..n)
            } else {
                (i + 1) % n
            };
        }
        out.push(i);
    }
    out
}

/// Applies `statistic` to every bootstrap replicate. Replicate `r` draws
/// from its own stream seeded by `(cfg.seed, r)`.
pub fn stationary_bootstrap<T, R, F>(
    records: &[T],
    cfg: &BootstrapConfig,
    statistic: F,
) -> Result<Vec<R>>
where
    T: Clone + Sync,
    R: Send,
    F: Fn(&[T]) -> Result<R> + Sync,
{
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::TooFewRecords {
            metric: "bootstrap",
            required: 1,
            available: 0,
        });
    }
    (0..cfg.n_samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, r as u64));
            let idx = stationary_bootstrap_indices(
                records.len(),
                cfg.sample_size,
                cfg.mean_block_length,
                &mut rng,
            );
            let sample: Vec<T> = idx.iter().map(|&i| records[i].clone()).collect();
            statistic(&sample)
        })
        .collect()
}

fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
    Some((ss / (n - 1.0)).sqrt())
}

/// Standard deviation of a scalar statistic across bootstrap replicates.
pub fn stationary_bootstrap_std<T, F>(
    records: &[T],
    cfg: &BootstrapConfig,
    statistic: F,
) -> Result<f64>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Result<f64> + Sync,
{
    let values = stationary_bootstrap(records, cfg, statistic)?;
    Ok(sample_std(&values).unwrap_or(0.0))
}

/// Bootstrap standard deviation of every metric of a full evaluation.
/// Replicates on which a metric is undefined are left out of its estimate.
pub fn bootstrap_report_std(
    records: &[EvaluationRecord],
    ctx: &EvalContext,
    cfg: &BootstrapConfig,
) -> Result<Vec<(Metric, Option<f64>)>> {
    let reports = stationary_bootstrap(records, cfg, |s| evaluate(s, ctx))?;
    Ok(Metric::ALL
        .iter()
        .map(|m| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.get(*m)).collect();
            (*m, sample_std(&vals))
        })
        .collect())
}
