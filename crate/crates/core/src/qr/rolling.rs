use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_features, fit_quantile_with_info, FitInfo, ModelKind, QuantileModel};
use crate::error::{Error, Result};
use crate::series::{ForecastPanel, Interval, IntervalRecord, IntervalStream};

/// Fits per parallel work unit; each unit warm-starts its fits sequentially.
const FITS_PER_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    /// Training rows per fit.
    pub window_size: usize,
    /// Target miscoverage; quantiles are fitted at `alpha/2` and `1 - alpha/2`.
    pub alpha: f64,
    /// Rows predicted by each fit (1 = refit before every row, 24 = daily
    /// refits on hourly data).
    pub refit_every: usize,
    /// Start predicting before a full window exists, training on every
    /// available row once there are at least `feature count + 2` of them.
    pub truncate_at_start: bool,
}

impl RollingConfig {
    pub fn new(window_size: usize, alpha: f64) -> Self {
        Self {
            window_size,
            alpha,
            refit_every: 1,
            truncate_at_start: false,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(
                "alpha",
                format!("{} is outside (0, 1)", self.alpha),
            ));
        }
        if self.window_size < n_features + 2 {
            return Err(Error::param(
                "window_size",
                format!(
                    "{} is below the minimum of {} for {} features",
                    self.window_size,
                    n_features + 2,
                    n_features
                ),
            ));
        }
        if self.refit_every == 0 {
            return Err(Error::param("refit_every", "must be positive"));
        }
        Ok(())
    }

    /// First row that receives a prediction.
    pub fn first_predictable(&self, n_features: usize) -> usize {
        let raw = if self.truncate_at_start {
            n_features + 2
        } else {
            self.window_size
        };
        raw.div_ceil(self.refit_every) * self.refit_every
    }
}

struct WindowFit {
    /// First predicted row.
    start: usize,
    /// One past the last predicted row.
    end: usize,
    fits: Vec<(QuantileModel, FitInfo)>,
}

fn rolling_fits(
    kind: ModelKind,
    panel: &ForecastPanel,
    cfg: &RollingConfig,
    betas: &[f64],
) -> Result<Vec<WindowFit>> {
    let m = kind.n_features(panel.n_forecasters());
    cfg.validate(m)?;
    let n = panel.len();
    let first = cfg.first_predictable(m);
    if first >= n {
        return Err(Error::InsufficientData {
            first_predictable: first,
            available: n,
        });
    }
    let features: Vec<Vec<f64>> = (0..n).map(|t| build_features(kind, panel, t)).collect();
    let y = panel.y();
    let starts: Vec<usize> = (first..n).step_by(cfg.refit_every).collect();

    let chunks: Vec<Result<Vec<WindowFit>>> = starts
        .par_chunks(FITS_PER_CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            // previous optimal bases, as absolute row indices, one per level
            let mut warm: Vec<Vec<usize>> = vec![Vec::new(); betas.len()];
            for &start in chunk {
                let lo = start.saturating_sub(cfg.window_size);
                let x = &features[lo..start];
                let target = &y[lo..start];
                let mut fits = Vec::with_capacity(betas.len());
                for (b, &beta) in betas.iter().enumerate() {
                    let local: Vec<usize> = warm[b]
                        .iter()
                        .filter(|&&g| g >= lo && g < start)
                        .map(|&g| g - lo)
                        .collect();
                    let (model, info) = fit_quantile_with_info(beta, x, target, &local)?;
                    warm[b] = info.basis.iter().map(|&i| i + lo).collect();
                    fits.push((model, info));
                }
                out.push(WindowFit {
                    start,
                    end: (start + cfg.refit_every).min(n),
                    fits,
                });
            }
            Ok(out)
        })
        .collect();

    let mut all = Vec::with_capacity(starts.len());
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

/// Rolling-window quantile regression: for every predictable row, fits the
/// `alpha/2` and `1 - alpha/2` quantiles on the preceding window only and
/// emits the (unconformalized) interval. Crossed quantiles are swapped and
/// counted.
pub fn rolling_intervals(
    kind: ModelKind,
    panel: &ForecastPanel,
    cfg: &RollingConfig,
) -> Result<IntervalStream> {
    let betas = [cfg.alpha / 2.0, 1.0 - cfg.alpha / 2.0];
    let fits = rolling_fits(kind, panel, cfg, &betas)?;
    let mut records = Vec::with_capacity(panel.len());
    let mut crossings = 0;
    for w in &fits {
        let (lower_model, upper_model) = (&w.fits[0].0, &w.fits[1].0);
        for t in w.start..w.end {
            let x = build_features(kind, panel, t);
            let mut lo = lower_model.predict_unchecked(&x);
            let mut hi = upper_model.predict_unchecked(&x);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
                crossings += 1;
            }
            records.push(IntervalRecord {
                t,
                interval: Interval::new(lo, hi, cfg.alpha),
                y: panel.y()[t],
                group: panel.group(t),
                point: panel.mean_forecast(t),
            });
        }
    }
    Ok(IntervalStream { records, crossings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTraceRow {
    /// Sequential index of the rolling fit.
    pub window: usize,
    /// First row predicted by this fit.
    pub t: usize,
    pub alpha: f64,
    /// Dispersion coefficient of the `alpha/2` quantile model.
    pub lower: f64,
    /// Dispersion coefficient of the `1 - alpha/2` quantile model.
    pub upper: f64,
    /// The dispersion feature was collinear with the intercept in this
    /// window, so its coefficient carries no information.
    pub degenerate: bool,
}

/// Dispersion-coefficient trace of HQR / HQR-W across rolling windows, one row
/// per (window, alpha). `cfg.alpha` is ignored in favour of `levels`.
pub fn coefficient_trace(
    kind: ModelKind,
    panel: &ForecastPanel,
    cfg: &RollingConfig,
    levels: &[f64],
) -> Result<Vec<CoefficientTraceRow>> {
    let m = panel.n_forecasters();
    let Some(std_idx) = kind.std_coefficient(m) else {
        return Err(Error::UnsupportedDiagnostic);
    };
    for &a in levels {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidLevel(a));
        }
    }
    let betas: Vec<f64> = levels
        .iter()
        .flat_map(|&a| [a / 2.0, 1.0 - a / 2.0])
        .collect();
    let fits = rolling_fits(kind, panel, cfg, &betas)?;
    let std_feature = std_idx - 1;
    let mut rows = Vec::with_capacity(fits.len() * levels.len());
    for (window, w) in fits.iter().enumerate() {
        for (k, &alpha) in levels.iter().enumerate() {
            let (lo, lo_info) = &w.fits[2 * k];
            let (hi, hi_info) = &w.fits[2 * k + 1];
            rows.push(CoefficientTraceRow {
                window,
                t: w.start,
                alpha,
                lower: lo.coefficients[std_idx],
                upper: hi.coefficients[std_idx],
                degenerate: lo_info.dropped_features.contains(&std_feature)
                    || hi_info.dropped_features.contains(&std_feature),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};

    fn panel(y: Vec<f64>, rows: Vec<Vec<f64>>) -> ForecastPanel {
        let base = NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let ts = (0..y.len())
            .map(|h| base + Duration::hours(h as i64))
            .collect();
        ForecastPanel::new(ts, y, rows, None).unwrap()
    }

    #[test]
    fn full_window_emits_one_interval_on_six_rows() {
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        let rows = y.iter().map(|v| vec![v + 0.5]).collect();
        let p = panel(y, rows);
        let s = rolling_intervals(ModelKind::Qra, &p, &RollingConfig::new(5, 0.2)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.records[0].t, 5);
    }

    #[test]
    fn insufficient_data_names_first_index() {
        let p = panel(vec![1.0; 4], vec![vec![1.0]; 4]);
        match rolling_intervals(ModelKind::Qra, &p, &RollingConfig::new(5, 0.2)) {
            Err(Error::InsufficientData {
                first_predictable, ..
            }) => assert_eq!(first_predictable, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_target_gives_zero_length() {
        let n = 30;
        let rows: Vec<Vec<f64>> = (0..n).map(|t| vec![t as f64; 3]).collect();
        let p = panel(vec![50.0; n], rows);
        for kind in ModelKind::ALL {
            let s = rolling_intervals(kind, &p, &RollingConfig::new(10, 0.2)).unwrap();
            assert_eq!(s.len(), n - 10);
            for r in &s.records {
                assert!(r.interval.length().abs() < 1e-8, "{kind}: {:?}", r.interval);
            }
        }
    }

    #[test]
    fn truncated_start_and_daily_refits() {
        let n = 72;
        let y: Vec<f64> = (0..n)
            .map(|t| (t as f64 * 0.3).sin() * 5.0 + 50.0)
            .collect();
        let rows = (0..n)
            .map(|t| vec![y[t] + 1.0, y[t] - 1.0 + (t % 3) as f64])
            .collect();
        let p = panel(y, rows);
        let mut cfg = RollingConfig::new(48, 0.2);
        cfg.refit_every = 24;
        cfg.truncate_at_start = true;
        let s = rolling_intervals(ModelKind::Hqr, &p, &cfg).unwrap();
        assert_eq!(s.records[0].t, 24);
        assert_eq!(s.len(), 48);
    }

    #[test]
    fn trace_cardinality_and_qra_rejection() {
        let n = 40;
        let y: Vec<f64> = (0..n).map(|t| ((t * 7) % 11) as f64).collect();
        let rows = (0..n)
            .map(|t| vec![y[t] + ((t * 3) % 5) as f64, y[t] - ((t * 5) % 3) as f64])
            .collect();
        let p = panel(y, rows);
        let cfg = RollingConfig::new(37, 0.2);
        let rows = coefficient_trace(ModelKind::Hqr, &p, &cfg, &[0.1, 0.2]).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(matches!(
            coefficient_trace(ModelKind::Qra, &p, &cfg, &[0.1]),
            Err(Error::UnsupportedDiagnostic)
        ));
    }

    #[test]
    fn constant_spread_is_flagged_degenerate() {
        let n = 30;
        let y: Vec<f64> = (0..n).map(|t| ((t * 7) % 11) as f64).collect();
        let rows = (0..n).map(|t| vec![y[t] + 1.0, y[t] - 1.0]).collect();
        let p = panel(y, rows);
        let rows =
            coefficient_trace(ModelKind::Hqr, &p, &RollingConfig::new(20, 0.2), &[0.2]).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.degenerate));
    }
}
