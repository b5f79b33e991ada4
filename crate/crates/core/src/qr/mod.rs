//! Linear quantile regression by exact pinball-loss minimization, the
//! ensemble feature maps (QRA, HQR, HQR-W) and the rolling-window driver.

mod features;
mod rolling;
mod simplex;

pub use features::{build_features, ModelKind};
pub use rolling::{coefficient_trace, rolling_intervals, CoefficientTraceRow, RollingConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_level(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(beta))
    }
}

/// Pinball (check) loss of predicting `yhat` for the realized `y` at level `beta`.
pub fn pinball_loss(beta: f64, y: f64, yhat: f64) -> Result<f64> {
    check_level(beta)?;
    Ok(check_loss(beta, y - yhat))
}

#[inline]
pub(crate) fn check_loss(beta: f64, resid: f64) -> f64 {
    if resid >= 0.0 {
        beta * resid
    } else {
        (beta - 1.0) * resid
    }
}

/// A fitted linear quantile model: `coefficients[0]` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub beta: f64,
    pub coefficients: Vec<f64>,
}

impl QuantileModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Summed pinball loss over a sample.
    pub fn objective(&self, features: &[Vec<f64>], y: &[f64]) -> f64 {
        features
            .iter()
            .zip(y)
            .map(|(x, &t)| check_loss(self.beta, t - self.predict_unchecked(x)))
            .sum()
    }
}

/// Solver bookkeeping attached to a fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitInfo {
    /// Rows interpolated by the optimal vertex.
    pub basis: Vec<usize>,
    /// Feature indices (0-based, intercept excluded) dropped as linearly
    /// dependent on the intercept and earlier features; their coefficient is 0.
    pub dropped_features: Vec<usize>,
    pub iterations: usize,
}

/// Fits `q_β(y | x) = λ₀ + λᵀx` by minimizing the summed pinball loss exactly.
pub fn fit_quantile(beta: f64, features: &[Vec<f64>], y: &[f64]) -> Result<QuantileModel> {
    fit_quantile_with_info(beta, features, y, &[]).map(|(m, _)| m)
}

/// As [`fit_quantile`], starting the vertex search from `warm_basis` rows
/// where possible.
pub fn fit_quantile_with_info(
    beta: f64,
    features: &[Vec<f64>],
    y: &[f64],
    warm_basis: &[usize],
) -> Result<(QuantileModel, FitInfo)> {
    check_level(beta)?;
    if features.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: features.len(),
        });
    }
    let n = y.len();
    let m = features.first().map_or(0, Vec::len);
    let p = m + 1;
    if n < p {
        return Err(Error::InsufficientHistory {
            required: p,
            available: n,
        });
    }
    let mut full = Vec::with_capacity(n * p);
    for row in features {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("features", "non-finite feature value"));
        }
        full.push(1.0);
        full.extend_from_slice(row);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("y", "non-finite target"));
    }

    let keep = simplex::independent_columns(&full, n, p);
    let q = keep.len();
    let reduced: Vec<f64> = if q == p {
        full
    } else {
        (0..n)
            .flat_map(|i| keep.iter().map(move |&j| (i, j)))
            .map(|(i, j)| full[i * p + j])
            .collect()
    };
    let design = simplex::Design {
        data: &reduced,
        n,
        q,
    };
    let sol = simplex::solve(&design, y, beta, warm_basis)?;

    let mut coefficients = vec![0.0; p];
    for (c, &j) in sol.coef.iter().zip(&keep) {
        coefficients[j] = *c;
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::SolverFailure {
            iterations: sol.iterations,
            objective: f64::NAN,
        });
    }
    let dropped_features = (1..p)
        .filter(|j| !keep.contains(j))
        .map(|j| j - 1)
        .collect();
    Ok((
        QuantileModel { beta, coefficients },
        FitInfo {
            basis: sol.basis,
            dropped_features,
            iterations: sol.iterations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinball_examples() {
        assert!((pinball_loss(0.9, 10.0, 8.0).unwrap() - 1.8).abs() < 1e-12);
        assert_eq!(pinball_loss(0.5, 2.0, 2.0).unwrap(), 0.0);
        assert!((pinball_loss(0.1, 0.0, 4.0).unwrap() - 3.6).abs() < 1e-12);
        assert!(matches!(
            pinball_loss(1.0, 0.0, 1.0),
            Err(Error::InvalidLevel(_))
        ));
        assert!(matches!(
            pinball_loss(0.0, 0.0, 1.0),
            Err(Error::InvalidLevel(_))
        ));
    }

    #[test]
    fn predict_examples() {
        let m = |c: Vec<f64>| QuantileModel {
            beta: 0.5,
            coefficients: c,
        };
        assert_eq!(m(vec![1.0, 2.0]).predict(&[3.0]).unwrap(), 7.0);
        assert_eq!(m(vec![0.0, 1.0, 0.0]).predict(&[5.0, 99.0]).unwrap(), 5.0);
        assert_eq!(m(vec![-1.0, 0.5, 2.0]).predict(&[4.0, 1.0]).unwrap(), 3.0);
        assert!(matches!(
            m(vec![1.0, 2.0]).predict(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn intercept_only_median() {
        let x = vec![vec![]; 3];
        let m = fit_quantile(0.5, &x, &[1.0, 2.0, 9.0]).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn intercept_only_upper_quantile() {
        let x = vec![vec![]; 5];
        let m = fit_quantile(0.8, &x, &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_fit_recovers_identity() {
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 1.7).sin() * 10.0).collect();
        let x: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
        let m = fit_quantile(0.5, &x, &y).unwrap();
        assert!(m.coefficients[0].abs() < 1e-8);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-8);
        assert!(m.objective(&x, &y) < 1e-8);
    }

    #[test]
    fn constant_column_is_dropped() {
        let y = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.5]).collect();
        let (m, info) = fit_quantile_with_info(0.5, &x, &y, &[]).unwrap();
        assert_eq!(info.dropped_features, vec![1]);
        assert_eq!(m.coefficients[2], 0.0);
    }
}
