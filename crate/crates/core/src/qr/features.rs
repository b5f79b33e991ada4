use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::series::ForecastPanel;

/// Which regressors a quantile model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Quantile Regression Averaging: every forecast as a regressor.
    #[serde(rename = "QRA")]
    Qra,
    /// Ensemble mean and ensemble standard deviation.
    #[serde(rename = "HQR")]
    Hqr,
    /// Every forecast plus the ensemble standard deviation.
    #[serde(rename = "HQR-W")]
    HqrW,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Qra, ModelKind::Hqr, ModelKind::HqrW];

    pub fn n_features(self, n_forecasters: usize) -> usize {
        match self {
            ModelKind::Qra => n_forecasters,
            ModelKind::Hqr => 2,
            ModelKind::HqrW => n_forecasters + 1,
        }
    }

    /// Position of the dispersion coefficient in the coefficient vector
    /// (intercept at 0), if the model has one.
    pub fn std_coefficient(self, n_forecasters: usize) -> Option<usize> {
        match self {
            ModelKind::Qra => None,
            ModelKind::Hqr => Some(2),
            ModelKind::HqrW => Some(n_forecasters + 1),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Qra => "QRA",
            ModelKind::Hqr => "HQR",
            ModelKind::HqrW => "HQR-W",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "QRA" => Ok(ModelKind::Qra),
            "HQR" => Ok(ModelKind::Hqr),
            "HQR-W" | "HQRW" => Ok(ModelKind::HqrW),
            _ => Err(Error::param("model", format!("unknown model kind `{s}`"))),
        }
    }
}

pub fn build_features(kind: ModelKind, panel: &ForecastPanel, t: usize) -> Vec<f64> {
    let row = panel.row(t);
    match kind {
        ModelKind::Qra => row.to_vec(),
        ModelKind::Hqr => vec![panel.mean_forecast(t), panel.forecast_std(t)],
        ModelKind::HqrW => {
            let mut v = row.to_vec();
            v.push(panel.forecast_std(t));
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn feature_maps() {
        let ts = vec![NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()];
        let p = ForecastPanel::new(ts, vec![5.0], vec![vec![4.0, 6.0]], None).unwrap();
        assert_eq!(build_features(ModelKind::Hqr, &p, 0), vec![5.0, 1.0]);
        assert_eq!(build_features(ModelKind::Qra, &p, 0), vec![4.0, 6.0]);
        assert_eq!(build_features(ModelKind::HqrW, &p, 0), vec![4.0, 6.0, 1.0]);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("hqr-w".parse::<ModelKind>().unwrap(), ModelKind::HqrW);
        assert_eq!("QRA".parse::<ModelKind>().unwrap(), ModelKind::Qra);
        assert!("lasso".parse::<ModelKind>().is_err());
    }
}
