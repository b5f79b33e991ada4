//! Run configuration: a flat `key = value` file merged with command-line
//! overrides. Unset keys fall back to per-command defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qr::ModelKind;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Panel CSV (`timestamp,y,f1,…,fM`).
    pub input: Option<PathBuf>,
    /// Use the two-regime synthetic stream instead of `input`.
    pub synthetic: Option<bool>,
    pub model: Option<ModelKind>,
    pub window_days: Option<usize>,
    /// A single miscoverage level; overrides `alphas`.
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    /// Gaussian kernel width of WACI, in length units.
    pub sigma: Option<f64>,
    /// Geometric WACI weights with this decay instead of the Gaussian kernel.
    pub decay: Option<f64>,
    pub grid_step: Option<f64>,
    /// Sliding score window per group; 0 keeps every score.
    pub calibration_size: Option<usize>,
    /// Records per group that only seed the score set.
    pub warmup: Option<usize>,
    pub bootstrap_samples: Option<usize>,
    pub bootstrap_size: Option<usize>,
    pub bootstrap_block: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_runs: Option<usize>,
    pub length: Option<usize>,
    /// Days of the synthetic ensemble panel used when `synthetic` is set for
    /// panel commands.
    pub panel_days: Option<usize>,
    /// Synthetic runs whose step traces are written.
    pub trace_runs: Option<usize>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub sigma_step: Option<f64>,
    pub json: Option<bool>,
    pub paper_style: Option<bool>,
}

macro_rules! merge_fields {
    ($base:ident, $over:ident; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $over.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.display().to_string(),
            line: e
                .span()
                .map_or(0, |s| text[..s.start].matches('\n').count() + 1),
            reason: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Values set in `overrides` win.
    pub fn merge(self, overrides: RunConfig) -> RunConfig {
        let base = self;
        merge_fields!(base, overrides;
            input, synthetic, model, window_days, alpha, alphas, gamma, sigma, decay,
            grid_step, calibration_size, warmup, bootstrap_samples, bootstrap_size,
            bootstrap_block, out, seed, n_runs, length, panel_days, trace_runs, sigma_min, sigma_max,
            sigma_step, json, paper_style,
        )
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Checks that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.input {
            if !p.is_file() {
                return Err(Error::Io {
                    path: p.display().to_string(),
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "input file not found",
                    ),
                });
            }
        }
        Ok(())
    }

    /// `alpha` if set, else `alphas`, else `default`.
    pub fn levels(&self, default: &[f64]) -> Vec<f64> {
        match (self.alpha, &self.alphas) {
            (Some(a), _) => vec![a],
            (None, Some(v)) => v.clone(),
            _ => default.to_vec(),
        }
    }

    pub fn calibration_window(&self, default: Option<usize>) -> Option<usize> {
        match self.calibration_size {
            Some(0) => None,
            Some(c) => Some(c),
            None => default,
        }
    }
}
