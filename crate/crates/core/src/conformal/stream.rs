//! Per-group online conformalization of an interval stream.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aci::{AciState, StepOutcome};
use super::scores::{cqr_score, ScoreSet};
use super::waci::{LengthGrid, WaciState, WeightScheme};
use crate::error::{Error, Result};
use crate::series::{Interval, IntervalRecord, IntervalStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    None,
    Aci,
    Waci,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::None, Method::Aci, Method::Waci];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::None => "none",
            Method::Aci => "ACI",
            Method::Waci => "WACI",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Method::None),
            "aci" => Ok(Method::Aci),
            "waci" => Ok(Method::Waci),
            _ => Err(Error::param("method", format!("unknown method `{s}`"))),
        }
    }
}

/// Where the WACI length grid comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    Fixed(LengthGrid),
    /// Range of the warmup lengths of each group, widened on both sides by
    /// `margin` times that range.
    FromWarmup {
        step: f64,
        margin: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalParams {
    pub alpha_star: f64,
    pub gamma: f64,
    /// Sliding score window; `None` keeps every score.
    pub calibration_size: Option<usize>,
    pub weights: WeightScheme,
    pub grid: GridSpec,
}

impl ConformalParams {
    pub fn new(alpha_star: f64, gamma: f64) -> Self {
        Self {
            alpha_star,
            gamma,
            calibration_size: None,
            weights: WeightScheme::Gaussian { sigma: 1.0 },
            grid: GridSpec::FromWarmup {
                step: 0.1,
                margin: 0.1,
            },
        }
    }
}

/// Per-step diagnostics of an online conformal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub group: u32,
    pub base_length: f64,
    pub grid_index: usize,
    pub alpha_used: f64,
    pub correction: f64,
    pub err: bool,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ConformalOutput {
    /// Post-warmup records carrying the conformalized interval.
    pub stream: IntervalStream,
    /// Unconformalized interval of every record in `stream`.
    pub base: Vec<Interval>,
    pub trace: Vec<TraceRecord>,
}

enum Machine {
    Aci(AciState),
    Waci(WaciState),
}

impl Machine {
    fn step(&mut self, interval: &Interval, y: f64) -> Result<StepOutcome> {
        match self {
            Machine::Aci(s) => s.step(interval, y),
            Machine::Waci(s) => s.step(interval, y),
        }
    }
}

fn warmup_grid(warm: &[&IntervalRecord], step: f64, margin: f64) -> Result<LengthGrid> {
    let (lo, hi) = warm
        .iter()
        .map(|r| r.interval.length())
        .filter(|l| l.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
            (lo.min(l), hi.max(l))
        });
    if !lo.is_finite() {
        return Err(Error::param(
            "grid",
            "no finite interval during warmup".to_string(),
        ));
    }
    let pad = (margin * (hi - lo)).max(0.5 * step);
    LengthGrid::new((lo - pad).max(0.0), hi + pad, step)
}

type GroupResult = Vec<(usize, IntervalRecord, Interval, TraceRecord)>;

fn run_group(
    records: &[&IntervalRecord],
    positions: &[usize],
    method: Method,
    params: &ConformalParams,
    warmup: usize,
) -> Result<GroupResult> {
    let warm = &records[..warmup];
    let mut scores = ScoreSet::new(params.calibration_size);
    for r in warm {
        scores.push(cqr_score(r.y, &r.interval)?);
    }
    let mut machine = match method {
        Method::None => None,
        Method::Aci => Some(Machine::Aci(AciState::new(
            params.alpha_star,
            params.gamma,
            scores,
        )?)),
        Method::Waci => {
            let grid = match params.grid {
                GridSpec::Fixed(g) => g,
                GridSpec::FromWarmup { step, margin } => warmup_grid(warm, step, margin)?,
            };
            Some(Machine::Waci(WaciState::new(
                grid,
                params.alpha_star,
                params.gamma,
                params.weights,
                scores,
            )?))
        }
    };

    let mut out = Vec::with_capacity(records.len() - warmup);
    for (r, &pos) in records[warmup..].iter().zip(&positions[warmup..]) {
        let outcome = match machine.as_mut() {
            Some(m) => m.step(&r.interval, r.y)?,
            None => StepOutcome {
                conformalized: r.interval,
                alpha_used: params.alpha_star,
                grid_index: 0,
                correction: 0.0,
                err: !r.interval.covers(r.y),
            },
        };
        let trace = TraceRecord {
            t: r.t,
            group: r.group,
            base_length: r.interval.length(),
            grid_index: outcome.grid_index,
            alpha_used: outcome.alpha_used,
            correction: outcome.correction,
            err: outcome.err,
            lower: outcome.conformalized.lower(),
            upper: outcome.conformalized.upper(),
        };
        let rec = IntervalRecord {
            interval: outcome.conformalized,
            ..**r
        };
        out.push((pos, rec, r.interval, trace));
    }
    Ok(out)
}

/// Runs one independent conformal state per group. The first `warmup`
/// records of each group only seed its score set; the rest are conformalized
/// online and returned in their original order.
pub fn run_conformal_stream(
    stream: &IntervalStream,
    method: Method,
    params: &ConformalParams,
    warmup: usize,
) -> Result<ConformalOutput> {
    stream.validate()?;
    let groups = stream.groups();
    let mut members: Vec<(Vec<&IntervalRecord>, Vec<usize>)> =
        vec![Default::default(); groups.len()];
    for (pos, r) in stream.records.iter().enumerate() {
        let g = groups.iter().position(|k| *k == r.group).unwrap();
        members[g].0.push(r);
        members[g].1.push(pos);
    }
    for (g, (recs, _)) in groups.iter().zip(&members) {
        if warmup >= recs.len() {
            return Err(Error::WarmupTooLong {
                group: *g,
                warmup,
                available: recs.len(),
            });
        }
    }

    let per_group: Vec<GroupResult> = members
        .par_iter()
        .map(|(recs, pos)| run_group(recs, pos, method, params, warmup))
        .collect::<Result<_>>()?;
    let mut all: GroupResult = per_group.into_iter().flatten().collect();
    all.sort_by_key(|(pos, ..)| *pos);

    let mut out = ConformalOutput {
        stream: IntervalStream {
            records: Vec::with_capacity(all.len()),
            crossings: stream.crossings,
        },
        base: Vec::with_capacity(all.len()),
        trace: Vec::with_capacity(all.len()),
    };
    for (_, rec, base, trace) in all {
        out.stream.records.push(rec);
        out.base.push(base);
        out.trace.push(trace);
    }
    Ok(out)
}
