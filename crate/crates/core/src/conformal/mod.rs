//! Conformity scores and the conformalization procedures: split conformal
//! (SCP), CQR, ACI and WACI.

mod aci;
mod scores;
mod split;
mod stream;
mod waci;

pub use aci::{AciState, StepOutcome};
pub use scores::{augmented_quantile, cqr_conformalize, cqr_score, ScoreSet};
pub use split::{ScpState, SplitCqr};
pub use stream::{
    run_conformal_stream, ConformalOutput, ConformalParams, GridSpec, Method, TraceRecord,
};
pub use waci::{LengthGrid, WaciState, WeightScheme};
