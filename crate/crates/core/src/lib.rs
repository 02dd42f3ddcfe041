//! Validating labelled state transition and message production systems.
//!
//! Machines, their free and constrained compositions, validators, the
//! UMO/MO/ELMO protocol family, evidence of equivocation, equivocation
//! models and Byzantine comparisons, all decided by bounded enumeration.

pub mod byzantine;
pub mod compose;
pub mod countdown;
pub mod equivocation;
pub mod error;
pub mod explore;
pub mod fixtures;
pub mod models;
pub mod table;
pub mod umo;
pub mod vlsm;

pub use error::{Result, VlsmError};
pub use vlsm::{
    apply, is_constrained, Address, Bound, ExploreMode, RecordOf, Trace, TraceOf, TransitionRecord,
    Value, Vlsm, DEFAULT_CAP,
};
