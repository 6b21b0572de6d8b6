//! Task-level and step-level evaluation.
//!
//! A task succeeds when its key nodes were covered in order and, for
//! retrieval, the answer clears the F1 threshold or, for operations, the
//! success predicate holds on the final state. Step metrics are collected
//! teacher-forced along the gold path.

mod metrics;
mod policy;
mod success;

pub use metrics::*;
pub use policy::*;
pub use success::*;
