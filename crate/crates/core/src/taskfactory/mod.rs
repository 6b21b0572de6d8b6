//! Task generation: templates, validators, gold paths and quality metrics.
//!
//! Candidates come from data-driven templates bound to the data snapshot.
//! Each candidate gets a shortest gold path from a search over simulator
//! states, then passes four validators (schema, visibility, path feasibility,
//! answerability) before it is emitted.

mod factory;
mod gold;
mod quality;
mod task;
mod template;
mod validate;

pub use factory::*;
pub use gold::{attach_gold_path, dry_run, plan_gold_path, step_action, DryRun, MAX_GOLD_LEN, MAX_STATES};
pub use quality::{complexity_pct, goal_diversity, measure_quality, QualityMetrics, COMPLEX_LEN};
pub use task::*;
pub use template::*;
pub use validate::{can_become_visible, reachable_offsets, validate_task, ValidationVerdict};
