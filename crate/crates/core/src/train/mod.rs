//! Group-normalized policy optimization of a linear softmax policy.
//!
//! The action space on each page is enumerable (see [`enumerate_candidates`]),
//! so log-probabilities and the KL term are exact. One call to
//! [`ppo_update`] takes a single gradient step on the clipped surrogate.

mod baseline;
mod checkpoint;
mod features;
mod grpo;
mod policy;
mod trainer;

pub use baseline::random_success_probability;
pub use checkpoint::*;
pub use features::*;
pub use grpo::*;
pub use policy::*;
pub use trainer::*;
