//! Trajectory collection, filtering and the replay buffer.
//!
//! An [`Executor`] drives the simulator; every step is scored against the
//! gold step it aligns with (same page, same key-node progress). Filtering
//! re-executes the recorded actions from the recorded seed and compares the
//! hash chain, then checks key-node coverage and, for retrieval, the answer.

mod buffer;
mod episode;
mod executor;
mod filter;

use std::path::Path;

pub use buffer::*;
pub use episode::*;
pub use executor::*;
pub use filter::*;

use crate::error::Result;
use crate::jsonl::{read_jsonl, write_jsonl};

pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const FILTERED_FILE: &str = "filtered.jsonl";
pub const REPLAY_BUFFER_FILE: &str = "replay_buffer.jsonl";
pub const STATS_FILE: &str = "stats.json";

pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    write_jsonl(path, trajs)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    read_jsonl(path)
}
