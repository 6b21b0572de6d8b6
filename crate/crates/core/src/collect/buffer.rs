use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::episode::Trajectory;
use super::filter::FilteredTrajectory;
use crate::env::StructuredAction;
use crate::error::{Error, Result};
use crate::hash::hex64;

/// One `(s_t, a_t, R_t, s_{t+1})` tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub task_id: String,
    pub episode_seed: u64,
    pub step: usize,
    pub state: String,
    pub action: StructuredAction,
    pub reward: f64,
    pub next_state: String,
}

/// Flattens accepted trajectories, ordered by (task_id, seed, step).
pub fn build_replay_buffer(filtered: &[FilteredTrajectory]) -> Result<Vec<ReplayRecord>> {
    if let Some(bad) = filtered.iter().find(|f| !f.verdict.accepted) {
        return Err(Error::Precondition(format!(
            "trajectory for `{}` (seed {}) was not accepted by filtering",
            bad.trajectory.task_id, bad.trajectory.episode_seed
        )));
    }
    let mut trajs: Vec<&Trajectory> = filtered.iter().map(|f| &f.trajectory).collect();
    trajs.sort_by(|a, b| (&a.task_id, a.episode_seed).cmp(&(&b.task_id, b.episode_seed)));
    let mut out = Vec::new();
    for t in trajs {
        for (i, s) in t.steps.iter().enumerate() {
            let next = t.steps.get(i + 1).map_or(t.final_hash, |n| n.pre_hash);
            out.push(ReplayRecord {
                task_id: t.task_id.clone(),
                episode_seed: t.episode_seed,
                step: i,
                state: hex64(s.pre_hash.combined()),
                action: s.action.clone(),
                reward: s.reward.r_total,
                next_state: hex64(next.combined()),
            });
        }
    }
    Ok(out)
}

/// Action mix and first-order transitions over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub trajectories: usize,
    pub total_actions: usize,
    pub action_distribution: BTreeMap<String, f64>,
    /// from kind → to kind → count.
    pub transition_counts: BTreeMap<String, BTreeMap<String, u64>>,
    /// Set when there was nothing to count.
    pub empty: bool,
}

impl DatasetStats {
    pub fn transition_total(&self) -> u64 {
        self.transition_counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn transition(&self, from: &str, to: &str) -> u64 {
        self.transition_counts
            .get(from)
            .and_then(|m| m.get(to))
            .copied()
            .unwrap_or(0)
    }

    pub fn fraction(&self, kind: &str) -> f64 {
        self.action_distribution.get(kind).copied().unwrap_or(0.0)
    }
}

pub fn compute_stats(trajectories: &[Trajectory]) -> DatasetStats {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut stats = DatasetStats {
        trajectories: trajectories.len(),
        ..Default::default()
    };
    for t in trajectories {
        let kinds: Vec<&str> = t.steps.iter().map(|s| s.action.act.as_str()).collect();
        for k in &kinds {
            *counts.entry(k.to_string()).or_default() += 1;
        }
        for w in kinds.windows(2) {
            *stats
                .transition_counts
                .entry(w[0].to_string())
                .or_default()
                .entry(w[1].to_string())
                .or_default() += 1;
        }
    }
    let total: u64 = counts.values().sum();
    stats.total_actions = total as usize;
    stats.empty = total == 0;
    if total > 0 {
        stats.action_distribution = counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect();
    }
    stats
}

/// Distribution column followed by a from × to transition table.
pub fn render_stats(stats: &DatasetStats) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "trajectories {}  actions {}",
        stats.trajectories, stats.total_actions
    );
    if stats.empty {
        let _ = writeln!(s, "(no actions)");
        return s;
    }
    let mut kinds: Vec<(&String, &f64)> = stats.action_distribution.iter().collect();
    kinds.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
    let _ = writeln!(s, "\n{:<18} {:>8}", "action", "share");
    for (k, f) in &kinds {
        let _ = writeln!(s, "{k:<18} {:>7.2}%", 100.0 * **f);
    }
    let names: Vec<&str> = kinds.iter().map(|(k, _)| k.as_str()).collect();
    let _ = write!(s, "\n{:<18}", "from \\ to");
    for n in &names {
        let _ = write!(s, " {n:>16}");
    }
    s.push('\n');
    for from in &names {
        let _ = write!(s, "{from:<18}");
        for to in &names {
            let _ = write!(s, " {:>16}", stats.transition(from, to));
        }
        s.push('\n');
    }
    s
}
