use serde::{Deserialize, Serialize};

use super::episode::{apply_lenient, Trajectory};
use crate::env::Env;
use crate::error::{Error, Result};
use crate::rewards::{best_f1, RewardConfig};
use crate::sitegen::SiteBundle;
use crate::taskfactory::{covers_in_order, Task};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub replay_ok: bool,
    pub key_node_coverage_ok: bool,
    /// Vacuously true for operation tasks.
    pub answer_ok: bool,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<String>,
}

/// A trajectory together with its verdict; the unit stored in `filtered.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredTrajectory {
    pub trajectory: Trajectory,
    pub verdict: FilterVerdict,
}

/// Index of the first step whose pre-hash the replay does not reproduce,
/// or `steps.len()` when only the final hash differs.
fn replay_divergence(traj: &Trajectory, bundle: &SiteBundle, task: &Task) -> Result<Option<usize>> {
    let env = Env::new(bundle);
    let Ok((mut state, _)) = env.reset(task, traj.episode_seed) else {
        return Ok(Some(0));
    };
    for (i, step) in traj.steps.iter().enumerate() {
        if env.state_hash(&state) != step.pre_hash || state.terminal {
            return Ok(Some(i));
        }
        state = match apply_lenient(&env, &state, &step.action) {
            Ok((next, _)) => next,
            Err(_) => return Ok(Some(i)),
        };
    }
    Ok((env.state_hash(&state) != traj.final_hash).then_some(traj.steps.len()))
}

/// Re-executes the recorded actions and checks key-node coverage and the answer.
pub fn filter_trajectory(
    traj: &Trajectory,
    bundle: &SiteBundle,
    task: &Task,
    cfg: &RewardConfig,
) -> Result<FilterVerdict> {
    if traj.site_version != bundle.version {
        return Err(Error::VersionMismatch {
            recorded: traj.site_version,
            bundle: bundle.version,
        });
    }
    if traj.task_id != task.id {
        return Err(Error::Precondition(format!(
            "trajectory is for task `{}`, not `{}`",
            traj.task_id, task.id
        )));
    }
    let mut reasons = Vec::new();
    let divergence = replay_divergence(traj, bundle, task)?;
    if let Some(i) = divergence {
        reasons.push(format!("replay diverges at step {i}"));
    }
    let key_node_coverage_ok = covers_in_order(&traj.key_nodes_hit(), &task.key_nodes);
    if !key_node_coverage_ok {
        reasons.push("required key nodes not hit in order".into());
    }
    let answer_ok = if task.is_retrieval() {
        let f1 = traj
            .emitted_answer
            .as_deref()
            .map_or(0.0, |a| best_f1(a, &task.expected_answers));
        if f1 < cfg.tau {
            reasons.push(format!("answer F1 {f1:.3} below {}", cfg.tau));
        }
        f1 >= cfg.tau
    } else {
        true
    };
    let replay_ok = divergence.is_none();
    Ok(FilterVerdict {
        replay_ok,
        key_node_coverage_ok,
        answer_ok,
        accepted: replay_ok && key_node_coverage_ok && answer_ok,
        reasons,
    })
}

/// Filters a batch; trajectories whose task is unknown are an error.
pub fn filter_all(
    trajectories: &[Trajectory],
    bundle: &SiteBundle,
    tasks: &[Task],
    cfg: &RewardConfig,
) -> Result<Vec<FilteredTrajectory>> {
    let by_id: std::collections::HashMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    trajectories
        .iter()
        .map(|traj| {
            let task = by_id
                .get(traj.task_id.as_str())
                .ok_or_else(|| Error::Precondition(format!("no task `{}` for trajectory", traj.task_id)))?;
            Ok(FilteredTrajectory {
                trajectory: traj.clone(),
                verdict: filter_trajectory(traj, bundle, task, cfg)?,
            })
        })
        .collect()
}
