use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collect::Trajectory;
use crate::env::EnvState;
use crate::rewards::{best_f1, RewardConfig};
use crate::sitegen::DataSnapshot;
use crate::taskfactory::{covers_in_order, Task, TaskType};

/// First clause of the success rule that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    KeyNodeOrder,
    Answer,
    Predicate,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailReason::KeyNodeOrder => "key-node order",
            FailReason::Answer => "answer",
            FailReason::Predicate => "predicate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessVerdict {
    pub success: bool,
    pub reason: Option<FailReason>,
}

impl SuccessVerdict {
    fn fail(r: FailReason) -> Self {
        SuccessVerdict {
            success: false,
            reason: Some(r),
        }
    }
}

/// Success rule over the nodes hit, the emitted answer and the final state.
pub fn judge(
    task: &Task,
    key_nodes_hit: &[String],
    emitted_answer: Option<&str>,
    final_state: &EnvState,
    data: &DataSnapshot,
    cfg: &RewardConfig,
) -> SuccessVerdict {
    if !covers_in_order(key_nodes_hit, &task.key_nodes) {
        return SuccessVerdict::fail(FailReason::KeyNodeOrder);
    }
    let ok = match task.task_type {
        TaskType::Retrieval => {
            if !emitted_answer.is_some_and(|a| best_f1(a, &task.expected_answers) >= cfg.tau) {
                return SuccessVerdict::fail(FailReason::Answer);
            }
            true
        }
        TaskType::Operation => task
            .success_predicate
            .as_ref()
            .is_some_and(|p| p.holds(final_state, data)),
    };
    if ok {
        SuccessVerdict {
            success: true,
            reason: None,
        }
    } else {
        SuccessVerdict::fail(FailReason::Predicate)
    }
}

/// Success from the simulator state alone.
pub fn state_success(task: &Task, state: &EnvState, data: &DataSnapshot, cfg: &RewardConfig) -> bool {
    judge(
        task,
        &state.key_nodes_hit,
        state.emitted_answer.as_deref(),
        state,
        data,
        cfg,
    )
    .success
}

pub fn task_success(
    trajectory: &Trajectory,
    task: &Task,
    final_state: &EnvState,
    data: &DataSnapshot,
    cfg: &RewardConfig,
) -> SuccessVerdict {
    judge(
        task,
        &trajectory.key_nodes_hit(),
        trajectory.emitted_answer.as_deref(),
        final_state,
        data,
        cfg,
    )
}
