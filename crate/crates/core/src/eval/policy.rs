use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::*;
use super::success::*;
use crate::collect::{play_episode, Executor, GoldAlignment, StepContext};
use crate::env::{Env, StructuredAction};
use crate::error::Result;
use crate::hash::derive_seed;
use crate::rewards::{best_f1, RewardConfig};
use crate::sitegen::SiteBundle;
use crate::taskfactory::{progress, step_action, Task, TaskType};
use crate::train::{Learned, PolicyParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task_id: String,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailReason>,
    pub steps_used: usize,
    pub gold_len: usize,
    /// Fraction of the task's key nodes covered in order.
    pub key_node_coverage: f64,
    /// gold_len / max(gold_len, steps_used).
    pub efficiency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub executor: String,
    pub tcr: f64,
    /// Mean efficiency over successful tasks; `None` without successes.
    pub step_efficiency: Option<f64>,
    pub type_acc: f64,
    pub grounding_acc: Option<f64>,
    pub step_success_rate: f64,
    /// Mean best answer F1 over retrieval tasks; `None` without any.
    pub retrieval_f1: Option<f64>,
    pub steps: StepMetrics,
    pub per_task: Vec<TaskEval>,
    /// Set when the task list was empty.
    pub empty: bool,
}

pub fn efficiency(gold_len: usize, steps_used: usize) -> f64 {
    if gold_len == 0 {
        return if steps_used == 0 { 1.0 } else { 0.0 };
    }
    gold_len as f64 / gold_len.max(steps_used) as f64
}

/// Step pairs collected along the gold path: at each gold state the
/// executor predicts with the gold prefix as its history.
pub fn teacher_forced_pairs(
    executor: &dyn Executor,
    bundle: &SiteBundle,
    task: &Task,
    seed: u64,
) -> Result<Vec<StepPair>> {
    let env = Env::new(bundle);
    let (mut state, mut obs) = env.reset(task, seed)?;
    let alignment = GoldAlignment::new(&env, task, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "executor"));
    let mut history: Vec<StructuredAction> = Vec::new();
    let mut pairs = Vec::new();
    for (j, step) in task.gold_path.iter().enumerate().take(alignment.len()) {
        let predicted = executor.act(&mut StepContext {
            env: &env,
            state: &state,
            observation: &obs,
            task,
            history: &history,
            rng: &mut rng,
        });
        pairs.push(StepPair {
            predicted,
            gold: alignment.truth(j).clone(),
        });
        let Some(gold) = step_action(&env, &state, step) else {
            break;
        };
        state = env.apply(&state, &gold)?.0;
        obs = env.observe(&state);
        history.push(gold);
    }
    Ok(pairs)
}

/// Runs every task once under `executor` and aggregates task- and
/// step-level metrics. Pass a greedy executor for deterministic numbers.
pub fn eval_policy(
    executor: &dyn Executor,
    bundle: &SiteBundle,
    tasks: &[Task],
    budget: usize,
    seed: u64,
) -> Result<EvalResult> {
    let cfg = RewardConfig::default();
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut pairs = Vec::new();
    for task in tasks {
        let s = derive_seed(seed, &format!("eval/{}", task.id));
        let (traj, state) = play_episode(bundle, task, executor, budget, s, &cfg)?;
        let verdict = task_success(&traj, task, &state, &bundle.data_snapshot, &cfg);
        let hit = traj.key_nodes_hit();
        let coverage = if task.key_nodes.is_empty() {
            1.0
        } else {
            progress(&hit, &task.key_nodes) as f64 / task.key_nodes.len() as f64
        };
        let answer_f1 = (task.task_type == TaskType::Retrieval)
            .then(|| best_f1(traj.emitted_answer.as_deref().unwrap_or(""), &task.expected_answers));
        per_task.push(TaskEval {
            task_id: task.id.clone(),
            success: verdict.success,
            reason: verdict.reason,
            steps_used: traj.len(),
            gold_len: task.gold_path.len(),
            key_node_coverage: coverage,
            efficiency: efficiency(task.gold_path.len(), traj.len()),
            answer_f1,
        });
        pairs.extend(teacher_forced_pairs(executor, bundle, task, s)?);
    }
    let steps = step_metrics(&pairs, &cfg);
    let n = per_task.len();
    let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let successes: Vec<f64> = per_task.iter().filter(|t| t.success).map(|t| t.efficiency).collect();
    Ok(EvalResult {
        executor: executor.name(),
        tcr: if n == 0 {
            0.0
        } else {
            per_task.iter().filter(|t| t.success).count() as f64 / n as f64
        },
        step_efficiency: mean(successes),
        type_acc: steps.type_acc,
        grounding_acc: steps.gr,
        step_success_rate: steps.sr,
        retrieval_f1: mean(per_task.iter().filter_map(|t| t.answer_f1).collect()),
        steps,
        per_task,
        empty: n == 0,
    })
}

/// [`eval_policy`] with the greedy policy.
pub fn eval_params(
    policy: &PolicyParams,
    bundle: &SiteBundle,
    tasks: &[Task],
    budget: usize,
    seed: u64,
) -> Result<EvalResult> {
    eval_policy(&Learned::greedy(policy.clone()), bundle, tasks, budget, seed)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "—".into(), |x| format!("{x:.4}"))
}

/// Aggregate block followed by one row per task.
pub fn render_report(r: &EvalResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "executor          {}", r.executor);
    let _ = writeln!(s, "tasks             {}", r.per_task.len());
    let _ = writeln!(s, "tcr               {:.4}", r.tcr);
    let _ = writeln!(s, "step_efficiency   {}", opt(r.step_efficiency));
    let _ = writeln!(s, "type_acc          {:.4}", r.type_acc);
    let _ = writeln!(s, "grounding_acc     {}", opt(r.grounding_acc));
    let _ = writeln!(s, "step_success_rate {:.4}", r.step_success_rate);
    let _ = writeln!(s, "retrieval_f1      {}", opt(r.retrieval_f1));
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<56} {:>7} {:>5} {:>4} {:>8}  reason",
        "task", "success", "steps", "gold", "coverage"
    );
    for t in &r.per_task {
        let _ = writeln!(
            s,
            "{:<56} {:>7} {:>5} {:>4} {:>8.3}  {}",
            t.task_id,
            if t.success { "yes" } else { "no" },
            t.steps_used,
            t.gold_len,
            t.key_node_coverage,
            t.reason.map_or_else(String::new, |x| x.to_string()),
        );
    }
    s
}
