use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::task::Task;
use super::validate::validate_task;
use crate::collect::{filter_trajectory, run_episode, Executor, TerminalReason};
use crate::rewards::RewardConfig;
use crate::sitegen::SiteBundle;

/// Gold paths longer than this count towards `complexity_pct`.
pub const COMPLEX_LEN: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    /// Fraction of tasks the executor completes and the filter accepts.
    pub executability: f64,
    /// Fraction passing the static validators (schema, visibility, answerability).
    pub validity: f64,
    /// Distinct word trigrams over all trigrams of the goal texts.
    pub diversity: f64,
    pub complexity_pct: f64,
    pub tasks: usize,
    /// Set when there were no tasks to measure.
    pub empty: bool,
}

fn trigrams(goal: &str) -> Vec<String> {
    let words: Vec<String> = goal.split_whitespace().map(|w| w.to_lowercase()).collect();
    if words.len() < 3 {
        return if words.is_empty() {
            Vec::new()
        } else {
            vec![words.join(" ")]
        };
    }
    words.windows(3).map(|w| w.join(" ")).collect()
}

/// Distinct-trigram ratio over the goals; 0 when there are none.
pub fn goal_diversity<S: AsRef<str>>(goals: &[S]) -> f64 {
    let all: Vec<String> = goals.iter().flat_map(|g| trigrams(g.as_ref())).collect();
    if all.is_empty() {
        return 0.0;
    }
    let distinct: BTreeSet<&String> = all.iter().collect();
    distinct.len() as f64 / all.len() as f64
}

pub fn complexity_pct(tasks: &[Task]) -> f64 {
    if tasks.is_empty() {
        return 0.0;
    }
    tasks.iter().filter(|t| t.gold_path.len() > COMPLEX_LEN).count() as f64 / tasks.len() as f64
}

/// Runs `executor` once per task (seed 0, budget twice the gold length plus
/// slack) and scores the set.
pub fn measure_quality(tasks: &[Task], bundle: &SiteBundle, executor: &dyn Executor) -> QualityMetrics {
    if tasks.is_empty() {
        return QualityMetrics {
            empty: true,
            ..Default::default()
        };
    }
    let cfg = RewardConfig::default();
    let n = tasks.len() as f64;
    let mut executable = 0usize;
    let mut valid = 0usize;
    for task in tasks {
        if validate_task(task, bundle).static_ok() {
            valid += 1;
        }
        let budget = 2 * task.gold_path.len() + 2;
        let ok = run_episode(bundle, task, executor, budget, 0, &cfg).is_ok_and(|traj| {
            traj.terminal_reason != TerminalReason::BudgetExhausted
                && filter_trajectory(&traj, bundle, task, &cfg).is_ok_and(|v| v.accepted)
        });
        if ok {
            executable += 1;
        }
    }
    let goals: Vec<&str> = tasks.iter().map(|t| t.goal.as_str()).collect();
    QualityMetrics {
        executability: executable as f64 / n,
        validity: valid as f64 / n,
        diversity: goal_diversity(&goals),
        complexity_pct: complexity_pct(tasks),
        tasks: tasks.len(),
        empty: false,
    }
}
