use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::executor::{Executor, StepContext};
use crate::env::{ActionKind, Env, EnvState, ReplayHash, StructuredAction};
use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::rewards::{parse_response, step_reward, GroundTruthStep, RewardBreakdown, RewardConfig, Rule};
use crate::sitegen::SiteBundle;
use crate::taskfactory::{covers_in_order, progress, step_action, Task, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Answered,
    GoalMet,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    /// State digest before the action; its viewport part is the observation digest.
    pub pre_hash: ReplayHash,
    pub action: StructuredAction,
    pub reward: RewardBreakdown,
    #[serde(default)]
    pub key_nodes: Vec<String>,
}

/// One recorded episode. Field order is the `trajectories.jsonl` key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub episode_seed: u64,
    pub site_version: u64,
    pub terminal_reason: TerminalReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitted_answer: Option<String>,
    pub steps: Vec<TrajectoryStep>,
    /// Digest of the state after the last step.
    pub final_hash: ReplayHash,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn key_nodes_hit(&self) -> Vec<String> {
        self.steps.iter().flat_map(|s| s.key_nodes.iter().cloned()).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.r_total).sum()
    }
}

/// Gold steps keyed by the (page, key-node progress) they start from.
#[derive(Debug, Clone)]
pub struct GoldAlignment {
    anchors: Vec<(String, usize)>,
    truths: Vec<GroundTruthStep>,
}

impl GoldAlignment {
    /// Replays the gold path from `seed`; a path that breaks is truncated there.
    pub fn new(env: &Env, task: &Task, seed: u64) -> Self {
        let mut anchors = Vec::new();
        let mut truths = Vec::new();
        let Ok((mut state, _)) = env.reset(task, seed) else {
            return GoldAlignment { anchors, truths };
        };
        for step in &task.gold_path {
            let Some(action) = step_action(env, &state, step) else {
                break;
            };
            let text = step.text.as_deref().unwrap_or("");
            let gt = match step.action {
                ActionKind::Click | ActionKind::DoubleClick => {
                    let Some((_, bbox)) = env
                        .visible(&state)
                        .into_iter()
                        .find(|(e, _)| e.element_id == step.element_id)
                    else {
                        break;
                    };
                    GroundTruthStep {
                        gt_type: step.action,
                        ..GroundTruthStep::click(bbox)
                    }
                }
                ActionKind::Type | ActionKind::Keypress | ActionKind::Scroll => {
                    GroundTruthStep::text(step.action, text)
                }
                ActionKind::GetFinalAnswer => GroundTruthStep::answers(&task.expected_answers),
                kind => GroundTruthStep::of_type(kind),
            };
            anchors.push((
                state.current_page.clone(),
                progress(&state.key_nodes_hit, &task.key_nodes),
            ));
            truths.push(gt);
            match env.apply(&state, &action) {
                Ok((next, _)) => state = next,
                Err(_) => break,
            }
        }
        GoldAlignment { anchors, truths }
    }

    /// First gold step after `after` that starts from this page and progress.
    pub fn align(&self, state: &EnvState, task: &Task, after: Option<usize>) -> Option<usize> {
        let p = progress(&state.key_nodes_hit, &task.key_nodes);
        let start = after.map_or(0, |a| a + 1);
        (start..self.anchors.len()).find(|&j| self.anchors[j].0 == state.current_page && self.anchors[j].1 == p)
    }

    pub fn truth(&self, j: usize) -> &GroundTruthStep {
        &self.truths[j]
    }

    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }
}

/// Operation goal reached: predicate holds and key nodes were hit in order.
pub fn goal_met(task: &Task, state: &EnvState, bundle: &SiteBundle) -> bool {
    task.task_type == TaskType::Operation
        && covers_in_order(&state.key_nodes_hit, &task.key_nodes)
        && task
            .success_predicate
            .as_ref()
            .is_some_and(|p| p.holds(state, &bundle.data_snapshot))
}

/// Applies an action; invalid actions leave the state unchanged so that
/// recording and replay agree.
pub(crate) fn apply_lenient(env: &Env, state: &EnvState, action: &StructuredAction) -> Result<(EnvState, Vec<String>)> {
    match env.apply(state, action) {
        Ok((next, ev)) => Ok((next, ev.key_nodes_newly_hit)),
        Err(Error::InvalidAction(_)) => {
            let mut next = state.clone();
            next.step_count += 1;
            Ok((next, Vec::new()))
        }
        Err(e) => Err(e),
    }
}

/// Runs one episode and also returns the final simulator state.
pub fn play_episode(
    bundle: &SiteBundle,
    task: &Task,
    executor: &dyn Executor,
    budget: usize,
    seed: u64,
    cfg: &RewardConfig,
) -> Result<(Trajectory, EnvState)> {
    drive_episode(bundle, task, budget, seed, cfg, |ctx| executor.act(ctx))
}

/// Episode loop with the action choice supplied as a closure, for callers
/// that need to record more than the action.
pub fn drive_episode<F>(
    bundle: &SiteBundle,
    task: &Task,
    budget: usize,
    seed: u64,
    cfg: &RewardConfig,
    mut act: F,
) -> Result<(Trajectory, EnvState)>
where
    F: FnMut(&mut StepContext<'_, '_>) -> StructuredAction,
{
    if budget == 0 {
        return Err(Error::Precondition("episode budget must be at least 1".into()));
    }
    let env = Env::new(bundle);
    let (mut state, mut obs) = env.reset(task, seed)?;
    let alignment = GoldAlignment::new(&env, task, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "executor"));
    let mut history: Vec<StructuredAction> = Vec::new();
    let mut steps = Vec::new();
    let mut last_aligned = None;
    let mut reason = TerminalReason::BudgetExhausted;

    while steps.len() < budget {
        let action = {
            let mut ctx = StepContext {
                env: &env,
                state: &state,
                observation: &obs,
                task,
                history: &history,
                rng: &mut rng,
            };
            act(&mut ctx)
        };
        let pre_hash = env.state_hash(&state);
        let parsed = parse_response(&action.to_wire(""));
        let reward = match alignment.align(&state, task, last_aligned) {
            Some(j) => {
                last_aligned = Some(j);
                step_reward(&parsed, alignment.truth(j), cfg)
            }
            None => RewardBreakdown::compose(crate::rewards::format_reward(&parsed), 0, Rule::TypeMismatch, cfg),
        };
        let (next, key_nodes) = apply_lenient(&env, &state, &action)?;
        state = next;
        obs = env.observe(&state);
        history.push(action.clone());
        steps.push(TrajectoryStep {
            pre_hash,
            action,
            reward,
            key_nodes,
        });
        if state.terminal {
            reason = TerminalReason::Answered;
            break;
        }
        if goal_met(task, &state, bundle) {
            reason = TerminalReason::GoalMet;
            break;
        }
    }
    let traj = Trajectory {
        task_id: task.id.clone(),
        episode_seed: seed,
        site_version: bundle.version,
        terminal_reason: reason,
        emitted_answer: state.emitted_answer.clone(),
        steps,
        final_hash: env.state_hash(&state),
    };
    Ok((traj, state))
}

/// Runs one episode of at most `budget` steps.
pub fn run_episode(
    bundle: &SiteBundle,
    task: &Task,
    executor: &dyn Executor,
    budget: usize,
    seed: u64,
    cfg: &RewardConfig,
) -> Result<Trajectory> {
    play_episode(bundle, task, executor, budget, seed, cfg).map(|(t, _)| t)
}

/// Runs every (task, seed) pair on `jobs` worker threads. The output order is
/// tasks-major, seeds-minor regardless of scheduling.
pub fn collect_trajectories(
    bundle: &SiteBundle,
    tasks: &[Task],
    executor: &dyn Executor,
    budget: usize,
    seeds: &[u64],
    jobs: usize,
    cfg: &RewardConfig,
) -> Result<Vec<Trajectory>> {
    let work: Vec<(&Task, u64)> = tasks.iter().flat_map(|t| seeds.iter().map(move |s| (t, *s))).collect();
    let jobs = jobs.clamp(1, work.len().max(1));
    let chunk = work.len().div_ceil(jobs).max(1);
    let results: Vec<Result<Vec<Trajectory>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = work
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|(t, s)| run_episode(bundle, t, executor, budget, *s, cfg))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("collector thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(work.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
