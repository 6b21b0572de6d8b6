use super::features::enumerate_candidates;
use crate::collect::goal_met;
use crate::env::{Env, EnvState};
use crate::error::Result;
use crate::eval::state_success;
use crate::rewards::RewardConfig;
use crate::sitegen::SiteBundle;
use crate::taskfactory::Task;

/// Exact success probability of the uniform policy over the candidate set,
/// by enumerating every action sequence up to `budget` steps. Exponential in
/// `budget`; meant for short tasks.
pub fn random_success_probability(bundle: &SiteBundle, task: &Task, budget: usize, seed: u64) -> Result<f64> {
    let env = Env::new(bundle);
    let (state, _) = env.reset(task, seed)?;
    let cfg = RewardConfig::default();
    Ok(go(&env, bundle, task, &state, budget, &cfg))
}

fn go(env: &Env, bundle: &SiteBundle, task: &Task, state: &EnvState, left: usize, cfg: &RewardConfig) -> f64 {
    if left == 0 {
        return 0.0;
    }
    let cands = enumerate_candidates(env, state, task);
    if cands.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for c in &cands {
        let Ok((next, _)) = env.apply(state, &c.action) else {
            continue;
        };
        // same stopping rule as the episode loop
        total += if next.terminal || goal_met(task, &next, bundle) {
            f64::from(u8::from(state_success(task, &next, &bundle.data_snapshot, cfg)))
        } else {
            go(env, bundle, task, &next, left - 1, cfg)
        };
    }
    total / cands.len() as f64
}
