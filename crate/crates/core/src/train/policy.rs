use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::*;
use crate::collect::{Executor, StepContext};
use crate::env::{Env, EnvState, Observation, StructuredAction};
use crate::taskfactory::Task;

/// Linear scorer over hashed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub features: FeatureConfig,
    pub weights: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(features: FeatureConfig) -> Self {
        PolicyParams {
            features,
            weights: vec![0.0; features.dim],
        }
    }

    pub fn score(&self, x: &SparseVec) -> f64 {
        dot(&self.weights, x)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Log-probabilities of each candidate at `temperature`.
    pub fn log_probs(&self, feats: &[SparseVec], temperature: f64) -> Vec<f64> {
        let scores: Vec<f64> = feats.iter().map(|x| self.score(x)).collect();
        log_softmax(&scores, temperature)
    }

    pub fn nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

pub fn log_softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let z: Vec<f64> = scores.iter().map(|s| s / temperature).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Draws a candidate index from the softmax; returns it with its exact
/// log-probability. Consumes exactly one uniform draw.
pub fn sample_index(logp: &[f64], rng: &mut ChaCha8Rng) -> (usize, f64) {
    assert!(!logp.is_empty(), "no candidate actions");
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return (i, *lp);
        }
    }
    let last = logp.len() - 1;
    (last, logp[last])
}

/// Highest-scoring candidate; ties go to the earliest.
pub fn greedy_index(logp: &[f64]) -> usize {
    assert!(!logp.is_empty(), "no candidate actions");
    let mut best = 0;
    for (i, lp) in logp.iter().enumerate() {
        if *lp > logp[best] {
            best = i;
        }
    }
    best
}

/// Features of every candidate under one observation.
pub fn featurize_all(obs: &Observation, cands: &[Candidate], cfg: &FeatureConfig) -> Vec<SparseVec> {
    cands.iter().map(|c| featurize(obs, c, cfg)).collect()
}

/// Samples an action at `temperature`; returns the action and its log-probability.
pub fn sample_action(
    policy: &PolicyParams,
    obs: &Observation,
    cands: &[Candidate],
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> (StructuredAction, f64) {
    let logp = policy.log_probs(&featurize_all(obs, cands, &policy.features), temperature);
    let (i, lp) = sample_index(&logp, rng);
    (cands[i].action.clone(), lp)
}

pub fn greedy_action(policy: &PolicyParams, obs: &Observation, cands: &[Candidate]) -> StructuredAction {
    let logp = policy.log_probs(&featurize_all(obs, cands, &policy.features), 1.0);
    cands[greedy_index(&logp)].action.clone()
}

/// Executor backed by a trained policy.
#[derive(Debug, Clone)]
pub struct Learned {
    pub policy: PolicyParams,
    /// `None` acts greedily.
    pub temperature: Option<f64>,
}

impl Learned {
    pub fn greedy(policy: PolicyParams) -> Self {
        Learned {
            policy,
            temperature: None,
        }
    }

    pub fn choose(&self, env: &Env, state: &EnvState, task: &Task, rng: &mut ChaCha8Rng) -> StructuredAction {
        let cands = enumerate_candidates(env, state, task);
        if cands.is_empty() {
            return StructuredAction::wait();
        }
        let obs = env.observe(state);
        match self.temperature {
            None => greedy_action(&self.policy, &obs, &cands),
            Some(t) => sample_action(&self.policy, &obs, &cands, t, rng).0,
        }
    }
}

impl Executor for Learned {
    fn name(&self) -> String {
        match self.temperature {
            None => "learned(greedy)".into(),
            Some(t) => format!("learned(T={t})"),
        }
    }

    fn act(&self, ctx: &mut StepContext<'_, '_>) -> StructuredAction {
        self.choose(ctx.env, ctx.state, ctx.task, ctx.rng)
    }
}
