use serde::{Deserialize, Serialize};

use super::features::SparseVec;
use super::policy::PolicyParams;

/// Candidate features and sampling-time log-probabilities at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSample {
    pub feats: Vec<SparseVec>,
    pub chosen: usize,
    /// Log-probabilities of all candidates under the sampling policy.
    pub old_logp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub steps: Vec<StepSample>,
    pub rewards: Vec<f64>,
    /// Σ γ^t R_t.
    pub ret: f64,
    pub success: bool,
}

/// `n` rollouts of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub task_id: String,
    pub rollouts: Vec<Rollout>,
}

impl RolloutGroup {
    pub fn returns(&self) -> Vec<f64> {
        self.rollouts.iter().map(|r| r.ret).collect()
    }
}

pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut g = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += g * r;
        g *= gamma;
    }
    total
}

/// `(R − mean) / (std + eps)` with the population standard deviation.
pub fn group_advantages(returns: &[f64], eps: f64) -> Vec<f64> {
    if returns.is_empty() {
        return Vec::new();
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    returns.iter().map(|r| (r - mean) / (std + eps)).collect()
}

pub fn clip_ratio(ratio: f64, clip: f64) -> f64 {
    ratio.clamp(1.0 - clip, 1.0 + clip)
}

/// Pessimistic per-sample surrogate `min(r·A, clip(r)·A)`.
pub fn clipped_term(ratio: f64, adv: f64, clip: f64) -> f64 {
    (ratio * adv).min(clip_ratio(ratio, clip) * adv)
}

/// Hyperparameters the update needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub temperature: f64,
    pub clip: f64,
    pub kl_coeff: f64,
    pub adv_eps: f64,
    pub learning_rate: f64,
    /// Gradient L2 norm cap; 0 disables.
    pub grad_clip: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean clipped surrogate over steps.
    pub surrogate: f64,
    /// Mean KL(old ‖ new) over steps.
    pub kl: f64,
    pub clip_fraction: f64,
    /// surrogate − kl_coeff · kl, the quantity ascended.
    pub objective: f64,
    pub steps: usize,
    /// L2 norm of the gradient before clipping.
    pub grad_norm: f64,
    /// Set when the gradient or the updated weights were not finite.
    pub rejected: bool,
}

/// Objective value, its gradient in weight space, and diagnostics. Each
/// trajectory's advantage is shared by all of its steps.
pub fn objective(params: &PolicyParams, groups: &[RolloutGroup], cfg: &UpdateConfig) -> (Vec<f64>, UpdateStats) {
    let t = cfg.temperature;
    let mut grad = vec![0.0; params.weights.len()];
    let mut stats = UpdateStats::default();
    let mut clipped = 0usize;
    for g in groups {
        let adv = group_advantages(&g.returns(), cfg.adv_eps);
        for (ro, a) in g.rollouts.iter().zip(adv) {
            for s in &ro.steps {
                stats.steps += 1;
                let new_logp = params.log_probs(&s.feats, t);
                let p_new: Vec<f64> = new_logp.iter().map(|l| l.exp()).collect();
                let p_old: Vec<f64> = s.old_logp.iter().map(|l| l.exp()).collect();
                let ratio = (new_logp[s.chosen] - s.old_logp[s.chosen]).exp();
                let term = clipped_term(ratio, a, cfg.clip);
                stats.surrogate += term;
                let unclipped = ratio * a;
                let is_clipped = term < unclipped;
                if is_clipped {
                    clipped += 1;
                }
                let kl: f64 = p_old
                    .iter()
                    .zip(s.old_logp.iter().zip(&new_logp))
                    .map(|(p, (lo, ln))| p * (lo - ln))
                    .sum();
                stats.kl += kl;

                // d(term)/dθ = A · r · (φ_c − E_new[φ]) / T where unclipped
                if !is_clipped && a != 0.0 {
                    let c = a * ratio / t;
                    for (i, v) in &s.feats[s.chosen] {
                        grad[*i as usize] += c * v;
                    }
                    for (b, x) in s.feats.iter().enumerate() {
                        for (i, v) in x {
                            grad[*i as usize] -= c * p_new[b] * v;
                        }
                    }
                }
                // d(KL)/dθ = (E_new[φ] − E_old[φ]) / T, ascended with a minus sign
                let k = cfg.kl_coeff / t;
                for (b, x) in s.feats.iter().enumerate() {
                    let w = p_new[b] - p_old[b];
                    if w != 0.0 {
                        for (i, v) in x {
                            grad[*i as usize] -= k * w * v;
                        }
                    }
                }
            }
        }
    }
    if stats.steps > 0 {
        let n = stats.steps as f64;
        stats.surrogate /= n;
        stats.kl /= n;
        stats.clip_fraction = clipped as f64 / n;
        for g in &mut grad {
            *g /= n;
        }
    }
    stats.objective = stats.surrogate - cfg.kl_coeff * stats.kl;
    (grad, stats)
}

/// One plain gradient-ascent step on the clipped, KL-penalized surrogate.
pub fn ppo_update(params: &PolicyParams, groups: &[RolloutGroup], cfg: &UpdateConfig) -> (PolicyParams, UpdateStats) {
    ppo_step(params, groups, cfg, |p, grad| {
        let mut next = p.clone();
        for (w, g) in next.weights.iter_mut().zip(grad) {
            *w += cfg.learning_rate * g;
        }
        next
    })
}

fn ppo_step(
    params: &PolicyParams,
    groups: &[RolloutGroup],
    cfg: &UpdateConfig,
    step: impl FnOnce(&PolicyParams, &[f64]) -> PolicyParams,
) -> (PolicyParams, UpdateStats) {
    let (grad, mut stats) = objective(params, groups, cfg);
    if grad.iter().any(|g| !g.is_finite()) {
        stats.rejected = true;
        return (params.clone(), stats);
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    stats.grad_norm = norm;
    let next = if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
        let k = cfg.grad_clip / norm;
        let scaled: Vec<f64> = grad.iter().map(|g| g * k).collect();
        step(params, &scaled)
    } else {
        step(params, &grad)
    };
    if !next.is_finite() {
        stats.rejected = true;
        return (params.clone(), stats);
    }
    (next, stats)
}
