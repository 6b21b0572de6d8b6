//! Random small GRPO instances for gradient checks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use webfactory::train::*;

/// Random small instance: `groups` of rollouts over 3-candidate pages in a 64-dim space.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (PolicyParams, Vec<RolloutGroup>, f64) {
    let features = FeatureConfig {
        dim: 64,
        max_goal_tokens: 4,
    };
    let mut params = PolicyParams::zeros(features);
    let mut old = PolicyParams::zeros(features);
    for i in 0..64 {
        params.weights[i] = rng.gen_range(-0.5..0.5);
        old.weights[i] = params.weights[i] + rng.gen_range(-0.3..0.3);
    }
    let t = rng.gen_range(0.5..2.0);
    let groups = (0..2)
        .map(|g| RolloutGroup {
            task_id: format!("t{g}"),
            rollouts: (0..3)
                .map(|_| {
                    let steps: Vec<StepSample> = (0..rng.gen_range(1..4))
                        .map(|_| {
                            let feats: Vec<Vec<(u32, f64)>> = (0..3)
                                .map(|_| {
                                    let mut idx: Vec<u32> =
                                        (0..rng.gen_range(2..5)).map(|_| rng.gen_range(0..64)).collect();
                                    idx.sort_unstable();
                                    idx.dedup();
                                    idx.into_iter().map(|i| (i, rng.gen_range(0.2..1.5))).collect()
                                })
                                .collect();
                            StepSample {
                                old_logp: old.log_probs(&feats, t),
                                chosen: rng.gen_range(0..3),
                                feats,
                            }
                        })
                        .collect();
                    let ret = rng.gen_range(0.0..3.0);
                    Rollout {
                        rewards: vec![ret],
                        ret,
                        success: false,
                        steps,
                    }
                })
                .collect(),
        })
        .collect();
    (params, groups, t)
}

pub fn near_kink(params: &PolicyParams, groups: &[RolloutGroup], t: f64, clip: f64) -> bool {
    groups.iter().flat_map(|g| &g.rollouts).flat_map(|r| &r.steps).any(|s| {
        let r = (params.log_probs(&s.feats, t)[s.chosen] - s.old_logp[s.chosen]).exp();
        (r - (1.0 - clip)).abs() < 1e-3 || (r - (1.0 + clip)).abs() < 1e-3
    })
}
