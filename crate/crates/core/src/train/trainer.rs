use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::*;
use super::grpo::*;
use super::policy::*;
use crate::collect::drive_episode;
use crate::env::StructuredAction;
use crate::error::{Error, Result};
use crate::eval::state_success;
use crate::hash::derive_seed;
use crate::rewards::RewardConfig;
use crate::sitegen::SiteBundle;
use crate::taskfactory::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Rollouts per task (group size).
    pub group_size: usize,
    pub temperature: f64,
    pub clip: f64,
    pub gamma: f64,
    pub kl_coeff: f64,
    pub adv_eps: f64,
    pub learning_rate: f64,
    /// Gradient L2 norm cap; 0 disables.
    pub grad_clip: f64,
    /// Checkpoint every this many episodes; 0 disables.
    pub checkpoint_every: usize,
    /// Tasks sampled per episode; all tasks when 0 or larger than the set.
    pub batch_size: usize,
    /// Episode budget is the gold length plus this slack.
    pub budget_slack: usize,
    /// Rollout worker threads; results do not depend on it.
    pub jobs: usize,
    pub features: FeatureConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 15,
            group_size: 5,
            temperature: 1.0,
            clip: 0.2,
            gamma: 1.0,
            kl_coeff: 0.01,
            adv_eps: 1e-8,
            learning_rate: 4.0,
            grad_clip: 1.0,
            checkpoint_every: 5,
            batch_size: 64,
            budget_slack: 0,
            jobs: 1,
            features: FeatureConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must be in (0, 1)");
        }
        if self.group_size == 0 {
            return bad("group_size must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return bad("grad_clip must be ≥ 0");
        }
        if !(self.kl_coeff >= 0.0 && self.adv_eps > 0.0) {
            return bad("kl_coeff must be ≥ 0 and adv_eps > 0");
        }
        self.features.check()
    }

    pub fn update_config(&self) -> UpdateConfig {
        UpdateConfig {
            temperature: self.temperature,
            clip: self.clip,
            kl_coeff: self.kl_coeff,
            adv_eps: self.adv_eps,
            learning_rate: self.learning_rate,
            grad_clip: self.grad_clip,
        }
    }

    pub fn budget(&self, task: &Task) -> usize {
        task.gold_path.len().max(1) + self.budget_slack
    }
}

/// Samples one episode from `policy`, recording what the update needs.
pub fn rollout(
    policy: &PolicyParams,
    bundle: &SiteBundle,
    task: &Task,
    cfg: &TrainConfig,
    seed: u64,
    reward_cfg: &RewardConfig,
) -> Result<Rollout> {
    let mut samples = Vec::new();
    let (traj, state) = drive_episode(bundle, task, cfg.budget(task), seed, reward_cfg, |ctx| {
        let cands = enumerate_candidates(ctx.env, ctx.state, ctx.task);
        if cands.is_empty() {
            return StructuredAction::wait();
        }
        let feats = featurize_all(ctx.observation, &cands, &policy.features);
        let logp = policy.log_probs(&feats, cfg.temperature);
        let (chosen, _) = sample_index(&logp, ctx.rng);
        let action = cands[chosen].action.clone();
        samples.push(StepSample {
            feats,
            chosen,
            old_logp: logp,
        });
        action
    })?;
    let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward.r_total).collect();
    Ok(Rollout {
        ret: discounted_return(&rewards, cfg.gamma),
        success: state_success(task, &state, &bundle.data_snapshot, reward_cfg),
        steps: samples,
        rewards,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean_return: f64,
    pub tcr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: PolicyParams,
    pub curve: Vec<CurvePoint>,
    pub updates: Vec<UpdateStats>,
    /// (episode, weights) snapshots at the checkpoint interval.
    pub checkpoints: Vec<(usize, PolicyParams)>,
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("episode,mean_return,tcr\n");
    for p in curve {
        let _ = writeln!(s, "{},{:.6},{:.6}", p.episode, p.mean_return, p.tcr);
    }
    s
}

/// GRPO over `tasks`, starting from zero weights.
pub fn train(bundle: &SiteBundle, tasks: &[Task], cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_from(PolicyParams::zeros(cfg.features), bundle, tasks, cfg, seed)
}

pub fn train_from(
    initial: PolicyParams,
    bundle: &SiteBundle,
    tasks: &[Task],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.check()?;
    if initial.features != cfg.features || initial.weights.len() != cfg.features.dim {
        return Err(Error::Config(
            "initial policy was built for another feature space".into(),
        ));
    }
    let reward_cfg = RewardConfig::default();
    let upd = cfg.update_config();
    let mut policy = initial;
    let mut out = TrainOutcome {
        policy: policy.clone(),
        curve: Vec::new(),
        updates: Vec::new(),
        checkpoints: Vec::new(),
    };
    if tasks.is_empty() {
        return Ok(out);
    }
    for e in 1..=cfg.episodes {
        let mut order: Vec<usize> = (0..tasks.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("batch/{e}"))));
        let take = if cfg.batch_size == 0 {
            tasks.len()
        } else {
            cfg.batch_size.min(tasks.len())
        };
        let mut batch: Vec<usize> = order.into_iter().take(take).collect();
        batch.sort_unstable();

        let snapshot = &policy;
        let run_group = |ti: usize| -> Result<RolloutGroup> {
            let task = &tasks[ti];
            let rollouts = (0..cfg.group_size)
                .map(|i| {
                    let s = derive_seed(seed, &format!("rollout/{e}/{}/{i}", task.id));
                    rollout(snapshot, bundle, task, cfg, s, &reward_cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RolloutGroup {
                task_id: task.id.clone(),
                rollouts,
            })
        };
        let chunk = batch.len().div_ceil(cfg.jobs.max(1)).max(1);
        let groups: Vec<RolloutGroup> = if cfg.jobs <= 1 {
            batch.iter().map(|&ti| run_group(ti)).collect::<Result<_>>()?
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = batch
                    .chunks(chunk)
                    .map(|part| scope.spawn(|| part.iter().map(|&ti| run_group(ti)).collect::<Result<Vec<_>>>()))
                    .collect();
                let mut out = Vec::with_capacity(batch.len());
                for h in handles {
                    out.extend(h.join().expect("rollout thread panicked")?);
                }
                Ok::<_, Error>(out)
            })?
        };

        let all: Vec<&Rollout> = groups.iter().flat_map(|g| &g.rollouts).collect();
        let n = all.len() as f64;
        out.curve.push(CurvePoint {
            episode: e,
            mean_return: all.iter().map(|r| r.ret).sum::<f64>() / n,
            tcr: all.iter().filter(|r| r.success).count() as f64 / n,
        });
        let (next, stats) = ppo_update(&policy, &groups, &upd);
        policy = next;
        out.updates.push(stats);
        if cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0 {
            out.checkpoints.push((e, policy.clone()));
        }
    }
    out.policy = policy;
    Ok(out)
}
