use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::collect::{Executor, Noisy, Oracle};
use crate::error::{Error, Result};
use crate::hash::{fnv1a, hex64};
use crate::jsonl::read_text;
use crate::rewards::RewardConfig;
use crate::sitegen::SiteSpec;
use crate::taskfactory::{DifficultyMix, TaskGenConfig, TaskTemplate};
use crate::train::TrainConfig;

/// Which scripted executor produces the collected trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutorChoice {
    Oracle,
    /// Oracle with probability-`p` perturbations.
    Noisy {
        p: f64,
    },
}

impl ExecutorChoice {
    pub fn build(&self) -> Box<dyn Executor> {
        match *self {
            ExecutorChoice::Oracle => Box::new(Oracle),
            ExecutorChoice::Noisy { p } => Box::new(Noisy::new(p)),
        }
    }

    /// Parses `oracle` or `noisy:<p>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "oracle" => Ok(ExecutorChoice::Oracle),
            None if s == "noisy" => Ok(ExecutorChoice::Noisy { p: 0.2 }),
            Some(("noisy", p)) => p
                .parse()
                .map(|p| ExecutorChoice::Noisy { p })
                .map_err(|_| Error::Config(format!("bad noise level `{p}`"))),
            _ => Err(Error::Config(format!("unknown executor `{s}` (oracle | noisy:<p>)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskStageConfig {
    pub count: usize,
    pub difficulty_mix: DifficultyMix,
    pub validators_on: bool,
    /// Built-in templates when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates: Option<Vec<TaskTemplate>>,
}

impl Default for TaskStageConfig {
    fn default() -> Self {
        TaskStageConfig {
            count: 24,
            difficulty_mix: DifficultyMix {
                simple: 1.0,
                medium: 1.0,
                complex: 0.0,
            },
            validators_on: true,
            templates: None,
        }
    }
}

impl TaskStageConfig {
    pub fn gen_config(&self, seed: u64) -> TaskGenConfig {
        TaskGenConfig {
            templates: self.templates.clone(),
            count: self.count,
            difficulty_mix: self.difficulty_mix,
            validators_on: self.validators_on,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub executor: ExecutorChoice,
    /// Episodes (distinct seeds) per task.
    pub episodes_per_task: usize,
    pub max_steps: usize,
    /// Worker threads; output does not depend on it.
    pub jobs: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            executor: ExecutorChoice::Noisy { p: 0.1 },
            episodes_per_task: 2,
            max_steps: 20,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub max_steps: usize,
    /// Checkpoint to evaluate when the train stage is off.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_steps: 20,
            policy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stages {
    pub synth: bool,
    pub tasks: bool,
    pub collect: bool,
    pub filter: bool,
    pub stats: bool,
    pub train: bool,
    pub eval: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            synth: true,
            tasks: true,
            collect: true,
            filter: true,
            stats: true,
            train: true,
            eval: true,
        }
    }
}

/// Everything one run depends on. Every field has a default, so `{}` is a
/// complete config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sites: Vec<SiteSpec>,
    pub tasks: TaskStageConfig,
    pub collect: CollectConfig,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub out_dir: PathBuf,
    /// Allow writing into a non-empty output directory.
    pub overwrite: bool,
    pub stages: Stages,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            sites: vec![SiteSpec::new("mealdash", 4)],
            tasks: TaskStageConfig::default(),
            collect: CollectConfig::default(),
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            out_dir: PathBuf::from("run"),
            overwrite: false,
            stages: Stages::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            context: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn check(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::Config("at least one site spec is required".into()));
        }
        for s in &self.sites {
            s.check()?;
        }
        self.tasks.difficulty_mix.check()?;
        if self.collect.episodes_per_task == 0 || self.collect.max_steps == 0 || self.eval.max_steps == 0 {
            return Err(Error::Config("episodes_per_task and max_steps must be positive".into()));
        }
        if let ExecutorChoice::Noisy { p } = self.collect.executor {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("noise level {p} outside [0, 1]")));
            }
        }
        let r = &self.reward;
        if !(r.tau > 0.0 && r.tau <= 1.0 && r.click_tolerance >= 0.0 && r.drag_epsilon >= 0.0) {
            return Err(Error::Config("reward thresholds out of range".into()));
        }
        self.train.check()
    }

    /// Digest of the settings that can change artifacts; the output
    /// location, the overwrite flag and the worker count are excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.overwrite = false;
        c.collect.jobs = 0;
        c.train.jobs = 0;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex64(fnv1a(text.as_bytes()))
    }
}
