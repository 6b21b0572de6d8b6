use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gold::attach_gold_path;
use super::task::*;
use super::template::*;
use super::validate::validate_task;
use crate::error::Result;
use crate::hash::derive_seed;
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::sitegen::SiteBundle;

pub const TASKS_FILE: &str = "tasks.jsonl";
pub const EMISSION_LOG_FILE: &str = "emission_log.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGenConfig {
    /// Templates to instantiate; the built-in set when absent.
    #[serde(default)]
    pub templates: Option<Vec<TaskTemplate>>,
    pub count: usize,
    #[serde(default)]
    pub difficulty_mix: DifficultyMix,
    #[serde(default = "yes")]
    pub validators_on: bool,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl TaskGenConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        TaskGenConfig {
            templates: None,
            count,
            difficulty_mix: DifficultyMix::default(),
            validators_on: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    Accepted,
    Rejected,
    /// Emitted with validation skipped.
    Unvalidated,
    /// Template not applicable to this site.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub task_id: String,
    pub template: String,
    pub status: Emission,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_validators: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskSet {
    pub tasks: Vec<Task>,
    pub log: Vec<EmissionRecord>,
    pub warnings: Vec<String>,
}

impl TaskSet {
    pub fn rejected(&self) -> usize {
        self.log.iter().filter(|r| r.status == Emission::Rejected).count()
    }

    /// Writes `tasks.jsonl` and `emission_log.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_jsonl(&dir.join(TASKS_FILE), &self.tasks)?;
        write_jsonl(&dir.join(EMISSION_LOG_FILE), &self.log)
    }
}

pub fn read_tasks(path: &Path) -> Result<Vec<Task>> {
    read_jsonl(path)
}

/// Instantiates, validates and emits up to `config.count` tasks, drawing
/// candidates by difficulty according to the mix.
pub fn generate_task_set(bundle: &SiteBundle, config: &TaskGenConfig) -> Result<TaskSet> {
    let templates = config.templates.clone().unwrap_or_else(builtin_templates);
    let mut set = TaskSet::default();
    let (usable, skipped): (Vec<TaskTemplate>, Vec<TaskTemplate>) =
        templates.into_iter().partition(|t| bundle.flow(&t.flow).is_some());
    for t in skipped {
        set.log.push(EmissionRecord {
            task_id: String::new(),
            template: t.name.clone(),
            status: Emission::Skipped,
            failed_validators: Vec::new(),
            messages: vec![format!("flow `{}` absent from site", t.flow)],
        });
    }
    let candidates = instantiate_templates(bundle, &usable, &config.difficulty_mix, config.seed)?;
    let mut buckets: [VecDeque<(TaskTemplate, Task)>; 3] = Default::default();
    for c in candidates {
        let d = c.0.nominal_difficulty();
        buckets[Difficulty::ALL.iter().position(|x| *x == d).unwrap()].push_back(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "draw"));
    while set.tasks.len() < config.count {
        let weights: Vec<f64> = Difficulty::ALL
            .iter()
            .zip(&buckets)
            .map(|(d, b)| {
                if b.is_empty() {
                    0.0
                } else {
                    config.difficulty_mix.weight(*d)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut idx = 0;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                idx = i;
                if pick < *w {
                    break;
                }
                pick -= w;
            }
        }
        let (template, candidate) = buckets[idx].pop_front().expect("non-empty bucket");
        let mut rec = EmissionRecord {
            task_id: candidate.id.clone(),
            template: template.name.clone(),
            status: Emission::Accepted,
            failed_validators: Vec::new(),
            messages: Vec::new(),
        };
        let attached = attach_gold_path(&candidate, bundle);
        if config.validators_on {
            match attached {
                Err(e) => {
                    rec.status = Emission::Rejected;
                    rec.failed_validators.push("path_feasible".into());
                    rec.messages.push(e.to_string());
                }
                Ok(task) => {
                    let verdict = validate_task(&task, bundle);
                    if verdict.pass {
                        set.tasks.push(task);
                    } else {
                        rec.status = Emission::Rejected;
                        rec.failed_validators = verdict.failed_validators().iter().map(|s| s.to_string()).collect();
                        rec.messages = verdict.failures;
                    }
                }
            }
        } else {
            rec.status = Emission::Unvalidated;
            rec.messages.push("validation skipped".into());
            match attached {
                Ok(task) => set.tasks.push(task),
                Err(e) => {
                    rec.messages.push(e.to_string());
                    set.tasks.push(candidate);
                }
            }
        }
        set.log.push(rec);
    }
    if set.tasks.is_empty() {
        set.warnings.push(format!(
            "no tasks emitted for site `{}` (requested {}, {} rejected)",
            bundle.site_id,
            config.count,
            set.rejected()
        ));
    } else if set.tasks.len() < config.count {
        set.warnings.push(format!(
            "only {} of {} requested tasks emitted for site `{}`",
            set.tasks.len(),
            config.count,
            bundle.site_id
        ));
    }
    Ok(set)
}
