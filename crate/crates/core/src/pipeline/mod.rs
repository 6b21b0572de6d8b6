//! The closed loop as one scripted run: synthesize sites, generate tasks,
//! collect and filter trajectories, count actions, train, evaluate.
//!
//! Stages talk only through files under the output directory; each stage
//! re-reads what the previous one wrote. The run manifest lists every
//! artifact with its size and content digest, so two runs can be compared
//! byte for byte.

mod config;
mod stages;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::*;
pub use stages::*;

use crate::collect::{FILTERED_FILE, TRAJECTORIES_FILE};
use crate::error::{Error, Result};
use crate::hash::{derive_seed, fnv1a, hex64};
use crate::jsonl::{read_text, to_pretty, write_text};
use crate::sitegen::KNOWLEDGE_FILE;
use crate::taskfactory::TASKS_FILE;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub artifacts: Vec<Artifact>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRun {
    pub dir: String,
    pub template: String,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_digest: String,
    pub sites: Vec<SiteRun>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            context: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &Artifact> {
        self.sites.iter().flat_map(|s| &s.stages).flat_map(|st| &st.artifacts)
    }
}

/// Size and FNV-1a digest of one file.
pub fn digest_file(root: &Path, path: &Path) -> Result<Artifact> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    let rel: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    Ok(Artifact {
        path: rel.join("/"),
        bytes: bytes.len() as u64,
        digest: hex64(fnv1a(&bytes)),
    })
}

/// Errors with [`Error::Determinism`] naming every artifact that differs.
pub fn compare_manifests(expected: &RunManifest, actual: &RunManifest) -> Result<()> {
    let mut diffs = Vec::new();
    if expected.config_digest != actual.config_digest {
        diffs.push("config digest".to_string());
    }
    let want: BTreeMap<&str, &Artifact> = expected.artifacts().map(|a| (a.path.as_str(), a)).collect();
    let got: BTreeMap<&str, &Artifact> = actual.artifacts().map(|a| (a.path.as_str(), a)).collect();
    for (p, a) in &want {
        match got.get(p) {
            None => diffs.push(format!("{p} missing")),
            Some(b) if a != b => diffs.push(format!("{p} differs")),
            _ => {}
        }
    }
    diffs.extend(
        got.keys()
            .filter(|p| !want.contains_key(*p))
            .map(|p| format!("{p} unexpected")),
    );
    if diffs.is_empty() && expected != actual {
        diffs.push("stage metrics".into());
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(Error::Determinism(diffs.join(", ")))
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

fn record(name: &str, root: &Path, out: StageOutput) -> Result<StageRecord> {
    let artifacts = stage(name, out.files.iter().map(|f| digest_file(root, f)).collect())?;
    Ok(StageRecord {
        stage: name.to_string(),
        artifacts,
        metrics: out.metrics,
        notices: out.notices,
    })
}

fn check_out_dir(cfg: &PipelineConfig) -> Result<()> {
    let dir = &cfg.out_dir;
    if cfg.overwrite || !dir.exists() {
        return Ok(());
    }
    let mut entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    if entries.next().is_some() {
        return Err(Error::Config(format!(
            "output directory {} is not empty; pick another or pass overwrite",
            dir.display()
        )));
    }
    Ok(())
}

fn require(path: PathBuf, stage_name: &str, producer: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Stage {
            stage: stage_name.to_string(),
            source: Box::new(Error::Precondition(format!(
                "{} not found; enable the {producer} stage or supply it",
                path.display()
            ))),
        })
    }
}

/// Runs the enabled stages for every site and writes `manifest.json`.
/// A failing stage aborts the run; files already written stay in place.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.check()?;
    check_out_dir(cfg)?;
    let root = cfg.out_dir.as_path();
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut manifest = RunManifest {
        seed: cfg.seed,
        config_digest: cfg.digest(),
        sites: Vec::new(),
    };
    let on = cfg.stages;
    for (i, spec) in cfg.sites.iter().enumerate() {
        let name = format!("{i:02}-{}", spec.template);
        let base = root.join(&name);
        let seed = |label: &str| derive_seed(cfg.seed, &format!("{label}/{i}"));
        let (site, tasks_dir) = (base.join("site"), base.join("tasks"));
        let (collect_dir, filter_dir) = (base.join("collect"), base.join("filter"));
        let (train_dir, eval_dir) = (base.join("train"), base.join("eval"));
        let mut stages = Vec::new();

        if on.synth {
            let out = stage("synth", synth_stage(spec, seed("site"), &site))?;
            stages.push(record("synth", root, out)?);
        }
        if on.tasks {
            require(site.join(KNOWLEDGE_FILE), "tasks", "synth")?;
            let gen = cfg.tasks.gen_config(seed("tasks"));
            let out = stage("tasks", tasks_stage(&site, &gen, &tasks_dir))?;
            stages.push(record("tasks", root, out)?);
        }
        let tasks = tasks_dir.join(TASKS_FILE);
        if on.collect {
            require(tasks.clone(), "collect", "tasks")?;
            let out = stage(
                "collect",
                collect_stage(&site, &tasks, &cfg.collect, &cfg.reward, seed("collect"), &collect_dir),
            )?;
            stages.push(record("collect", root, out)?);
        }
        let filtered = filter_dir.join(FILTERED_FILE);
        if on.filter {
            let trajs = require(collect_dir.join(TRAJECTORIES_FILE), "filter", "collect")?;
            let out = stage("filter", filter_stage(&site, &tasks, &trajs, &cfg.reward, &filter_dir))?;
            stages.push(record("filter", root, out)?);
        }
        if on.stats {
            let input = require(filtered, "stats", "filter")?;
            let out = stage("stats", stats_stage(&input, &base.join("stats")))?;
            stages.push(record("stats", root, out)?);
        }
        if on.train {
            require(tasks.clone(), "train", "tasks")?;
            let out = stage(
                "train",
                train_stage(&site, &tasks, &cfg.train, seed("train"), &train_dir),
            )?;
            stages.push(record("train", root, out)?);
        }
        if on.eval {
            let policy = match &cfg.eval.policy {
                Some(p) => p.clone(),
                None => train_dir.join(POLICY_FILE),
            };
            let policy = require(policy, "eval", "train")?;
            let subject = EvalSubject::Policy(policy);
            let (out, _) = stage(
                "eval",
                eval_stage(&site, &tasks, &subject, cfg.eval.max_steps, seed("eval"), &eval_dir),
            )?;
            stages.push(record("eval", root, out)?);
        }
        manifest.sites.push(SiteRun {
            dir: name,
            template: spec.template.clone(),
            stages,
        });
    }
    write_text(&root.join(MANIFEST_FILE), &to_pretty(&manifest)?)?;
    Ok(manifest)
}
