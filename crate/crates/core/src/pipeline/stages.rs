use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{CollectConfig, ExecutorChoice};
use crate::collect::{
    build_replay_buffer, collect_trajectories, compute_stats, filter_all, read_trajectories, write_trajectories,
    FilteredTrajectory, Oracle, Trajectory, FILTERED_FILE, REPLAY_BUFFER_FILE, STATS_FILE, TRAJECTORIES_FILE,
};
use crate::error::{Error, Result};
use crate::eval::{eval_policy, render_report, EvalResult};
use crate::hash::derive_seed;
use crate::jsonl::{from_jsonl, read_text, to_pretty, write_jsonl, write_text};
use crate::rewards::RewardConfig;
use crate::sitegen::{export_bundle, load_bundle, synthesize_site, SiteBundle, SiteSpec};
use crate::taskfactory::{
    generate_task_set, measure_quality, read_tasks, Task, TaskGenConfig, EMISSION_LOG_FILE, TASKS_FILE,
};
use crate::train::{curve_csv, load_checkpoint, save_checkpoint, train, CheckpointFormat, Learned, TrainConfig};

pub const QUALITY_FILE: &str = "quality.json";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const CURVE_FILE: &str = "curve.csv";
pub const UPDATES_FILE: &str = "updates.jsonl";
pub const EVAL_FILE: &str = "eval.json";
pub const REPORT_FILE: &str = "report.txt";

/// Files a stage wrote, headline numbers, and notices worth printing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutput {
    pub files: Vec<PathBuf>,
    pub metrics: BTreeMap<String, f64>,
    pub notices: Vec<String>,
}

impl StageOutput {
    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }
}

/// Synthesizes one site and exports it into `out`.
pub fn synth_stage(spec: &SiteSpec, seed: u64, out: &Path) -> Result<StageOutput> {
    let bundle = synthesize_site(spec, seed)?;
    let manifest = export_bundle(&bundle, out)?;
    let mut o = StageOutput {
        files: manifest.files,
        ..Default::default()
    };
    o.metric("pages", bundle.pages.len() as f64);
    o.metric("elements", bundle.element_count() as f64);
    o.metric("flows", bundle.flows.len() as f64);
    Ok(o)
}

/// Generates, validates and scores tasks for the bundle in `site`.
pub fn tasks_stage(site: &Path, cfg: &TaskGenConfig, out: &Path) -> Result<StageOutput> {
    let bundle = load_bundle(site)?;
    let set = generate_task_set(&bundle, cfg)?;
    set.write(out)?;
    let quality = measure_quality(&set.tasks, &bundle, &Oracle);
    let qpath = out.join(QUALITY_FILE);
    write_text(&qpath, &to_pretty(&quality)?)?;
    let mut o = StageOutput {
        files: vec![out.join(TASKS_FILE), out.join(EMISSION_LOG_FILE), qpath],
        notices: set.warnings.clone(),
        ..Default::default()
    };
    if !cfg.validators_on {
        o.notices
            .push("validation skipped; emission log marks tasks unvalidated".into());
    }
    o.metric("tasks", set.tasks.len() as f64);
    o.metric("rejected", set.rejected() as f64);
    o.metric("executability", quality.executability);
    o.metric("validity", quality.validity);
    o.metric("diversity", quality.diversity);
    o.metric("complexity_pct", quality.complexity_pct);
    Ok(o)
}

fn load_inputs(site: &Path, tasks: &Path) -> Result<(SiteBundle, Vec<Task>)> {
    let bundle = load_bundle(site)?;
    let tasks = read_tasks(tasks)?;
    if let Some(t) = tasks.iter().find(|t| t.site != bundle.site_id) {
        return Err(Error::SiteMismatch {
            task_site: t.site.clone(),
            bundle_site: bundle.site_id.clone(),
        });
    }
    Ok((bundle, tasks))
}

/// Episode seeds used by the collect stage.
pub fn episode_seeds(seed: u64, n: usize) -> Vec<u64> {
    (0..n).map(|i| derive_seed(seed, &format!("episode/{i}"))).collect()
}

pub fn collect_stage(
    site: &Path,
    tasks: &Path,
    cfg: &CollectConfig,
    reward: &RewardConfig,
    seed: u64,
    out: &Path,
) -> Result<StageOutput> {
    let (bundle, tasks) = load_inputs(site, tasks)?;
    let executor = cfg.executor.build();
    let seeds = episode_seeds(seed, cfg.episodes_per_task);
    let trajs = collect_trajectories(
        &bundle,
        &tasks,
        executor.as_ref(),
        cfg.max_steps,
        &seeds,
        cfg.jobs,
        reward,
    )?;
    let path = out.join(TRAJECTORIES_FILE);
    write_trajectories(&path, &trajs)?;
    let mut o = StageOutput {
        files: vec![path],
        ..Default::default()
    };
    let n = trajs.len().max(1) as f64;
    o.metric("trajectories", trajs.len() as f64);
    o.metric("mean_steps", trajs.iter().map(|t| t.len() as f64).sum::<f64>() / n);
    o.metric("mean_reward", trajs.iter().map(|t| t.total_reward()).sum::<f64>() / n);
    Ok(o)
}

pub fn filter_stage(
    site: &Path,
    tasks: &Path,
    trajectories: &Path,
    reward: &RewardConfig,
    out: &Path,
) -> Result<StageOutput> {
    let (bundle, tasks) = load_inputs(site, tasks)?;
    let trajs = read_trajectories(trajectories)?;
    let filtered = filter_all(&trajs, &bundle, &tasks, reward)?;
    let accepted: Vec<FilteredTrajectory> = filtered.iter().filter(|f| f.verdict.accepted).cloned().collect();
    let buffer = build_replay_buffer(&accepted)?;
    let fpath = out.join(FILTERED_FILE);
    let bpath = out.join(REPLAY_BUFFER_FILE);
    write_jsonl(&fpath, &filtered)?;
    write_jsonl(&bpath, &buffer)?;
    let mut o = StageOutput {
        files: vec![fpath, bpath],
        ..Default::default()
    };
    if filtered.is_empty() {
        o.notices.push("no trajectories to filter; 0 accepted".into());
    }
    o.metric("trajectories", filtered.len() as f64);
    o.metric("accepted", accepted.len() as f64);
    o.metric(
        "acceptance_rate",
        if filtered.is_empty() {
            0.0
        } else {
            accepted.len() as f64 / filtered.len() as f64
        },
    );
    o.metric("transitions", buffer.len() as f64);
    Ok(o)
}

/// Reads either raw trajectories or filter output; from the latter only
/// accepted trajectories are kept.
pub fn read_any_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = read_text(path)?;
    let context = path.display().to_string();
    let values: Vec<serde_json::Value> = from_jsonl(&text, &context)?;
    if values.first().is_some_and(|v| v.get("verdict").is_some()) {
        let filtered: Vec<FilteredTrajectory> = from_jsonl(&text, &context)?;
        return Ok(filtered
            .into_iter()
            .filter(|f| f.verdict.accepted)
            .map(|f| f.trajectory)
            .collect());
    }
    from_jsonl(&text, &context)
}

pub fn stats_stage(trajectories: &Path, out: &Path) -> Result<StageOutput> {
    let trajs = read_any_trajectories(trajectories)?;
    let stats = compute_stats(&trajs);
    let path = out.join(STATS_FILE);
    write_text(&path, &to_pretty(&stats)?)?;
    let mut o = StageOutput {
        files: vec![path],
        ..Default::default()
    };
    if stats.empty {
        o.notices.push("no actions to count".into());
    }
    o.metric("actions", stats.total_actions as f64);
    o.metric("click_fraction", stats.fraction("click"));
    Ok(o)
}

pub fn train_stage(site: &Path, tasks: &Path, cfg: &TrainConfig, seed: u64, out: &Path) -> Result<StageOutput> {
    let (bundle, tasks) = load_inputs(site, tasks)?;
    let outcome = train(&bundle, &tasks, cfg, seed)?;
    let mut files = Vec::new();
    for (e, params) in &outcome.checkpoints {
        let p = out.join("checkpoints").join(format!("episode-{e:04}.ckpt"));
        std::fs::create_dir_all(p.parent().unwrap()).map_err(|err| Error::io(&p, err))?;
        save_checkpoint(&p, params, *e as u64, CheckpointFormat::Binary)?;
        files.push(p);
    }
    std::fs::create_dir_all(out).map_err(|err| Error::io(out, err))?;
    let policy = out.join(POLICY_FILE);
    save_checkpoint(&policy, &outcome.policy, cfg.episodes as u64, CheckpointFormat::Binary)?;
    let curve = out.join(CURVE_FILE);
    write_text(&curve, &curve_csv(&outcome.curve))?;
    let updates = out.join(UPDATES_FILE);
    write_jsonl(&updates, &outcome.updates)?;
    files.extend([policy, curve, updates]);
    let mut o = StageOutput {
        files,
        ..Default::default()
    };
    if let Some(last) = outcome.curve.last() {
        o.metric("final_sample_tcr", last.tcr);
        o.metric("final_mean_return", last.mean_return);
    }
    o.metric("nonzero_weights", outcome.policy.nonzero() as f64);
    Ok(o)
}

/// What the eval stage runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EvalSubject {
    /// A checkpoint, evaluated greedily.
    Policy(PathBuf),
    Executor(ExecutorChoice),
}

pub fn eval_stage(
    site: &Path,
    tasks: &Path,
    subject: &EvalSubject,
    max_steps: usize,
    seed: u64,
    out: &Path,
) -> Result<(StageOutput, EvalResult)> {
    let (bundle, tasks) = load_inputs(site, tasks)?;
    let result = match subject {
        EvalSubject::Policy(p) => {
            let (params, _) = load_checkpoint(p)?;
            eval_policy(&Learned::greedy(params), &bundle, &tasks, max_steps, seed)?
        }
        EvalSubject::Executor(e) => eval_policy(e.build().as_ref(), &bundle, &tasks, max_steps, seed)?,
    };
    let json = out.join(EVAL_FILE);
    let report = out.join(REPORT_FILE);
    write_text(&json, &to_pretty(&result)?)?;
    write_text(&report, &render_report(&result))?;
    let mut o = StageOutput {
        files: vec![json, report],
        ..Default::default()
    };
    if result.empty {
        o.notices.push("no tasks to evaluate".into());
    }
    o.metric("tcr", result.tcr);
    o.metric("type_acc", result.type_acc);
    o.metric("step_success_rate", result.step_success_rate);
    if let Some(v) = result.step_efficiency {
        o.metric("step_efficiency", v);
    }
    if let Some(v) = result.grounding_acc {
        o.metric("grounding_acc", v);
    }
    Ok((o, result))
}
