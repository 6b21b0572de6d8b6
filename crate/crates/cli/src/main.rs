//! `webfactory` — scriptable front end to the factory stages.
//!
//! Exit codes: 0 success, 2 validation failure, 3 determinism violation,
//! 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use webfactory::collect::{compute_stats, render_stats};
use webfactory::pipeline::{
    collect_stage, compare_manifests, eval_stage, filter_stage, read_any_trajectories, run_pipeline, stats_stage,
    synth_stage, tasks_stage, train_stage, EvalSubject, ExecutorChoice, PipelineConfig, RunManifest, StageOutput,
};
use webfactory::sitegen::SiteSpec;
use webfactory::Error;

#[derive(Parser)]
#[command(name = "webfactory", version, about = "Offline GUI-agent factory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON pipeline config; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> webfactory::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a site bundle.
    SynthSite {
        #[command(flatten)]
        common: Common,
        /// Domain family; the config's first site when absent.
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        catalog_size: Option<usize>,
        #[arg(long)]
        ui: Option<u8>,
        #[arg(long)]
        depth: Option<u8>,
    },
    /// Generate and validate tasks for a bundle.
    GenTasks {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        site: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, value_enum)]
        validators: Option<Toggle>,
    },
    /// Run an executor over every task.
    Collect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        site: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        /// `oracle` or `noisy:<p>`.
        #[arg(long)]
        executor: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Replay-check trajectories and build the replay buffer.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        site: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
    },
    /// Train a policy with group-normalized advantages.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        site: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        /// Rollout worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Evaluate a checkpoint or a scripted executor.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        site: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long, conflicts_with = "executor")]
        policy: Option<PathBuf>,
        #[arg(long)]
        executor: Option<String>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Action distribution and transition counts of a trajectory file.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectories: PathBuf,
    },
    /// The whole loop from one config.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        overwrite: bool,
        /// Fail with exit code 3 unless the new manifest equals this one.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Io { .. } | Error::MissingFile(_) => 4,
        Error::Determinism(_) => 3,
        _ => 2,
    }
}

fn out_dir(common: &Common, cfg: &PipelineConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| cfg.out_dir.clone())
}

fn report(stage: &str, out: &StageOutput) {
    for f in &out.files {
        println!("{stage}: wrote {}", f.display());
    }
    for (k, v) in &out.metrics {
        println!("{stage}: {k} = {v}");
    }
    for n in &out.notices {
        eprintln!("{stage}: notice: {n}");
    }
}

fn run(cli: Cli) -> webfactory::Result<()> {
    match cli.command {
        Command::SynthSite {
            common,
            template,
            catalog_size,
            ui,
            depth,
        } => {
            let cfg = common.load()?;
            let mut spec = cfg.sites[0].clone();
            if let Some(t) = template {
                spec = SiteSpec { template: t, ..spec };
            }
            spec.catalog_size = catalog_size.unwrap_or(spec.catalog_size);
            spec.ui_complexity = ui.unwrap_or(spec.ui_complexity);
            spec.workflow_depth = depth.unwrap_or(spec.workflow_depth);
            spec.check()?;
            report("synth-site", &synth_stage(&spec, cfg.seed, &out_dir(&common, &cfg))?);
        }
        Command::GenTasks {
            common,
            site,
            count,
            validators,
        } => {
            let cfg = common.load()?;
            let mut gen = cfg.tasks.gen_config(cfg.seed);
            gen.count = count.unwrap_or(gen.count);
            if let Some(v) = validators {
                gen.validators_on = matches!(v, Toggle::On);
            }
            report("gen-tasks", &tasks_stage(&site, &gen, &out_dir(&common, &cfg))?);
        }
        Command::Collect {
            common,
            site,
            tasks,
            executor,
            episodes,
            max_steps,
            jobs,
        } => {
            let cfg = common.load()?;
            let mut c = cfg.collect.clone();
            if let Some(e) = executor {
                c.executor = ExecutorChoice::parse(&e)?;
            }
            c.episodes_per_task = episodes.unwrap_or(c.episodes_per_task);
            c.max_steps = max_steps.unwrap_or(c.max_steps);
            c.jobs = jobs.unwrap_or(c.jobs);
            let out = collect_stage(&site, &tasks, &c, &cfg.reward, cfg.seed, &out_dir(&common, &cfg))?;
            report("collect", &out);
        }
        Command::Filter {
            common,
            site,
            tasks,
            trajectories,
        } => {
            let cfg = common.load()?;
            let out = filter_stage(&site, &tasks, &trajectories, &cfg.reward, &out_dir(&common, &cfg))?;
            report("filter", &out);
        }
        Command::Train {
            common,
            site,
            tasks,
            episodes,
            jobs,
        } => {
            let cfg = common.load()?;
            let mut t = cfg.train.clone();
            t.episodes = episodes.unwrap_or(t.episodes);
            t.jobs = jobs.unwrap_or(t.jobs);
            report(
                "train",
                &train_stage(&site, &tasks, &t, cfg.seed, &out_dir(&common, &cfg))?,
            );
        }
        Command::Eval {
            common,
            site,
            tasks,
            policy,
            executor,
            max_steps,
        } => {
            let cfg = common.load()?;
            let subject = match (policy.or(cfg.eval.policy.clone()), executor) {
                (_, Some(e)) => EvalSubject::Executor(ExecutorChoice::parse(&e)?),
                (Some(p), None) => EvalSubject::Policy(p),
                (None, None) => {
                    return Err(Error::Precondition("eval needs --policy or --executor".into()));
                }
            };
            let steps = max_steps.unwrap_or(cfg.eval.max_steps);
            let (out, result) = eval_stage(&site, &tasks, &subject, steps, cfg.seed, &out_dir(&common, &cfg))?;
            print!("{}", webfactory::eval::render_report(&result));
            report("eval", &out);
        }
        Command::Stats { common, trajectories } => {
            let stats = compute_stats(&read_any_trajectories(&trajectories)?);
            print!("{}", render_stats(&stats));
            if common.out.is_some() {
                let cfg = common.load()?;
                report("stats", &stats_stage(&trajectories, &out_dir(&common, &cfg))?);
            }
        }
        Command::Run {
            common,
            overwrite,
            expect,
        } => {
            let mut cfg = common.load()?;
            cfg.overwrite |= overwrite;
            let expected = expect.as_deref().map(RunManifest::load).transpose()?;
            let manifest = run_pipeline(&cfg)?;
            for site in &manifest.sites {
                for st in &site.stages {
                    for (k, v) in &st.metrics {
                        println!("{}/{}: {k} = {v}", site.dir, st.stage);
                    }
                    for n in &st.notices {
                        eprintln!("{}/{}: notice: {n}", site.dir, st.stage);
                    }
                }
            }
            println!("manifest: {}", manifest_path(&cfg.out_dir).display());
            if let Some(e) = expected {
                compare_manifests(&e, &manifest)?;
                println!("manifest matches the expected run");
            }
        }
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    out.join(webfactory::pipeline::MANIFEST_FILE)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
