//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webfactory::collect::*;
use webfactory::env::{Direction, Env, StructuredAction};
use webfactory::pipeline::{compare_manifests, run_pipeline, PipelineConfig, MANIFEST_FILE};
use webfactory::rewards::*;
use webfactory::sitegen::*;
use webfactory::taskfactory::*;
use webfactory::train::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn reward_golden_suite() -> Outcome {
    let cfg = RewardConfig::default();
    let start = Instant::now();
    let vectors = common::golden::vectors();
    ensure!(vectors.len() >= 30, "only {} vectors", vectors.len());
    let mut rules = BTreeSet::new();
    for v in &vectors {
        let got = score_response(&v.raw, &v.gt, &cfg);
        let want = RewardBreakdown::compose(v.rf, v.racc, v.rule, &cfg);
        ensure!(got == want, "{}: got {got:?}, want {want:?}", v.name);
        ensure!(
            [0.0, 0.2, 0.8, 1.0].contains(&got.r_total),
            "{}: r_total {}",
            v.name,
            got.r_total
        );
        rules.insert(got.rule_fired.as_str());
    }
    ensure!(rules.len() == 7, "rules covered: {rules:?}");
    let listing = GroundTruthStep::answers(&common::golden::LISTING_ANSWERS);
    for a in common::golden::LISTING_ANSWERS {
        let r = score_response(&StructuredAction::answer(a).to_wire(""), &listing, &cfg);
        ensure!(r.r_total == 1.0, "listing answer {a} scored {}", r.r_total);
    }
    // ±1 px around the 140 px radius, both axes
    let b = common::golden::target();
    let (cx, cy) = b.center();
    for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)] {
        ensure!(
            click_hits((cx + 139.0 * dx, cy + 139.0 * dy), &b, &cfg),
            "139 px missed"
        );
        ensure!(
            click_hits((cx + 140.0 * dx, cy + 140.0 * dy), &b, &cfg),
            "140 px missed"
        );
        ensure!(!click_hits((cx + 141.0 * dx, cy + 141.0 * dy), &b, &cfg), "141 px hit");
    }
    let tau_hit = accuracy_reward(
        &StructuredAction::type_text("cafe"),
        &GroundTruthStep::text(webfactory::env::ActionKind::Type, "cafe a b"),
        &cfg,
    );
    let tau_miss = accuracy_reward(
        &StructuredAction::type_text("cafe"),
        &GroundTruthStep::text(webfactory::env::ActionKind::Type, "cafe a b c"),
        &cfg,
    );
    ensure!(
        tau_hit.0 == 1 && tau_miss.0 == 0,
        "F1 boundary: {tau_hit:?} {tau_miss:?}"
    );
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.2}s");
    Ok(format!("{} vectors, 7 rules, {:.0} ms", vectors.len(), secs * 1e3))
}

fn oracle_replays(b: &SiteBundle, t: &Task) -> bool {
    let cfg = RewardConfig::default();
    let Ok(traj) = run_episode(b, t, &Oracle, t.gold_path.len().max(1) + 2, 0, &cfg) else {
        return false;
    };
    traj.terminal_reason != TerminalReason::BudgetExhausted
        && filter_trajectory(&traj, b, t, &cfg).is_ok_and(|v| v.accepted)
}

fn validator_soundness() -> Outcome {
    let start = Instant::now();
    let specs = [
        (SiteSpec::new("mealdash", 16).with_ui(2), 6),
        (SiteSpec::new("shopping", 16).with_ui(1).with_depth(3), 4),
        (SiteSpec::new("hotels", 16).with_ui(3), 8),
    ];
    let (mut total, mut replayed) = (0, 0);
    let (mut corrupt_total, mut corrupt_ok) = (0, 0);
    for (spec, seed) in &specs {
        let b = synthesize_site(spec, *seed).map_err(|e| e.to_string())?;
        let set = generate_task_set(&b, &TaskGenConfig::new(200, *seed)).map_err(|e| e.to_string())?;
        total += set.tasks.len();
        replayed += set.tasks.iter().filter(|t| oracle_replays(&b, t)).count();

        let bad = inject_dangling_records(&b, 0.5, seed + 1);
        let off = TaskGenConfig {
            validators_on: false,
            ..TaskGenConfig::new(60, *seed)
        };
        let set = generate_task_set(&bad, &off).map_err(|e| e.to_string())?;
        corrupt_total += set.tasks.len();
        corrupt_ok += set.tasks.iter().filter(|t| oracle_replays(&bad, t)).count();
    }
    ensure!(total >= 500, "only {total} tasks");
    ensure!(replayed == total, "{replayed}/{total} validated tasks replay");
    let rate = corrupt_ok as f64 / corrupt_total as f64;
    ensure!(rate < 0.8, "corrupted, unvalidated replay rate {rate:.3}");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s");
    Ok(format!(
        "{total} tasks on 3 bundles replay 100%; corrupted+unvalidated {:.1}%; {secs:.1}s",
        100.0 * rate
    ))
}

fn filter_soundness() -> Outcome {
    let cfg = RewardConfig::default();
    let b = common::mealdash();
    let other = synthesize_site(&SiteSpec::new("mealdash", 5), 2).map_err(|e| e.to_string())?;
    let tasks = common::tasks(&b, 30, 3);
    let mut retrieval = 0;
    for t in &tasks {
        let traj = run_episode(&b, t, &Oracle, t.gold_path.len(), 1, &cfg).map_err(|e| e.to_string())?;
        let v = filter_trajectory(&traj, &b, t, &cfg).map_err(|e| e.to_string())?;
        ensure!(v.accepted, "oracle trajectory for {} rejected: {:?}", t.id, v.reasons);

        let v = filter_trajectory(&traj, &other, t, &cfg).map_err(|e| e.to_string())?;
        ensure!(!v.replay_ok, "{} replays on a bundle with another seed", t.id);

        if t.is_retrieval() {
            retrieval += 1;
            let env = Env::new(&b);
            let (mut s, _) = env.reset(t, 1).map_err(|e| e.to_string())?;
            let mut script = Vec::new();
            for step in &t.gold_path {
                let a = step_action(&env, &s, step).ok_or("gold step not executable")?;
                s = env.apply(&s, &a).map_err(|e| e.to_string())?.0;
                script.push(a);
            }
            *script.last_mut().unwrap() = StructuredAction::answer("zzz unknown");
            let wrong = run_episode(&b, t, &Scripted(script), t.gold_path.len(), 1, &cfg).map_err(|e| e.to_string())?;
            let v = filter_trajectory(&wrong, &b, t, &cfg).map_err(|e| e.to_string())?;
            ensure!(
                v.replay_ok && !v.answer_ok && !v.accepted,
                "{}: wrong answer verdict {v:?}",
                t.id
            );
        }
    }
    ensure!(retrieval > 0, "no retrieval tasks exercised");
    Ok(format!(
        "{} oracle trajectories accepted; reseeded bundle fails replay; {retrieval} wrong answers fail",
        tasks.len()
    ))
}

fn grpo_mechanics() -> Outcome {
    use common::grpo::{near_kink, random_instance};
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut groups_checked = 0;
    for _ in 0..300 {
        let n = rng.gen_range(2..10);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..5.0)).collect();
        let a = group_advantages(&r, 1e-8);
        let mean = a.iter().sum::<f64>() / n as f64;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        ensure!(
            mean.abs() <= 1e-6 && (std - 1.0).abs() <= 1e-3,
            "mean {mean}, std {std}"
        );
        groups_checked += 1;
    }

    let mut checked = 0;
    let mut worst_rel = 0.0f64;
    while checked < 100 {
        let (params, groups, t) = random_instance(&mut rng);
        let cfg = UpdateConfig {
            temperature: t,
            clip: 0.2,
            kl_coeff: 0.01,
            adv_eps: 1e-8,
            learning_rate: 0.1,
            grad_clip: 0.0,
        };
        if near_kink(&params, &groups, t, cfg.clip) {
            continue;
        }
        let (grad, _) = objective(&params, &groups, &cfg);
        let h = 1e-6;
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for i in 0..params.weights.len() {
            let mut up = params.clone();
            up.weights[i] += h;
            let mut down = params.clone();
            down.weights[i] -= h;
            let fd =
                (objective(&up, &groups, &cfg).1.objective - objective(&down, &groups, &cfg).1.objective) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs());
            scale = scale.max(fd.abs());
        }
        let rel = worst / scale.max(1e-8);
        ensure!(rel < 1e-4, "relative gradient error {rel:e}");
        worst_rel = worst_rel.max(rel);
        checked += 1;
    }

    for _ in 0..20_000 {
        let ratio = rng.gen_range(0.0..6.0);
        let adv = rng.gen_range(-5.0..5.0);
        let term = clipped_term(ratio, adv, 0.2);
        ensure!(
            term <= 1.2 * adv.abs() + 1e-12,
            "clipped term {term} for r={ratio}, A={adv}"
        );
    }
    ensure!(
        (clipped_term(1.5, 1.0, 0.2) - 1.2).abs() < 1e-12,
        "ratio 1.5 not clipped to 1.2"
    );
    Ok(format!(
        "{groups_checked} groups standardized; {checked} gradient checks, worst rel err {worst_rel:.1e}; clip bound held"
    ))
}

fn greedy_tcr(policy: &PolicyParams, bundle: &SiteBundle, tasks: &[Task]) -> f64 {
    // budget per task is its gold length
    let cfg = RewardConfig::default();
    let ex = Learned::greedy(policy.clone());
    let ok = tasks
        .iter()
        .filter(|t| {
            let (traj, state) = play_episode(bundle, t, &ex, t.gold_path.len(), 0, &cfg).unwrap();
            webfactory::eval::task_success(&traj, t, &state, &bundle.data_snapshot, &cfg).success
        })
        .count();
    ok as f64 / tasks.len() as f64
}

fn desk_scale_learning() -> Outcome {
    let start = Instant::now();
    let (bundle, tasks) = common::toy();
    ensure!(bundle.pages.len() <= 10, "{} pages", bundle.pages.len());
    ensure!(
        tasks
            .iter()
            .all(|t| matches!(t.difficulty, Some(Difficulty::Simple | Difficulty::Medium))),
        "complex task in the toy set"
    );
    let cfg = TrainConfig::default();
    ensure!(
        cfg.episodes == 15 && cfg.group_size == 5 && cfg.jobs == 1,
        "defaults changed"
    );
    let random = tasks
        .iter()
        .map(|t| random_success_probability(&bundle, t, t.gold_path.len(), 0).unwrap())
        .sum::<f64>()
        / tasks.len() as f64;
    let a = train(&bundle, &tasks, &cfg, 1).map_err(|e| e.to_string())?;
    let tcr = greedy_tcr(&a.policy, &bundle, &tasks);
    let secs = start.elapsed().as_secs_f64();
    let b = train(&bundle, &tasks, &cfg, 1).map_err(|e| e.to_string())?;
    let same = encode_checkpoint(&a.policy, 15, CheckpointFormat::Binary)
        == encode_checkpoint(&b.policy, 15, CheckpointFormat::Binary)
        && curve_csv(&a.curve) == curve_csv(&b.curve);
    ensure!(tcr >= 0.9, "greedy TCR {tcr:.3}");
    ensure!(tcr >= 3.0 * random, "greedy TCR {tcr:.3} vs random {random:.3}");
    ensure!(secs < 120.0, "took {secs:.1}s");
    ensure!(same, "two runs differ");
    Ok(format!(
        "{} tasks, greedy TCR {tcr:.3} vs random {random:.3} ({:.0}x); {secs:.1}s; runs byte-identical",
        tasks.len(),
        tcr / random
    ))
}

fn random_trajectory(rng: &mut ChaCha8Rng, proto: &Trajectory) -> Trajectory {
    let step = proto.steps[0].clone();
    let pool = [
        StructuredAction::click(10.0, 10.0),
        StructuredAction::double_click(5.0, 5.0),
        StructuredAction::type_text("x"),
        StructuredAction::scroll(Direction::Down),
        StructuredAction::keypress("ENTER"),
        StructuredAction::drag((0.0, 0.0), (0.0, 50.0)),
        StructuredAction::wait(),
        StructuredAction::answer("a"),
    ];
    let len = rng.gen_range(0..12);
    Trajectory {
        steps: (0..len)
            .map(|_| TrajectoryStep {
                action: pool[rng.gen_range(0..pool.len())].clone(),
                ..step.clone()
            })
            .collect(),
        ..proto.clone()
    }
}

fn stats_oracle() -> Outcome {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let proto = run_episode(&b, &task, &Oracle, 10, 0, &RewardConfig::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trajs: Vec<Trajectory> = (0..100).map(|_| random_trajectory(&mut rng, &proto)).collect();
    let stats = compute_stats(&trajs);

    // brute force: flat lists of kinds and adjacent pairs
    let mut kinds: HashMap<String, u64> = HashMap::new();
    let mut pairs: HashMap<(String, String), u64> = HashMap::new();
    let mut expected_pairs = 0u64;
    for t in &trajs {
        for i in 0..t.steps.len() {
            *kinds.entry(t.steps[i].action.act.to_string()).or_default() += 1;
            if i + 1 < t.steps.len() {
                let key = (t.steps[i].action.act.to_string(), t.steps[i + 1].action.act.to_string());
                *pairs.entry(key).or_default() += 1;
            }
        }
        expected_pairs += t.steps.len().saturating_sub(1) as u64;
    }
    let total: u64 = kinds.values().sum();
    ensure!(
        stats.total_actions as u64 == total,
        "total {} vs {total}",
        stats.total_actions
    );
    ensure!(stats.action_distribution.len() == kinds.len(), "kind sets differ");
    for (k, c) in &kinds {
        let want = *c as f64 / total as f64;
        ensure!(
            (stats.fraction(k) - want).abs() < 1e-12,
            "{k}: {} vs {want}",
            stats.fraction(k)
        );
    }
    for ((from, to), c) in &pairs {
        ensure!(stats.transition(from, to) == *c, "{from}->{to}");
    }
    ensure!(stats.transition_total() == expected_pairs, "transitions not conserved");
    let sum: f64 = stats.action_distribution.values().sum();
    ensure!((sum - 1.0).abs() <= 1e-9, "distribution sums to {sum}");
    Ok(format!(
        "100 trajectories, {total} actions, {expected_pairs} transitions match brute force"
    ))
}

fn end_to_end_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = |dir: &std::path::Path| PipelineConfig {
        seed: 11,
        out_dir: dir.to_path_buf(),
        ..Default::default()
    };
    let ma = run_pipeline(&cfg(a.path())).map_err(|e| e.to_string())?;
    let mb = run_pipeline(&cfg(b.path())).map_err(|e| e.to_string())?;
    compare_manifests(&ma, &mb).map_err(|e| e.to_string())?;
    let fa = std::fs::read(a.path().join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let fb = std::fs::read(b.path().join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    ensure!(fa == fb, "manifest bytes differ");
    Ok(format!("{} artifacts, identical digests", ma.artifacts().count()))
}

fn round_trips() -> Outcome {
    let domains: Vec<String> = builtin_domains().into_iter().map(|d| d.name).collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runner = || {
        TestRunner::new_with_rng(
            PropConfig {
                cases: 100,
                failure_persistence: None,
                ..PropConfig::default()
            },
            proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
        )
    };
    let strategy = (0..domains.len(), 1usize..12, 0u8..=3, 1u8..=5, any::<u64>());
    let bundles = std::cell::Cell::new(0usize);
    runner()
        .run(&strategy, |(d, n, ui, depth, seed)| {
            let spec = SiteSpec::new(&domains[d], n).with_ui(ui).with_depth(depth);
            let bundle = synthesize_site(&spec, seed).unwrap();
            let sub = dir.path().join(format!("b{}", bundles.get()));
            export_bundle(&bundle, &sub).unwrap();
            prop_assert_eq!(load_bundle(&sub).unwrap(), bundle);
            bundles.set(bundles.get() + 1);
            Ok(())
        })
        .map_err(|e| format!("bundle round trip: {e}"))?;

    let b = common::mealdash();
    let tasks = common::tasks(&b, 20, 5);
    let cfg = RewardConfig::default();
    let strategy = (
        0..tasks.len(),
        0.0f64..1.0,
        any::<u64>(),
        1usize..15,
        proptest::option::of("\\PC{0,24}"),
    );
    let trajs = std::cell::Cell::new(0usize);
    runner()
        .run(&strategy, |(ti, p, seed, budget, answer)| {
            let mut t = run_episode(&b, &tasks[ti], &Noisy::new(p), budget, seed, &cfg).unwrap();
            if answer.is_some() {
                t.emitted_answer = answer;
            }
            let path = dir.path().join(format!("t{}.jsonl", trajs.get()));
            write_trajectories(&path, std::slice::from_ref(&t)).unwrap();
            prop_assert_eq!(read_trajectories(&path).unwrap(), vec![t]);
            trajs.set(trajs.get() + 1);
            Ok(())
        })
        .map_err(|e| format!("trajectory round trip: {e}"))?;
    let (bundles, trajs) = (bundles.get(), trajs.get());
    ensure!(
        bundles >= 100 && trajs >= 100,
        "{bundles} bundles, {trajs} trajectories"
    );
    Ok(format!("{bundles} bundles and {trajs} trajectories round-trip"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("reward golden suite", reward_golden_suite),
        ("validator soundness", validator_soundness),
        ("filter soundness", filter_soundness),
        ("GRPO mechanics", grpo_mechanics),
        ("desk-scale learning", desk_scale_learning),
        ("dataset statistics", stats_oracle),
        ("end-to-end determinism", end_to_end_determinism),
        ("serialization round trips", round_trips),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
