mod common;

use webfactory::collect::*;
use webfactory::env::{ActionKind, StructuredAction};
use webfactory::rewards::RewardConfig;
use webfactory::sitegen::{synthesize_site, SiteSpec};
use webfactory::taskfactory::*;
use webfactory::Error;

fn cfg() -> RewardConfig {
    RewardConfig::default()
}

#[test]
fn oracle_answers_the_cafe_task_in_gold_length() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    assert_eq!(
        task.goal,
        "Search for Cafe A, open its detail page, and tell me the Sunday opening time, formatted as HH:MM in 24-hour style."
    );
    assert_eq!(task.expected_answers, ["11:00", "11 am", "opens at 11:00"]);
    let t = run_episode(&b, &task, &Oracle, 10, 4, &cfg()).unwrap();
    assert_eq!(t.terminal_reason, TerminalReason::Answered);
    assert!(task.expected_answers.contains(t.emitted_answer.as_ref().unwrap()));
    assert_eq!(t.len(), task.gold_path.len());
    assert_eq!(t.len(), 5);
    for s in &t.steps {
        assert_eq!(s.reward.r_total, 1.0, "{s:?}");
    }
}

#[test]
fn zero_budget_is_a_precondition_error() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    assert!(matches!(
        run_episode(&b, &task, &Oracle, 0, 1, &cfg()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn pure_noise_runs_out_of_budget() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    for seed in 0..5 {
        let t = run_episode(&b, &task, &Noisy::new(1.0), 7, seed, &cfg()).unwrap();
        assert_eq!(t.terminal_reason, TerminalReason::BudgetExhausted);
        assert_eq!(t.len(), 7);
    }
}

#[test]
fn episodes_are_deterministic() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let a = run_episode(&b, &task, &Noisy::new(0.4), 8, 9, &cfg()).unwrap();
    let c = run_episode(&b, &task, &Noisy::new(0.4), 8, 9, &cfg()).unwrap();
    assert_eq!(a, c);
}

#[test]
fn oracle_trajectories_are_accepted_for_every_validated_task() {
    let b = synthesize_site(&SiteSpec::new("shopping", 8).with_ui(3).with_depth(3), 5).unwrap();
    let tasks = common::tasks(&b, 40, 2);
    assert!(!tasks.is_empty());
    for task in &tasks {
        let t = run_episode(&b, task, &Oracle, task.gold_path.len() + 2, 1, &cfg()).unwrap();
        assert_ne!(t.terminal_reason, TerminalReason::BudgetExhausted, "{}", task.id);
        assert!(t.len() <= task.gold_path.len(), "{}", task.id);
        let v = filter_trajectory(&t, &b, task, &cfg()).unwrap();
        assert!(v.accepted, "{}: {v:?}", task.id);
    }
}

#[test]
fn replay_against_a_reseeded_bundle_fails() {
    let b = common::mealdash();
    let other = synthesize_site(&SiteSpec::new("mealdash", 5), 2).unwrap();
    assert_eq!(b.version, other.version);
    let tasks = common::tasks(&b, 20, 3);
    for task in &tasks {
        let t = run_episode(&b, task, &Oracle, 12, 1, &cfg()).unwrap();
        let v = filter_trajectory(&t, &other, task, &cfg()).unwrap();
        assert!(!v.replay_ok, "{}", task.id);
        assert!(!v.accepted);
    }
}

#[test]
fn tampered_action_breaks_the_hash_chain() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let mut t = run_episode(&b, &task, &Oracle, 10, 4, &cfg()).unwrap();
    t.steps[1].action = StructuredAction::type_text("Cafe B");
    let v = filter_trajectory(&t, &b, &task, &cfg()).unwrap();
    assert!(!v.replay_ok);
}

#[test]
fn wrong_time_fails_the_answer_check() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let oracle = run_episode(&b, &task, &Oracle, 10, 4, &cfg()).unwrap();
    let mut script: Vec<StructuredAction> = oracle.steps.iter().map(|s| s.action.clone()).collect();
    *script.last_mut().unwrap() = StructuredAction::answer("11:30");
    let t = run_episode(&b, &task, &Scripted(script), 10, 4, &cfg()).unwrap();
    assert_eq!(t.emitted_answer.as_deref(), Some("11:30"));
    let v = filter_trajectory(&t, &b, &task, &cfg()).unwrap();
    assert!(v.replay_ok && v.key_node_coverage_ok);
    assert!(!v.answer_ok);
    assert!(!v.accepted);
    // the last step is aligned with the answer step and scored zero accuracy
    assert_eq!(t.steps.last().unwrap().reward.r_accuracy, 0);
}

#[test]
fn version_mismatch_is_a_hard_error() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let t = run_episode(&b, &task, &Oracle, 10, 4, &cfg()).unwrap();
    let mut newer = b.clone();
    newer.version += 1;
    assert!(matches!(
        filter_trajectory(&t, &newer, &task, &cfg()),
        Err(Error::VersionMismatch { recorded: 1, bundle: 2 })
    ));
}

#[test]
fn skipping_a_key_node_fails_coverage() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let t = run_episode(&b, &task, &ConstantAnswer("11:00".into()), 3, 0, &cfg()).unwrap();
    let v = filter_trajectory(&t, &b, &task, &cfg()).unwrap();
    assert!(v.replay_ok && v.answer_ok);
    assert!(!v.key_node_coverage_ok);
    assert!(!v.accepted);
}

#[test]
fn acceptance_does_not_increase_with_noise() {
    let b = common::mealdash();
    let tasks = common::tasks(&b, 20, 5);
    let seeds: Vec<u64> = (0..6).collect();
    let mut rates = Vec::new();
    for p in [0.0, 0.1, 0.3, 0.6, 1.0] {
        let trajs = collect_trajectories(&b, &tasks, &Noisy::new(p), 12, &seeds, 4, &cfg()).unwrap();
        let filtered = filter_all(&trajs, &b, &tasks, &cfg()).unwrap();
        let acc = filtered.iter().filter(|f| f.verdict.accepted).count() as f64 / filtered.len() as f64;
        rates.push(acc);
    }
    assert_eq!(rates[0], 1.0);
    assert!(rates[4] < 0.05, "{rates:?}");
    for w in rates.windows(2) {
        assert!(w[1] <= w[0], "{rates:?}");
    }
}

#[test]
fn parallel_collection_matches_sequential() {
    let b = common::mealdash();
    let tasks = common::tasks(&b, 10, 1);
    let seeds = [3, 4];
    let one = collect_trajectories(&b, &tasks, &Noisy::new(0.2), 9, &seeds, 1, &cfg()).unwrap();
    let many = collect_trajectories(&b, &tasks, &Noisy::new(0.2), 9, &seeds, 7, &cfg()).unwrap();
    assert_eq!(one, many);
    assert_eq!(one.len(), tasks.len() * 2);
}

fn step_counts(n: usize) -> Trajectory {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let mut t = run_episode(&b, &task, &Oracle, 10, n as u64, &cfg()).unwrap();
    t.steps.truncate(n);
    t
}

fn accepted(t: Trajectory) -> FilteredTrajectory {
    FilteredTrajectory {
        trajectory: t,
        verdict: FilterVerdict {
            replay_ok: true,
            key_node_coverage_ok: true,
            answer_ok: true,
            accepted: true,
            reasons: vec![],
        },
    }
}

#[test]
fn buffer_flattens_in_stable_order() {
    let mut a = step_counts(3);
    a.task_id = "b-task".into();
    let mut c = step_counts(3);
    c.task_id = "a-task".into();
    let buf = build_replay_buffer(&[accepted(a.clone()), accepted(c)]).unwrap();
    assert_eq!(buf.len(), 6);
    assert_eq!(buf[0].task_id, "a-task");
    assert_eq!(buf.iter().map(|r| r.step).collect::<Vec<_>>(), [0, 1, 2, 0, 1, 2]);
    // next state of step i is the state of step i + 1
    assert_eq!(buf[0].next_state, buf[1].state);
    assert_eq!(buf[5].next_state, webfactory::hash::hex64(a.final_hash.combined()));

    assert!(build_replay_buffer(&[]).unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(REPLAY_BUFFER_FILE);
    webfactory::jsonl::write_jsonl(&path, &buf).unwrap();
    let back: Vec<ReplayRecord> = webfactory::jsonl::read_jsonl(&path).unwrap();
    assert_eq!(back, buf);
}

#[test]
fn buffer_refuses_rejected_trajectories() {
    let mut f = accepted(step_counts(2));
    f.verdict.accepted = false;
    assert!(matches!(build_replay_buffer(&[f]), Err(Error::Precondition(_))));
}

#[test]
fn trajectory_lines_round_trip_with_documented_keys() {
    let b = common::mealdash();
    let task = common::cafe_task(&b);
    let t = run_episode(&b, &task, &Oracle, 10, 4, &cfg()).unwrap();
    let line = serde_json::to_string(&t).unwrap();
    let keys = [
        "task_id",
        "episode_seed",
        "site_version",
        "terminal_reason",
        "emitted_answer",
        "steps",
    ];
    let pos: Vec<usize> = keys.iter().map(|k| line.find(&format!("\"{k}\"")).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{line}");
    let step = serde_json::to_value(&t.steps[0]).unwrap();
    let hash = step["pre_hash"].as_array().unwrap();
    assert_eq!(hash.len(), 3);
    assert!(hash.iter().all(|h| h.as_str().unwrap().len() == 16));
    assert!(step["reward"].get("rf").is_some() && step["reward"].get("rt").is_some());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(TRAJECTORIES_FILE);
    write_trajectories(&path, std::slice::from_ref(&t)).unwrap();
    assert_eq!(read_trajectories(&path).unwrap(), vec![t]);
}

fn traj_of(kinds: &[StructuredAction]) -> Trajectory {
    let mut t = step_counts(1);
    let proto = t.steps[0].clone();
    t.steps = kinds
        .iter()
        .map(|a| TrajectoryStep {
            action: a.clone(),
            ..proto.clone()
        })
        .collect();
    t
}

#[test]
fn stats_match_a_hand_count() {
    let t = traj_of(&[
        StructuredAction::click(1.0, 1.0),
        StructuredAction::wait(),
        StructuredAction::click(2.0, 2.0),
    ]);
    let s = compute_stats(&[t]);
    assert!((s.fraction("click") - 2.0 / 3.0).abs() < 1e-12);
    assert!((s.fraction("wait") - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.action_distribution.len(), 2);
    assert_eq!(s.transition("click", "wait"), 1);
    assert_eq!(s.transition("wait", "click"), 1);
    assert_eq!(s.transition_total(), 2);

    let e = compute_stats(&[]);
    assert!(e.empty);
    assert_eq!(e.total_actions, 0);
    assert!(e.action_distribution.is_empty());
}

#[test]
fn oracle_corpus_on_a_click_only_site_is_clicks_plus_answers() {
    let b = synthesize_site(&SiteSpec::new("mealdash", 6), 4).unwrap();
    let templates: Vec<TaskTemplate> = builtin_templates()
        .into_iter()
        .filter(|t| ["retrieval_direct", "retrieval_browse", "add_to_cart_browse"].contains(&t.name.as_str()))
        .collect();
    let cfg_gen = TaskGenConfig {
        templates: Some(templates),
        ..TaskGenConfig::new(30, 8)
    };
    let tasks = generate_task_set(&b, &cfg_gen).unwrap().tasks;
    let trajs = collect_trajectories(&b, &tasks, &Oracle, 12, &[0], 2, &cfg()).unwrap();
    let s = compute_stats(&trajs);

    // counting oracle over the gold paths
    let total: usize = tasks.iter().map(|t| t.gold_path.len()).sum();
    let answers = tasks.iter().filter(|t| t.is_retrieval()).count();
    assert!(tasks
        .iter()
        .flat_map(|t| &t.gold_path)
        .all(|g| matches!(g.action, ActionKind::Click | ActionKind::GetFinalAnswer)));
    assert_eq!(s.total_actions, total);
    assert!((s.fraction("click") - (1.0 - answers as f64 / total as f64)).abs() < 1e-12);
    let sum: f64 = s.action_distribution.values().sum();
    assert!((sum - 1.0).abs() < 1e-9);
    let expect_transitions: usize = trajs.iter().map(|t| t.len().saturating_sub(1)).sum();
    assert_eq!(s.transition_total() as usize, expect_transitions);
}
