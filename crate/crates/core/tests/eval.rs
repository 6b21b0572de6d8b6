mod common;

use webfactory::collect::{play_episode, ConstantAnswer, Oracle, Scripted};
use webfactory::env::{ActionKind, Env, EnvState, StructuredAction};
use webfactory::eval::*;
use webfactory::rewards::{accuracy_reward, GroundTruthStep, RewardConfig};
use webfactory::sitegen::{BBox, SiteBundle};
use webfactory::taskfactory::{step_action, Task, TaskType};

fn gold_actions(bundle: &SiteBundle, task: &Task) -> Vec<StructuredAction> {
    let env = Env::new(bundle);
    let (mut state, _) = env.reset(task, 0).unwrap();
    let mut out = Vec::new();
    for step in &task.gold_path {
        let a = step_action(&env, &state, step).unwrap();
        state = env.apply(&state, &a).unwrap().0;
        out.push(a);
    }
    out
}

fn click_on(env: &Env, state: &EnvState, id: &str) -> StructuredAction {
    let (_, bbox) = env
        .visible(state)
        .into_iter()
        .find(|(e, _)| e.element_id == id)
        .unwrap();
    let (x, y) = Env::click_point(&bbox);
    StructuredAction::click(x, y)
}

#[test]
fn oracle_is_the_upper_bound() {
    let (bundle, tasks) = common::toy();
    let r = eval_policy(&Oracle, &bundle, &tasks, 12, 0).unwrap();
    assert_eq!(r.tcr, 1.0);
    assert_eq!(r.step_efficiency, Some(1.0));
    assert_eq!(
        (r.type_acc, r.grounding_acc, r.step_success_rate),
        (1.0, Some(1.0), 1.0)
    );
    assert_eq!(r.retrieval_f1, Some(1.0));
    assert!(r
        .per_task
        .iter()
        .all(|t| t.key_node_coverage == 1.0 && t.steps_used == t.gold_len));
    assert!(!r.empty);
}

#[test]
fn empty_answer_fails_every_operation_task() {
    let (bundle, tasks) = common::toy();
    let ops: Vec<Task> = tasks
        .into_iter()
        .filter(|t| t.task_type == TaskType::Operation)
        .collect();
    assert!(!ops.is_empty());
    let r = eval_policy(&ConstantAnswer(String::new()), &bundle, &ops, 10, 0).unwrap();
    assert_eq!(r.tcr, 0.0);
    assert_eq!(r.step_efficiency, None);
    assert!(r.per_task.iter().all(|t| t.steps_used == 1));
}

#[test]
fn efficiency_is_gold_over_used() {
    assert_eq!(efficiency(4, 8), 0.5);
    assert_eq!(efficiency(4, 4), 1.0);
    assert_eq!(efficiency(4, 2), 1.0);
    for used in 1..30 {
        assert!(efficiency(5, used + 1) <= efficiency(5, used));
    }
}

#[test]
fn padded_oracle_success_halves_efficiency() {
    let bundle = common::mealdash();
    let task = common::cafe_task(&bundle);
    let n = task.gold_path.len();
    let mut script = vec![StructuredAction::wait(); n];
    script.extend(gold_actions(&bundle, &task));
    let r = eval_policy(&Scripted(script), &bundle, std::slice::from_ref(&task), 2 * n, 0).unwrap();
    assert_eq!(r.tcr, 1.0);
    assert_eq!(r.per_task[0].steps_used, 2 * n);
    assert_eq!(r.step_efficiency, Some(0.5));
}

#[test]
fn listing_answers_succeed_and_wrong_answers_name_the_clause() {
    let bundle = common::mealdash();
    let task = common::cafe_task(&bundle);
    let cfg = RewardConfig::default();
    let mut gold = gold_actions(&bundle, &task);
    for (answer, ok) in [
        ("11 am", true),
        ("11:00", true),
        ("opens at 11:00", true),
        ("closed", false),
    ] {
        *gold.last_mut().unwrap() = StructuredAction::answer(answer);
        let (traj, state) = play_episode(&bundle, &task, &Scripted(gold.clone()), 8, 0, &cfg).unwrap();
        let v = task_success(&traj, &task, &state, &bundle.data_snapshot, &cfg);
        assert_eq!(v.success, ok, "{answer}");
        if !ok {
            assert_eq!(v.reason, Some(FailReason::Answer));
        }
    }
}

#[test]
fn skipping_the_results_page_fails_key_node_order() {
    let bundle = common::mealdash();
    let task = common::cafe_task(&bundle);
    assert!(
        task.key_nodes.iter().any(|k| k.contains("results")),
        "{:?}",
        task.key_nodes
    );
    let env = Env::new(&bundle);
    let (s0, _) = env.reset(&task, 0).unwrap();
    let a0 = click_on(&env, &s0, "nav_browse");
    let s1 = env.apply(&s0, &a0).unwrap().0;
    let a1 = click_on(&env, &s1, "item_cafe_a");
    let script = vec![a0, a1, StructuredAction::answer("11:00")];
    let cfg = RewardConfig::default();
    let (traj, state) = play_episode(&bundle, &task, &Scripted(script), 8, 0, &cfg).unwrap();
    assert_eq!(state.emitted_answer.as_deref(), Some("11:00"));
    let v = task_success(&traj, &task, &state, &bundle.data_snapshot, &cfg);
    assert_eq!(
        v,
        SuccessVerdict {
            success: false,
            reason: Some(FailReason::KeyNodeOrder)
        }
    );
}

fn click_gt() -> GroundTruthStep {
    GroundTruthStep::click(BBox::new(100, 100, 40, 20))
}

#[test]
fn step_metric_examples() {
    let cfg = RewardConfig::default();
    let perfect = vec![
        StepPair {
            predicted: StructuredAction::click(120.0, 110.0),
            gold: click_gt(),
        },
        StepPair {
            predicted: StructuredAction::type_text("Cafe A"),
            gold: GroundTruthStep::text(ActionKind::Type, "Cafe A"),
        },
        StepPair {
            predicted: StructuredAction::answer("11 am"),
            gold: GroundTruthStep::answers(&["11:00", "11 am"]),
        },
    ];
    let m = step_metrics(&perfect, &cfg);
    assert_eq!((m.type_acc, m.gr, m.sr), (1.0, Some(1.0), 1.0));

    // 200 px right of the center: outside the box and beyond 140 px
    let off: Vec<StepPair> = (0..4)
        .map(|_| StepPair {
            predicted: StructuredAction::click(320.0, 110.0),
            gold: click_gt(),
        })
        .collect();
    let m = step_metrics(&off, &cfg);
    assert_eq!((m.type_acc, m.gr, m.sr), (1.0, Some(0.0), 0.0));

    let single = vec![StepPair {
        predicted: StructuredAction::wait(),
        gold: GroundTruthStep::text(ActionKind::Type, "x"),
    }];
    let m = step_metrics(&single, &cfg);
    assert_eq!((m.type_acc, m.gr, m.sr), (0.0, None, 0.0));

    let m = step_metrics(&[], &cfg);
    assert!(m.empty && m.pairs == 0 && m.gr.is_none());
}

#[test]
fn step_success_equals_mean_accuracy_reward() {
    let cfg = RewardConfig::default();
    let preds = [
        StructuredAction::click(120.0, 110.0),
        StructuredAction::click(250.0, 110.0),
        StructuredAction::double_click(120.0, 110.0),
        StructuredAction::type_text("cafe"),
        StructuredAction::keypress("ENTER"),
        StructuredAction::answer("11"),
    ];
    let golds = [
        click_gt(),
        GroundTruthStep::text(ActionKind::Type, "Cafe A"),
        GroundTruthStep::answers(&["11:00"]),
    ];
    let mut pairs = Vec::new();
    for p in &preds {
        for g in &golds {
            pairs.push(StepPair {
                predicted: p.clone(),
                gold: g.clone(),
            });
        }
    }
    let m = step_metrics(&pairs, &cfg);
    let mean = pairs
        .iter()
        .map(|p| f64::from(accuracy_reward(&p.predicted, &p.gold, &cfg).0))
        .sum::<f64>()
        / pairs.len() as f64;
    assert!((m.sr - mean).abs() < 1e-12);
    assert!(m.sr <= m.type_acc);
}

#[test]
fn eval_is_deterministic_and_reports_every_task() {
    let (bundle, tasks) = common::toy();
    let a = eval_policy(&webfactory::collect::Noisy::new(0.3), &bundle, &tasks, 8, 4).unwrap();
    let b = eval_policy(&webfactory::collect::Noisy::new(0.3), &bundle, &tasks, 8, 4).unwrap();
    assert_eq!(a, b);
    assert!(a.tcr > 0.0 && a.tcr < 1.0, "tcr {}", a.tcr);
    let report = render_report(&a);
    assert!(report.contains("tcr"));
    for t in &tasks {
        assert!(report.contains(&t.id));
    }
    let none = eval_policy(&Oracle, &bundle, &[], 8, 4).unwrap();
    assert!(none.empty && none.per_task.is_empty());
}
