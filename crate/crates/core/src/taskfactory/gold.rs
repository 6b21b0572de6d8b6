//! Shortest gold paths by breadth-first search over simulator states.
//!
//! Actions out of a state are expanded in `(element_id, kind)` order and the
//! first path to reach a goal state wins, so among equally short paths the
//! lexicographically smallest element sequence is chosen.

use std::collections::{BTreeSet, HashSet, VecDeque};

use super::task::*;
use crate::env::{ActionKind, Direction, Env, EnvState, StructuredAction};
use crate::error::{Error, Result};
use crate::rewards::normalize_text;
use crate::sitegen::{Effect, Role, SiteBundle};

/// Search limits; a task needing more is reported unsatisfiable.
pub const MAX_GOLD_LEN: usize = 24;
pub const MAX_STATES: usize = 60_000;

/// Env action that realizes a gold step in `state`, if its element is visible.
pub fn step_action(env: &Env, state: &EnvState, step: &GoldStep) -> Option<StructuredAction> {
    let text = step.text.as_deref().unwrap_or("");
    Some(match step.action {
        ActionKind::Click | ActionKind::DoubleClick => {
            let (_, bbox) = env
                .visible(state)
                .into_iter()
                .find(|(e, _)| e.element_id == step.element_id)?;
            let (x, y) = Env::click_point(&bbox);
            StructuredAction::new(step.action, crate::env::Point::At(x, y), None)
        }
        ActionKind::Type => StructuredAction::type_text(text),
        ActionKind::Keypress => StructuredAction::keypress(text),
        ActionKind::Scroll => StructuredAction::scroll(Direction::parse(text)?),
        ActionKind::GetFinalAnswer => StructuredAction::answer(text),
        ActionKind::Wait => StructuredAction::wait(),
        ActionKind::Drag => return None,
    })
}

/// Records whose cart membership can matter for the task.
fn relevant_records(task: &Task, bundle: &SiteBundle) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = BTreeSet::new();
    if let Some(p) = &task.success_predicate {
        out.extend(p.record_refs());
        collect_matching(p, bundle, &mut out);
    }
    out
}

fn collect_matching(p: &SuccessPredicate, bundle: &SiteBundle, out: &mut BTreeSet<String>) {
    match p {
        SuccessPredicate::CartContainsAny {
            collection,
            field,
            op,
            value,
        } => {
            for rec in bundle.data_snapshot.collections.get(collection).into_iter().flatten() {
                let ok = rec
                    .get(field)
                    .and_then(|v| v.as_f64())
                    .is_some_and(|v| op.holds(v, *value));
                if let (true, Some(crate::sitegen::Value::Text(id))) = (ok, rec.get("id")) {
                    out.insert(format!("{collection}/{id}"));
                }
            }
        }
        SuccessPredicate::All { of } => of.iter().for_each(|q| collect_matching(q, bundle, out)),
        _ => {}
    }
}

#[derive(PartialEq, Eq, Hash)]
struct Key {
    page: String,
    scroll: i32,
    revealed: BTreeSet<String>,
    focus: Option<String>,
    forms: Vec<Option<String>>,
    cart: Vec<u32>,
    required_hit: Vec<bool>,
    progress: usize,
}

struct Planner<'a> {
    env: Env<'a>,
    task: &'a Task,
    relevant: BTreeSet<String>,
    input_paths: Vec<String>,
    answer_norm: Option<Vec<String>>,
}

impl<'a> Planner<'a> {
    fn key(&self, s: &EnvState) -> Key {
        Key {
            page: s.current_page.clone(),
            scroll: s.scroll_offset,
            revealed: s.session.revealed.clone(),
            focus: s.session.focus.clone(),
            forms: self
                .input_paths
                .iter()
                .map(|p| s.session.form_values.get(p).cloned())
                .collect(),
            cart: self
                .relevant
                .iter()
                .map(|r| s.session.cart.get(r).copied().unwrap_or(0))
                .collect(),
            required_hit: self
                .task
                .key_nodes
                .iter()
                .map(|k| s.key_nodes_hit.contains(k))
                .collect(),
            progress: progress(&s.key_nodes_hit, &self.task.key_nodes),
        }
    }

    /// Final step if `s` completes the task.
    fn goal_step(&self, s: &EnvState) -> Option<Option<GoldStep>> {
        if progress(&s.key_nodes_hit, &self.task.key_nodes) < self.task.key_nodes.len() {
            return None;
        }
        match &self.answer_norm {
            Some(norm) => {
                let mut hits: Vec<_> = self
                    .env
                    .visible(s)
                    .into_iter()
                    .filter(|(e, _)| e.role == Role::AnswerSource && normalize_text(&e.label_text) == *norm)
                    .map(|(e, _)| e.element_id.clone())
                    .collect();
                hits.sort();
                let el = hits.into_iter().next()?;
                Some(Some(GoldStep {
                    page_id: s.current_page.clone(),
                    element_id: el,
                    action: ActionKind::GetFinalAnswer,
                    text: Some(self.task.expected_answers[0].clone()),
                }))
            }
            None => {
                let pred = self.task.success_predicate.as_ref()?;
                pred.holds(s, &self.env.bundle().data_snapshot).then_some(None)
            }
        }
    }

    fn moves(&self, s: &EnvState) -> Vec<(GoldStep, StructuredAction)> {
        let page = self.env.current_page(s);
        let mut out = Vec::new();
        for (el, bbox) in self.env.visible(s) {
            if !el.role.is_interactable() {
                continue;
            }
            let useful = match &el.effect {
                Effect::None => false,
                Effect::AppendToCollection { record, .. } | Effect::RemoveFromCollection { record, .. } => {
                    self.relevant.contains(&record.to_string())
                }
                _ => true,
            };
            if !useful {
                continue;
            }
            let (x, y) = Env::click_point(&bbox);
            out.push((
                GoldStep {
                    page_id: page.page_id.clone(),
                    element_id: el.element_id.clone(),
                    action: ActionKind::Click,
                    text: None,
                },
                StructuredAction::click(x, y),
            ));
        }
        if let Some(focus) = &s.session.focus {
            let path = page.element(focus).and_then(|e| match &e.effect {
                Effect::SetField(p) => Some(p.clone()),
                _ => None,
            });
            if let Some(path) = path {
                let current = s.session.form_values.get(&path);
                if let Some(want) = self.task.inputs.get(&path) {
                    if current != Some(want) {
                        out.push((
                            GoldStep {
                                page_id: page.page_id.clone(),
                                element_id: focus.clone(),
                                action: ActionKind::Type,
                                text: Some(want.clone()),
                            },
                            StructuredAction::type_text(want),
                        ));
                    }
                }
                if current.is_some_and(|v| !v.is_empty()) {
                    out.push((
                        GoldStep {
                            page_id: page.page_id.clone(),
                            element_id: focus.clone(),
                            action: ActionKind::Keypress,
                            text: Some("ENTER".into()),
                        },
                        StructuredAction::keypress("ENTER"),
                    ));
                }
            }
        }
        for (dir, ok) in [
            (Direction::Down, s.scroll_offset < page.max_scroll()),
            (Direction::Up, s.scroll_offset > 0),
        ] {
            if ok {
                out.push((
                    GoldStep {
                        page_id: page.page_id.clone(),
                        element_id: String::new(),
                        action: ActionKind::Scroll,
                        text: Some(dir.as_str().into()),
                    },
                    StructuredAction::scroll(dir),
                ));
            }
        }
        out.sort_by(|a, b| (&a.0.element_id, a.0.action).cmp(&(&b.0.element_id, b.0.action)));
        out
    }
}

/// Shortest gold path for `task`. The task's key nodes must be hit in order.
pub fn plan_gold_path(task: &Task, bundle: &SiteBundle) -> Result<Vec<GoldStep>> {
    let unsat = |reason: String| Error::Unsatisfiable {
        task_id: task.id.clone(),
        reason,
    };
    let env = Env::new(bundle);
    let (start, _) = env.reset(task, 0).map_err(|e| unsat(e.to_string()))?;
    let answer_norm = match task.task_type {
        TaskType::Retrieval => {
            let first = task
                .expected_answers
                .first()
                .ok_or_else(|| unsat("no expected answer".into()))?;
            Some(normalize_text(first))
        }
        TaskType::Operation => {
            if task.success_predicate.is_none() {
                return Err(unsat("operation task without success predicate".into()));
            }
            None
        }
    };
    let planner = Planner {
        env,
        task,
        relevant: relevant_records(task, bundle),
        input_paths: task.inputs.keys().cloned().collect(),
        answer_norm,
    };
    match planner.goal_step(&start) {
        Some(Some(last)) => return Ok(vec![last]),
        Some(None) => return Err(unsat("goal already holds at the start state".into())),
        None => {}
    }

    // parents[i] = (parent index, step taken)
    let mut nodes: Vec<(EnvState, usize, Option<GoldStep>, usize)> = vec![(start.clone(), usize::MAX, None, 0)];
    let mut seen: HashSet<Key> = HashSet::from([planner.key(&start)]);
    let mut queue = VecDeque::from([0usize]);
    let path_to = |nodes: &Vec<(EnvState, usize, Option<GoldStep>, usize)>, mut i: usize| {
        let mut steps = Vec::new();
        while i != usize::MAX {
            if let Some(s) = &nodes[i].2 {
                steps.push(s.clone());
            }
            i = nodes[i].1;
        }
        steps.reverse();
        steps
    };
    while let Some(i) = queue.pop_front() {
        let depth = nodes[i].3;
        if depth + 1 > MAX_GOLD_LEN {
            continue;
        }
        let state = nodes[i].0.clone();
        for (step, action) in planner.moves(&state) {
            let (next, _) = planner.env.apply(&state, &action)?;
            let key = planner.key(&next);
            // a required node hit ahead of its turn can never be hit again
            if key.required_hit[key.progress..].iter().any(|h| *h) {
                continue;
            }
            if !seen.insert(key) {
                continue;
            }
            let goal = planner.goal_step(&next);
            nodes.push((next, i, Some(step), depth + 1));
            let j = nodes.len() - 1;
            if let Some(last) = goal {
                let mut steps = path_to(&nodes, j);
                steps.extend(last);
                if steps.len() > MAX_GOLD_LEN {
                    return Err(unsat(format!("shortest path exceeds {MAX_GOLD_LEN} steps")));
                }
                return Ok(steps);
            }
            if nodes.len() > MAX_STATES {
                return Err(unsat(format!("search exceeded {MAX_STATES} states")));
            }
            queue.push_back(j);
        }
    }
    Err(unsat("no path reaches the goal".into()))
}

pub fn attach_gold_path(task: &Task, bundle: &SiteBundle) -> Result<Task> {
    let path = plan_gold_path(task, bundle)?;
    let mut out = task.clone();
    out.difficulty = Difficulty::from_len(path.len());
    out.gold_path = path;
    Ok(out)
}

/// Outcome of executing a gold path step by step.
#[derive(Debug, Clone)]
pub struct DryRun {
    pub final_state: EnvState,
    pub steps_executed: usize,
}

/// Replays the gold path and checks it ends in a completed task.
pub fn dry_run(task: &Task, bundle: &SiteBundle) -> std::result::Result<DryRun, String> {
    if task.gold_path.is_empty() {
        return Err("empty gold path".into());
    }
    let env = Env::new(bundle);
    let (mut state, _) = env.reset(task, 0).map_err(|e| e.to_string())?;
    for (i, step) in task.gold_path.iter().enumerate() {
        if state.current_page != step.page_id {
            return Err(format!(
                "step {i}: on `{}`, expected `{}`",
                state.current_page, step.page_id
            ));
        }
        let action =
            step_action(&env, &state, step).ok_or_else(|| format!("step {i}: `{}` not actionable", step.element_id))?;
        state = env.apply(&state, &action).map_err(|e| format!("step {i}: {e}"))?.0;
    }
    if !covers_in_order(&state.key_nodes_hit, &task.key_nodes) {
        return Err(format!(
            "key nodes {:?} not covered by {:?}",
            task.key_nodes, state.key_nodes_hit
        ));
    }
    let done = match task.task_type {
        TaskType::Retrieval => state.emitted_answer.as_deref().is_some_and(|a| {
            crate::rewards::best_f1(a, &task.expected_answers) >= crate::rewards::RewardConfig::default().tau
        }),
        TaskType::Operation => task
            .success_predicate
            .as_ref()
            .is_some_and(|p| p.holds(&state, &bundle.data_snapshot)),
    };
    if !done {
        return Err("gold path does not complete the task".into());
    }
    Ok(DryRun {
        steps_executed: task.gold_path.len(),
        final_state: state,
    })
}
