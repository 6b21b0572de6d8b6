use serde::{Deserialize, Serialize};

use super::gold::dry_run;
use super::task::*;
use crate::env::{ActionKind, SCROLL_QUANTUM};
use crate::rewards::normalize_text;
use crate::sitegen::{Page, RecordRef, SiteBundle, Visibility, VIEWPORT_H};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub schema_ok: bool,
    pub visible: bool,
    pub path_feasible: bool,
    pub answerable: bool,
    pub pass: bool,
    /// One message per failed check, prefixed by the validator name.
    pub failures: Vec<String>,
}

impl ValidationVerdict {
    /// Static checks only (no dry run).
    pub fn static_ok(&self) -> bool {
        self.schema_ok && self.visible && self.answerable
    }

    pub fn failed_validators(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (ok, name) in [
            (self.schema_ok, "schema"),
            (self.visible, "visible"),
            (self.path_feasible, "path_feasible"),
            (self.answerable, "answerable"),
        ] {
            if !ok {
                v.push(name);
            }
        }
        v
    }
}

/// Scroll offsets the env can reach on `page`.
pub fn reachable_offsets(page: &Page) -> Vec<i32> {
    let max = page.max_scroll();
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let off = (k * SCROLL_QUANTUM).min(max);
        out.push(off);
        if off >= max {
            break;
        }
        k += 1;
    }
    out
}

/// Whether the element can become visible at some reachable scroll offset
/// (revealed elements count if their parent can).
pub fn can_become_visible(page: &Page, element_id: &str) -> bool {
    fn go(page: &Page, id: &str, depth: usize) -> bool {
        let Some(el) = page.element(id) else {
            return false;
        };
        match &el.visibility {
            Visibility::Always => true,
            Visibility::ScrollBand(lo, hi) => reachable_offsets(page)
                .into_iter()
                .any(|off| *lo < off + VIEWPORT_H && *hi > off),
            Visibility::RevealedBy(parent) => depth < 8 && go(page, parent, depth + 1),
        }
    }
    go(page, element_id, 0)
}

fn schema_problems(task: &Task, bundle: &SiteBundle) -> Vec<String> {
    let mut out = Vec::new();
    let data = &bundle.data_snapshot;
    if !task.site.eq_ignore_ascii_case(&bundle.site_id) {
        out.push(format!("site `{}` is not `{}`", task.site, bundle.site_id));
    }
    if bundle.page_by_url(&task.start_url).is_none() {
        out.push(format!("start_url `{}` resolves to no page", task.start_url));
    }
    for k in &task.key_nodes {
        if !bundle.key_node_registry.contains(k) {
            out.push(format!("key node `{k}` not in registry"));
        }
    }
    let mut record_refs: Vec<String> = Vec::new();
    let mut field_refs: Vec<String> = Vec::new();
    for r in &task.data_refs {
        if r.contains('/') {
            record_refs.push(r.clone());
        } else {
            field_refs.push(r.clone());
        }
    }
    if let Some(p) = &task.success_predicate {
        record_refs.extend(p.record_refs());
        field_refs.extend(p.field_refs());
        for page in p.pages() {
            if bundle.page(&page).is_none() {
                out.push(format!("predicate page `{page}` missing"));
            }
        }
    }
    for r in record_refs {
        let found = r
            .split_once('/')
            .is_some_and(|(c, id)| data.record(&RecordRef::new(c, id)).is_some());
        if !found {
            out.push(format!("record `{r}` not in data snapshot"));
        }
    }
    for f in field_refs {
        let found = f.split_once('.').is_some_and(|(c, field)| data.has_field(c, field));
        if !found {
            out.push(format!("field `{f}` not in data schema"));
        }
    }
    match task.task_type {
        TaskType::Retrieval if task.expected_answers.is_empty() => out.push("retrieval task without answers".into()),
        TaskType::Operation if task.success_predicate.is_none() => out.push("operation task without predicate".into()),
        _ => {}
    }
    out
}

fn visibility_problems(task: &Task, bundle: &SiteBundle) -> Vec<String> {
    let mut out = Vec::new();
    for (i, step) in task.gold_path.iter().enumerate() {
        let needs_element = matches!(
            step.action,
            ActionKind::Click | ActionKind::DoubleClick | ActionKind::GetFinalAnswer
        );
        if !needs_element {
            continue;
        }
        match bundle.page(&step.page_id) {
            None => out.push(format!("step {i}: page `{}` missing", step.page_id)),
            Some(page) if !can_become_visible(page, &step.element_id) => out.push(format!(
                "step {i}: `{}/{}` never visible",
                step.page_id, step.element_id
            )),
            _ => {}
        }
    }
    out
}

/// Values of the referenced fields on the referenced records; the whole
/// snapshot when the task names none.
fn referenced_values(task: &Task, bundle: &SiteBundle) -> Vec<String> {
    let data = &bundle.data_snapshot;
    let records: Vec<(&str, &str)> = task.data_refs.iter().filter_map(|r| r.split_once('/')).collect();
    let fields: Vec<(&str, &str)> = task
        .data_refs
        .iter()
        .filter(|r| !r.contains('/'))
        .filter_map(|r| r.split_once('.'))
        .collect();
    let mut out = Vec::new();
    if records.is_empty() && fields.is_empty() {
        for recs in data.collections.values() {
            for rec in recs {
                out.extend(rec.values().map(|v| v.render()));
            }
        }
        return out;
    }
    for (c, id) in &records {
        let Some(rec) = data.record(&RecordRef::new(*c, *id)) else {
            continue;
        };
        for (fc, f) in &fields {
            if fc == c {
                if let Some(v) = rec.get(*f) {
                    out.push(v.render());
                }
            }
        }
    }
    out
}

fn answerable(task: &Task, bundle: &SiteBundle) -> bool {
    if task.task_type == TaskType::Operation {
        return true;
    }
    let values: Vec<Vec<String>> = referenced_values(task, bundle)
        .iter()
        .map(|v| normalize_text(v))
        .collect();
    task.expected_answers
        .iter()
        .any(|a| values.contains(&normalize_text(a)))
}

/// Runs the four validators. Path feasibility is a dry run of the gold path.
pub fn validate_task(task: &Task, bundle: &SiteBundle) -> ValidationVerdict {
    let mut failures = Vec::new();
    let schema = schema_problems(task, bundle);
    let schema_ok = schema.is_empty();
    failures.extend(schema.into_iter().map(|m| format!("schema: {m}")));
    let vis = visibility_problems(task, bundle);
    let visible = vis.is_empty();
    failures.extend(vis.into_iter().map(|m| format!("visible: {m}")));

    let mut path_feasible = schema_ok;
    if schema_ok {
        if let Err(m) = dry_run(task, bundle) {
            path_feasible = false;
            failures.push(format!("path_feasible: {m}"));
        } else if task.difficulty.is_none() || task.difficulty != Difficulty::from_len(task.gold_path.len()) {
            path_feasible = false;
            failures.push(format!(
                "path_feasible: difficulty {:?} does not match {} steps",
                task.difficulty,
                task.gold_path.len()
            ));
        }
    } else {
        failures.push("path_feasible: skipped after schema failure".into());
    }
    let answerable = answerable(task, bundle);
    if !answerable {
        failures.push("answerable: no expected answer matches the referenced data".into());
    }
    ValidationVerdict {
        schema_ok,
        visible,
        path_feasible,
        answerable,
        pass: schema_ok && visible && path_feasible && answerable,
        failures,
    }
}
