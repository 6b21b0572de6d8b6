use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::task::*;
use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::sitegen::{builtin_domains, format_number, format_time_12h, FieldKind, Record, SiteBundle, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Start on the record's own page.
    Direct,
    Browse,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    Answer,
    AddToCart,
    AddMatching,
    Checkout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// A schema field, or `$number` for every numeric field.
    pub field: String,
    pub op: CmpOp,
    /// Threshold; the field's median when absent.
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub name: String,
    pub task_type: TaskType,
    pub route: Route,
    pub goal_kind: GoalKind,
    /// Canonical flow the template relies on.
    pub flow: String,
    /// Goal pattern with `{slot}` placeholders.
    pub goal: String,
    /// Restrict answer templates to one field; all answerable fields otherwise.
    #[serde(default)]
    pub field: Option<String>,
    #[serde(default)]
    pub constraint: Option<Constraint>,
}

impl TaskTemplate {
    pub fn nominal_difficulty(&self) -> Difficulty {
        match (self.route, self.goal_kind) {
            (_, GoalKind::Checkout) => Difficulty::Complex,
            (Route::Direct, _) => Difficulty::Simple,
            _ => Difficulty::Medium,
        }
    }
}

pub fn builtin_templates() -> Vec<TaskTemplate> {
    serde_json::from_str(include_str!("templates.json")).expect("built-in templates parse")
}

/// Relative weights of simple / medium / complex candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyMix {
    pub simple: f64,
    pub medium: f64,
    pub complex: f64,
}

impl Default for DifficultyMix {
    fn default() -> Self {
        DifficultyMix {
            simple: 1.0,
            medium: 1.0,
            complex: 1.0,
        }
    }
}

impl DifficultyMix {
    pub fn weight(&self, d: Difficulty) -> f64 {
        match d {
            Difficulty::Simple => self.simple,
            Difficulty::Medium => self.medium,
            Difficulty::Complex => self.complex,
        }
    }

    pub fn check(&self) -> Result<()> {
        let w = [self.simple, self.medium, self.complex];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!(
                "difficulty mix {w:?} must be non-negative with a positive sum"
            )));
        }
        Ok(())
    }
}

const INPUT_POOL: &[(&str, &[&str])] = &[
    ("name", &["Ada Lovelace", "Grace Hopper", "Alan Turing"]),
    ("guest", &["Ada Lovelace", "Grace Hopper", "Alan Turing"]),
    ("passenger", &["Ada Lovelace", "Grace Hopper", "Alan Turing"]),
    ("driver", &["Ada Lovelace", "Grace Hopper", "Alan Turing"]),
    ("holder", &["Ada Lovelace", "Grace Hopper", "Alan Turing"]),
    ("applicant", &["Ada Lovelace", "Grace Hopper", "Alan Turing"]),
    ("analyst", &["Ada Lovelace", "Grace Hopper", "Alan Turing"]),
    ("recipient", &["ada@example.com", "grace@example.com"]),
    ("email", &["ada@example.com", "grace@example.com"]),
    ("address", &["12 Elm Street", "4 Harbor Road"]),
    ("phone", &["555-0100", "555-0199"]),
    ("seat", &["12A", "3C"]),
    ("passport", &["X1234567", "K7654321"]),
    ("license", &["D-5521", "D-9034"]),
];

fn input_value(field: &str, rng: &mut ChaCha8Rng) -> String {
    match INPUT_POOL.iter().find(|(f, _)| *f == field) {
        Some((_, pool)) => pool[rng.gen_range(0..pool.len())].to_string(),
        None => format!("{} {}", field.replace('_', " "), rng.gen_range(1..100)),
    }
}

/// Human-facing names for a bundle's collection and fields.
struct Vocabulary {
    collection: String,
    entity: String,
    entity_plural: String,
    labels: BTreeMap<String, String>,
    phrases: BTreeMap<String, String>,
}

impl Vocabulary {
    fn of(bundle: &SiteBundle) -> Option<Vocabulary> {
        let collection = bundle.data_snapshot.collections.keys().next()?.clone();
        let mut v = Vocabulary {
            entity: collection.trim_end_matches('s').to_string(),
            entity_plural: collection.clone(),
            collection,
            labels: BTreeMap::new(),
            phrases: BTreeMap::new(),
        };
        if let Some(d) = builtin_domains().into_iter().find(|d| d.name == bundle.site_id) {
            v.entity = d.entity;
            v.entity_plural = d.entity_plural;
            for f in d.fields {
                if let Some(p) = f.answer_phrase {
                    v.phrases.insert(f.name.clone(), p);
                }
                v.labels.insert(f.name, f.label);
            }
        }
        Some(v)
    }

    fn label(&self, field: &str) -> String {
        self.labels
            .get(field)
            .cloned()
            .unwrap_or_else(|| field.replace('_', " "))
    }
}

/// Equivalent renderings of a value: verbatim first.
pub fn answer_variants(value: &Value, kind: FieldKind, phrase: Option<&str>) -> Vec<String> {
    let verbatim = value.render();
    let mut out = vec![verbatim.clone()];
    if kind == FieldKind::Time {
        if let Some(m) = parse_hhmm(&verbatim) {
            out.push(format_time_12h(m));
        }
        if let Some(p) = phrase {
            out.push(format!("{p} {verbatim}"));
        }
    }
    out.dedup();
    out
}

fn parse_hhmm(s: &str) -> Option<u32> {
    let (h, m) = s.split_once(':')?;
    Some(h.parse::<u32>().ok()? * 60 + m.parse::<u32>().ok()?)
}

fn fill(pattern: &str, slots: &BTreeMap<&str, String>) -> String {
    let mut out = pattern.to_string();
    for (k, v) in slots {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn text_field(rec: &Record, f: &str) -> Option<String> {
    match rec.get(f)? {
        Value::Text(s) => Some(s.clone()),
        Value::Number(_) => None,
    }
}

/// Candidates from every template, shuffled with `seed`; candidates whose
/// template difficulty has zero weight are left out. Not validated.
pub fn instantiate_templates(
    bundle: &SiteBundle,
    templates: &[TaskTemplate],
    mix: &DifficultyMix,
    seed: u64,
) -> Result<Vec<(TaskTemplate, Task)>> {
    mix.check()?;
    for t in templates {
        if bundle.flow(&t.flow).is_none() {
            return Err(Error::Config(format!(
                "template `{}` needs flow `{}`, absent from site `{}`",
                t.name, t.flow, bundle.site_id
            )));
        }
    }
    let Some(vocab) = Vocabulary::of(bundle) else {
        return Ok(Vec::new());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "instantiate"));
    let mut out = Vec::new();
    for t in templates {
        if mix.weight(t.nominal_difficulty()) <= 0.0 {
            continue;
        }
        for task in instantiate_one(bundle, &vocab, t, &mut rng) {
            out.push((t.clone(), task));
        }
    }
    out.shuffle(&mut rng);
    Ok(out)
}

fn instantiate_one(bundle: &SiteBundle, vocab: &Vocabulary, t: &TaskTemplate, rng: &mut ChaCha8Rng) -> Vec<Task> {
    let data = &bundle.data_snapshot;
    let coll = &vocab.collection;
    let records = &data.collections[coll];
    let schema = &data.schema[coll];
    let home_url = bundle
        .page(&bundle.start_page)
        .map(|p| p.url_path.clone())
        .unwrap_or_default();
    let checkout_steps = bundle.pages.iter().filter(|p| p.semantics_tag == "checkout").count();

    let mut base_slots = BTreeMap::new();
    base_slots.insert("entity", vocab.entity.clone());
    base_slots.insert("entity_plural", vocab.entity_plural.clone());

    let route_keys = |slug: &str| -> Vec<String> {
        match t.route {
            Route::Direct => vec![],
            Route::Browse => vec!["catalog_list".into(), format!("{slug}_detail_page")],
            Route::Search => vec![
                "search_box".into(),
                "results_list".into(),
                format!("{slug}_detail_page"),
            ],
        }
    };
    let start_url = |slug: &str| -> String {
        match t.route {
            Route::Direct => bundle
                .page(&format!("detail_{slug}"))
                .map(|p| p.url_path.clone())
                .unwrap_or_else(|| format!("{home_url}/{}/{}", vocab.entity, slug.replace('_', "-"))),
            _ => home_url.clone(),
        }
    };
    let mk = |id: String, goal: String, start_url: String, key_nodes: Vec<String>| Task {
        id,
        site: bundle.site_id.clone(),
        start_url,
        goal,
        task_type: t.task_type,
        expected_answers: Vec::new(),
        key_nodes,
        gold_path: Vec::new(),
        difficulty: None,
        success_predicate: None,
        inputs: BTreeMap::new(),
        data_refs: Vec::new(),
    };

    let mut out = Vec::new();
    if t.goal_kind == GoalKind::AddMatching {
        let Some(c) = &t.constraint else {
            return out;
        };
        let fields: Vec<&String> = if c.field == "$number" {
            schema
                .iter()
                .filter(|(_, k)| **k == FieldKind::Number)
                .map(|(f, _)| f)
                .collect()
        } else {
            schema.keys().filter(|f| **f == c.field).collect()
        };
        for field in fields {
            let mut values: Vec<f64> = records.iter().filter_map(|r| r.get(field)?.as_f64()).collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            let threshold = c.value.unwrap_or(values[(values.len() - 1) / 2]);
            if !values.iter().any(|v| c.op.holds(*v, threshold)) {
                continue;
            }
            let mut slots = base_slots.clone();
            slots.insert("field_label", vocab.label(field));
            slots.insert("op", c.op.symbol().into());
            slots.insert("value", format_number(threshold));
            let mut task = mk(
                format!("{}-{}-{}", bundle.site_id, t.name, field),
                fill(&t.goal, &slots),
                home_url.clone(),
                vec!["catalog_list".into(), "add_to_cart".into()],
            );
            task.success_predicate = Some(SuccessPredicate::CartContainsAny {
                collection: coll.clone(),
                field: field.clone(),
                op: c.op,
                value: threshold,
            });
            task.data_refs = vec![format!("{coll}.{field}")];
            out.push(task);
        }
        return out;
    }

    for rec in records {
        let (Some(slug), Some(name)) = (text_field(rec, "id"), text_field(rec, "name")) else {
            continue;
        };
        let record_ref = format!("{coll}/{slug}");
        let mut slots = base_slots.clone();
        slots.insert("name", name.clone());
        let mut keys = route_keys(&slug);
        let mut inputs = BTreeMap::new();
        if t.route == Route::Search {
            inputs.insert("search.query".to_string(), name.clone());
        }
        match t.goal_kind {
            GoalKind::Answer => {
                let fields: Vec<(&String, &FieldKind)> = schema
                    .iter()
                    .filter(|(f, _)| *f != "id" && *f != "name")
                    .filter(|(f, _)| t.field.as_ref().is_none_or(|only| only == *f))
                    .collect();
                for (field, kind) in fields {
                    let Some(value) = rec.get(field) else {
                        continue;
                    };
                    let mut slots = slots.clone();
                    slots.insert("field_label", vocab.label(field));
                    slots.insert(
                        "format_hint",
                        if *kind == FieldKind::Time {
                            ", formatted as HH:MM in 24-hour style".into()
                        } else {
                            String::new()
                        },
                    );
                    let mut task = mk(
                        format!("{}-{}-{}-{}", bundle.site_id, t.name, slug, field),
                        fill(&t.goal, &slots),
                        start_url(&slug),
                        keys.clone(),
                    );
                    task.expected_answers = answer_variants(value, *kind, vocab.phrases.get(field).map(String::as_str));
                    task.inputs = inputs.clone();
                    task.data_refs = vec![record_ref.clone(), format!("{coll}.{field}")];
                    out.push(task);
                }
            }
            GoalKind::AddToCart => {
                keys.push("add_to_cart".into());
                let mut task = mk(
                    format!("{}-{}-{}", bundle.site_id, t.name, slug),
                    fill(&t.goal, &slots),
                    start_url(&slug),
                    keys,
                );
                task.success_predicate = Some(SuccessPredicate::CartContains {
                    record: record_ref.clone(),
                });
                task.inputs = inputs;
                task.data_refs = vec![record_ref];
                out.push(task);
            }
            GoalKind::Checkout => {
                if checkout_steps == 0 {
                    continue;
                }
                keys.push("add_to_cart".into());
                keys.push("cart_page".into());
                let mut preds = vec![SuccessPredicate::CartContains {
                    record: record_ref.clone(),
                }];
                let mut described = Vec::new();
                for k in 1..=checkout_steps {
                    keys.push(format!("checkout_step_{k}"));
                    let Some(page) = bundle.page(&format!("checkout_{k}")) else {
                        continue;
                    };
                    for el in &page.elements {
                        if let crate::sitegen::Effect::SetField(path) = &el.effect {
                            let fname = path.rsplit('.').next().unwrap_or(path);
                            // a field repeated on a later step keeps its first value
                            let v = match inputs.get(path) {
                                Some(v) => String::clone(v),
                                None => input_value(fname, rng),
                            };
                            if inputs.insert(path.clone(), v.clone()).is_none() {
                                described.push(format!("{fname} {v}"));
                                preds.push(SuccessPredicate::FormEquals {
                                    path: path.clone(),
                                    value: v,
                                });
                            }
                        }
                    }
                }
                keys.push("order_confirmed".into());
                preds.push(SuccessPredicate::OnPage {
                    page: "confirmation".into(),
                });
                slots.insert("inputs", described.join(" and "));
                let mut task = mk(
                    format!("{}-{}-{}", bundle.site_id, t.name, slug),
                    fill(&t.goal, &slots),
                    start_url(&slug),
                    keys,
                );
                task.success_predicate = Some(SuccessPredicate::All { of: preds });
                task.inputs = inputs;
                task.data_refs = vec![record_ref];
                out.push(task);
            }
            GoalKind::AddMatching => unreachable!("handled above"),
        }
    }
    out
}
