use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::env::{Direction, Env, EnvState, Observation, StructuredAction};
use crate::hash::{fnv1a, Fnv64};
use crate::sitegen::{BBox, Role};
use crate::taskfactory::Task;

/// Bumped whenever the feature templates change; part of the digest.
pub const FEATURE_VERSION: u32 = 1;

const STOP_WORDS: &[&str] = &[
    "an", "and", "any", "its", "it", "me", "of", "on", "the", "to", "with", "for", "is", "in",
];

const ID_PREFIXES: &[&str] = &["ans", "item", "result", "nav"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Hashed feature space size; a power of two.
    pub dim: usize,
    /// Goal tokens used in conjunctions, in goal order.
    pub max_goal_tokens: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dim: 1 << 16,
            max_goal_tokens: 16,
        }
    }
}

impl FeatureConfig {
    pub fn check(&self) -> crate::Result<()> {
        if !self.dim.is_power_of_two() || self.dim < 64 {
            return Err(crate::Error::Config(format!(
                "feature dim {} must be a power of two ≥ 64",
                self.dim
            )));
        }
        if self.max_goal_tokens == 0 {
            return Err(crate::Error::Config("max_goal_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Identifies the feature space a weight vector was trained in.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_field(b"webfactory-features");
        h.write(&FEATURE_VERSION.to_le_bytes());
        h.write(&(self.dim as u64).to_le_bytes());
        h.write(&(self.max_goal_tokens as u64).to_le_bytes());
        h.finish()
    }

    pub fn index(&self, key: &str) -> u32 {
        (fnv1a(key.as_bytes()) & (self.dim as u64 - 1)) as u32
    }
}

/// One enumerable action on the current page.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub action: StructuredAction,
    pub element_id: Option<String>,
    pub role: Option<Role>,
    pub label: String,
    pub bbox: Option<BBox>,
    /// Form path whose task input a `type` candidate enters.
    pub input_path: Option<String>,
}

impl Candidate {
    fn bare(action: StructuredAction) -> Self {
        Candidate {
            action,
            element_id: None,
            role: None,
            label: String::new(),
            bbox: None,
            input_path: None,
        }
    }
}

/// Sorted `(index, value)` pairs with distinct indices.
pub type SparseVec = Vec<(u32, f64)>;

pub fn dot(w: &[f64], x: &SparseVec) -> f64 {
    x.iter().map(|(i, v)| w[*i as usize] * v).sum()
}

/// The page's action set: a click per visible interactable element, scrolls
/// that move the viewport, ENTER and one `type` per task input when a field is
/// focused, and an answer per visible answer source.
pub fn enumerate_candidates(env: &Env, state: &EnvState, task: &Task) -> Vec<Candidate> {
    let obs = env.observe(state);
    let page = env.current_page(state);
    let mut out = Vec::new();
    for el in &obs.visible_elements {
        let (x, y) = Env::click_point(&el.bbox);
        let base = Candidate {
            action: StructuredAction::click(x, y),
            element_id: Some(el.element_id.clone()),
            role: Some(el.role),
            label: el.label_text.clone(),
            bbox: Some(el.bbox),
            input_path: None,
        };
        if el.role == Role::AnswerSource {
            out.push(Candidate {
                action: StructuredAction::answer(&el.label_text),
                ..base
            });
        } else {
            out.push(base);
        }
    }
    if state.scroll_offset < page.max_scroll() {
        out.push(Candidate::bare(StructuredAction::scroll(Direction::Down)));
    }
    if state.scroll_offset > 0 {
        out.push(Candidate::bare(StructuredAction::scroll(Direction::Up)));
    }
    if let Some(focus) = &state.session.focus {
        let role = page.element(focus).map(|e| e.role);
        for (path, text) in &task.inputs {
            out.push(Candidate {
                element_id: Some(focus.clone()),
                role,
                input_path: Some(path.clone()),
                ..Candidate::bare(StructuredAction::type_text(text))
            });
        }
        out.push(Candidate {
            element_id: Some(focus.clone()),
            role,
            ..Candidate::bare(StructuredAction::keypress("ENTER"))
        });
    }
    out
}

/// Lowercased alphanumeric runs with a crude plural strip, so `stars` meets
/// `star` and `check-in` meets `check_in`.
fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.to_lowercase();
            if let Some(stem) = t.strip_suffix("ing").filter(|s| s.len() >= 3) {
                return stem.to_string();
            }
            match t.strip_suffix('s') {
                Some(stem) if stem.len() >= 3 && !stem.ends_with('s') => stem.to_string(),
                _ => t,
            }
        })
        .collect()
}

fn goal_tokens(goal: &str, cfg: &FeatureConfig) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tokens(goal)
        .into_iter()
        .filter(|t| !STOP_WORDS.contains(&t.as_str()) && seen.insert(t.clone()))
        .take(cfg.max_goal_tokens)
        .collect()
}

fn overlap(tokens: &[String], goal: &BTreeSet<String>) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    tokens.iter().filter(|t| goal.contains(*t)).count() as f64 / tokens.len() as f64
}

/// Named features before hashing; exposed for collision analysis.
pub fn feature_keys(obs: &Observation, cand: &Candidate, cfg: &FeatureConfig) -> Vec<(String, f64)> {
    let kind = cand.action.act.as_str();
    let tag = obs.semantics_tag.as_str();
    // a field's features are split by whether it already holds text
    let filled = cand.role == Some(Role::Field)
        && cand
            .element_id
            .as_deref()
            .and_then(|id| obs.element(id))
            .is_some_and(|e| e.label_text.contains(": "));
    let role_name = cand.role.map_or("none", |r| r.as_str());
    let role = match cand.role {
        Some(Role::Field) if filled => format!("{role_name}:filled"),
        Some(Role::Field) => format!("{role_name}:empty"),
        _ => role_name.to_string(),
    };
    let role = role.as_str();
    let goal_list = goal_tokens(&obs.goal_text, cfg);
    let all_goal: BTreeSet<String> = tokens(&obs.goal_text)
        .into_iter()
        .filter(|t| !STOP_WORDS.contains(&t.as_str()))
        .collect();
    let mut f: Vec<(String, f64)> = vec![
        (format!("k|{kind}"), 1.0),
        (format!("kr|{kind}|{role}"), 1.0),
        (format!("tkr|{tag}|{kind}|{role}"), 1.0),
    ];
    let mut sub = String::from(role);
    if cand.action.act.as_str() == "scroll" || cand.action.act.as_str() == "keypress" {
        sub = format!("{role}:{}", cand.action.text_or_empty().to_lowercase());
        f.push((format!("tks|{tag}|{kind}|{sub}"), 1.0));
    }
    for g in &goal_list {
        f.push((format!("g|{g}|{tag}|{kind}|{sub}"), 1.0));
    }
    if let Some(b) = &cand.bbox {
        let (cx, cy) = b.center();
        let (xb, yb) = ((cx / 320.0).floor() as i64, (cy / 256.0).floor() as i64);
        f.push((format!("p|{tag}|{kind}|{role}|{xb}|{yb}"), 1.0));
    }
    if let Some(id) = &cand.element_id {
        let label_tokens: Vec<String> = if cand.role == Some(Role::AnswerSource) {
            Vec::new()
        } else {
            tokens(&cand.label)
        };
        // role prefixes (`ans_price`, `item_cafe_a`) say nothing about the goal
        let mut ids: Vec<String> = tokens(id)
            .into_iter()
            .filter(|t| !STOP_WORDS.contains(&t.as_str()))
            .collect();
        if ids.len() > 1 && ID_PREFIXES.contains(&ids[0].as_str()) {
            ids.remove(0);
        }
        let lo = overlap(&label_tokens, &all_goal);
        let io = overlap(&ids, &all_goal);
        f.push((format!("ov|{kind}|{role}"), lo));
        f.push((format!("idov|{kind}|{role}"), io));
        f.push((format!("idov|{tag}|{kind}|{role}"), io));
        if lo == 1.0 {
            f.push((format!("full|{kind}|{role}"), 1.0));
        }
        if io == 1.0 {
            f.push((format!("fullid|{kind}|{role}"), 1.0));
            f.push((format!("fullid|{tag}|{kind}|{role}"), 1.0));
        }
        for t in ids.iter().chain(&label_tokens).filter(|t| all_goal.contains(*t)) {
            f.push((format!("m|{t}|{tag}|{kind}"), 1.0));
        }
        let focused = obs.focused.as_deref() == Some(id.as_str());
        if focused {
            f.push((format!("foc|{kind}|{role}"), 1.0));
            f.push((format!("foc|{tag}|{kind}|{role}"), 1.0));
        }
    }
    match cand.action.act.as_str() {
        "type" => {
            let text = cand.action.text_or_empty();
            // input path leaf (`checkout.guest` → guest) named by the focused field's id
            let leaf: Vec<String> = cand
                .input_path
                .as_deref()
                .and_then(|p| p.rsplit('.').next())
                .map(tokens)
                .unwrap_or_default();
            let field: Vec<String> = cand.element_id.as_deref().map(tokens).unwrap_or_default();
            let path_match = leaf.iter().any(|t| field.contains(t));
            if path_match {
                f.push(("ty|path".into(), 1.0));
            }
            let shown = cand
                .element_id
                .as_deref()
                .and_then(|id| obs.element(id))
                .is_some_and(|e| e.label_text.ends_with(&format!(": {text}")));
            f.push((format!("ty|dup|{shown}"), 1.0));
        }
        "keypress" => {
            let filled = cand
                .element_id
                .as_deref()
                .and_then(|id| obs.element(id))
                .is_some_and(|e| e.label_text.contains(": "));
            f.push((format!("kp|filled|{filled}"), 1.0));
        }
        _ => {}
    }
    f
}

pub fn featurize(obs: &Observation, cand: &Candidate, cfg: &FeatureConfig) -> SparseVec {
    let mut v: Vec<(u32, f64)> = feature_keys(obs, cand, cfg)
        .into_iter()
        .filter(|(_, x)| *x != 0.0)
        .map(|(k, x)| (cfg.index(&k), x))
        .collect();
    v.sort_by_key(|(i, _)| *i);
    let mut out: SparseVec = Vec::with_capacity(v.len());
    for (i, x) in v {
        match out.last_mut() {
            Some((j, y)) if *j == i => *y += x,
            _ => out.push((i, x)),
        }
    }
    out
}
