//! Response parsing and the decomposed step reward.
//!
//! `R = alpha * R_format + beta * R_accuracy`, both parts binary. Accuracy is
//! gated on the action type, then checked per action family.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::env::{ActionKind, Direction, Point, StructuredAction};
use crate::sitegen::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    /// F1 threshold for text and answer matches.
    pub tau: f64,
    pub click_tolerance: f64,
    pub drag_epsilon: f64,
    /// Accept clicks only inside the target box (no center tolerance).
    #[serde(default)]
    pub strict_bbox: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.2,
            beta: 0.8,
            tau: 0.5,
            click_tolerance: 140.0,
            drag_epsilon: 140.0,
            strict_bbox: false,
        }
    }
}

impl RewardConfig {
    pub fn check(&self) -> crate::Result<()> {
        let ok = self.alpha.is_finite()
            && self.beta.is_finite()
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.tau > 0.0
            && self.tau <= 1.0
            && self.click_tolerance >= 0.0
            && self.drag_epsilon >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!("invalid reward config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFlags {
    pub tags_present: bool,
    pub json_valid: bool,
    pub action_in_enum: bool,
    pub params_typed: bool,
    pub conditional_fields_ok: bool,
}

impl ParseFlags {
    pub fn all(&self) -> bool {
        self.tags_present && self.json_valid && self.action_in_enum && self.params_typed && self.conditional_fields_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub think_text: Option<String>,
    pub action: Option<StructuredAction>,
    pub parse_flags: ParseFlags,
}

fn between<'a>(s: &'a str, open: &str, close: &str) -> Option<(&'a str, usize)> {
    let start = s.find(open)? + open.len();
    let len = s[start..].find(close)?;
    Some((&s[start..start + len], start + len + close.len()))
}

/// Parses `<think>…</think><answer>{json}</answer>`. Never fails; every
/// structural check lands in a flag.
pub fn parse_response(raw: &str) -> ParsedResponse {
    let mut flags = ParseFlags::default();
    let think = between(raw, "<think>", "</think>");
    let answer = between(raw, "<answer>", "</answer>");
    flags.tags_present = match (think, answer) {
        (Some((_, think_end)), Some((body, _))) => {
            // the answer block must follow the think block
            raw[think_end..].contains("<answer>") && !body.contains("<answer>")
        }
        _ => false,
    };
    let think_text = think.map(|(t, _)| t.to_string());
    let Some((body, _)) = answer else {
        return ParsedResponse {
            think_text,
            action: None,
            parse_flags: flags,
        };
    };
    let Ok(Json::Object(obj)) = serde_json::from_str::<Json>(body.trim()) else {
        return ParsedResponse {
            think_text,
            action: None,
            parse_flags: flags,
        };
    };
    flags.json_valid = true;
    let act = obj.get("action").and_then(Json::as_str).and_then(ActionKind::parse);
    flags.action_in_enum = act.is_some();
    let point = obj.get("point").and_then(Point::from_json);
    let text = match obj.get("text") {
        None | Some(Json::Null) => Some(None),
        Some(Json::String(s)) => Some(Some(s.clone())),
        Some(_) => None,
    };
    flags.params_typed = point.is_some() && text.is_some();
    let action = match (act, point, text) {
        (Some(act), Some(point), Some(text)) => Some(StructuredAction::new(act, point, text)),
        _ => None,
    };
    flags.conditional_fields_ok = action.as_ref().is_some_and(|a| a.conditional_problem().is_none());
    ParsedResponse {
        think_text,
        action,
        parse_flags: flags,
    }
}

pub fn format_reward(parsed: &ParsedResponse) -> u8 {
    u8::from(parsed.parse_flags.all())
}

/// Lowercased, whitespace-split tokens with punctuation trimmed from token
/// edges. Inner punctuation (`11:00`, `4.5`) survives.
pub fn normalize_text(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|t| {
            t.to_lowercase()
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Multiset token F1. Two single-token sides compare by exact match.
pub fn token_f1(pred: &str, reference: &str) -> f64 {
    let p = normalize_text(pred);
    let r = normalize_text(reference);
    match (p.len(), r.len()) {
        (0, 0) => return 1.0,
        (0, _) | (_, 0) => return 0.0,
        (1, 1) => return if p[0] == r[0] { 1.0 } else { 0.0 },
        _ => {}
    }
    let mut counts = std::collections::HashMap::<&str, i64>::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / p.len() as f64;
    let recall = overlap as f64 / r.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best F1 of `pred` against any reference.
pub fn best_f1(pred: &str, refs: &[String]) -> f64 {
    refs.iter().map(|r| token_f1(pred, r)).fold(0.0, f64::max)
}

/// Reference data for scoring one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthStep {
    pub gt_type: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_set: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_drag: Option<[[f64; 2]; 2]>,
}

impl GroundTruthStep {
    pub fn of_type(gt_type: ActionKind) -> Self {
        GroundTruthStep {
            gt_type,
            gt_bbox: None,
            gt_text: None,
            answer_set: None,
            gt_drag: None,
        }
    }

    pub fn click(bbox: BBox) -> Self {
        GroundTruthStep {
            gt_bbox: Some(bbox),
            ..Self::of_type(ActionKind::Click)
        }
    }

    pub fn text(kind: ActionKind, text: &str) -> Self {
        GroundTruthStep {
            gt_text: Some(text.into()),
            ..Self::of_type(kind)
        }
    }

    pub fn answers<S: AsRef<str>>(answers: &[S]) -> Self {
        GroundTruthStep {
            answer_set: Some(answers.iter().map(|a| a.as_ref().to_string()).collect()),
            ..Self::of_type(ActionKind::GetFinalAnswer)
        }
    }

    pub fn drag(from: (f64, f64), to: (f64, f64)) -> Self {
        GroundTruthStep {
            gt_drag: Some([[from.0, from.1], [to.0, to.1]]),
            ..Self::of_type(ActionKind::Drag)
        }
    }

    /// Fields required by the type are present.
    pub fn is_well_formed(&self) -> bool {
        match self.gt_type {
            ActionKind::Click | ActionKind::DoubleClick => self.gt_bbox.is_some(),
            ActionKind::Type | ActionKind::Keypress | ActionKind::Scroll => self.gt_text.is_some(),
            ActionKind::GetFinalAnswer => self.answer_set.is_some(),
            ActionKind::Drag => self.gt_drag.is_some(),
            ActionKind::Wait => true,
        }
    }
}

/// Which accuracy branch decided the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Unparsed,
    TypeMismatch,
    Click,
    TextF1,
    AnswerF1,
    Drag,
    Otherwise,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::Unparsed => "unparsed",
            Rule::TypeMismatch => "type_mismatch",
            Rule::Click => "click",
            Rule::TextF1 => "text_f1",
            Rule::AnswerF1 => "answer_f1",
            Rule::Drag => "drag",
            Rule::Otherwise => "otherwise",
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Click-correctness rule shared with grounding metrics.
pub fn click_hits(point: (f64, f64), bbox: &BBox, cfg: &RewardConfig) -> bool {
    if bbox.contains_closed(point.0, point.1) {
        return true;
    }
    !cfg.strict_bbox && dist(point, bbox.center()) <= cfg.click_tolerance
}

fn drag_direction(from: (f64, f64), to: (f64, f64)) -> Direction {
    if to.1 < from.1 {
        Direction::Up
    } else {
        Direction::Down
    }
}

pub fn accuracy_reward(action: &StructuredAction, gt: &GroundTruthStep, cfg: &RewardConfig) -> (u8, Rule) {
    if action.act != gt.gt_type {
        return (0, Rule::TypeMismatch);
    }
    let text = action.text_or_empty();
    match action.act {
        ActionKind::Click | ActionKind::DoubleClick => {
            let hit = match (action.point, gt.gt_bbox) {
                (Point::At(x, y), Some(b)) => click_hits((x, y), &b, cfg),
                _ => false,
            };
            (u8::from(hit), Rule::Click)
        }
        ActionKind::Type | ActionKind::Keypress | ActionKind::Scroll => {
            let f1 = gt.gt_text.as_deref().map_or(0.0, |r| token_f1(text, r));
            (u8::from(f1 >= cfg.tau), Rule::TextF1)
        }
        ActionKind::GetFinalAnswer => {
            let f1 = gt.answer_set.as_deref().map_or(0.0, |refs| best_f1(text, refs));
            (u8::from(f1 >= cfg.tau), Rule::AnswerF1)
        }
        ActionKind::Drag => {
            let ok = match (action.point, gt.gt_drag) {
                (Point::Span(a, b), Some([g0, g1])) => {
                    let (g0, g1) = ((g0[0], g0[1]), (g1[0], g1[1]));
                    let want = gt
                        .gt_text
                        .as_deref()
                        .and_then(Direction::parse)
                        .unwrap_or_else(|| drag_direction(g0, g1));
                    dist(a, g0) <= cfg.drag_epsilon
                        && dist(b, g1) <= cfg.drag_epsilon
                        && Direction::parse(text) == Some(want)
                }
                _ => false,
            };
            (u8::from(ok), Rule::Drag)
        }
        ActionKind::Wait => (1, Rule::Otherwise),
    }
}

/// Per-step reward with its parts. Serialized with the short trajectory keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    #[serde(rename = "rf")]
    pub r_format: u8,
    #[serde(rename = "racc")]
    pub r_accuracy: u8,
    #[serde(rename = "rt")]
    pub r_total: f64,
    #[serde(rename = "rule")]
    pub rule_fired: Rule,
}

impl RewardBreakdown {
    pub fn compose(r_format: u8, r_accuracy: u8, rule: Rule, cfg: &RewardConfig) -> Self {
        RewardBreakdown {
            r_format,
            r_accuracy,
            r_total: cfg.alpha * f64::from(r_format) + cfg.beta * f64::from(r_accuracy),
            rule_fired: rule,
        }
    }
}

pub fn step_reward(parsed: &ParsedResponse, gt: &GroundTruthStep, cfg: &RewardConfig) -> RewardBreakdown {
    let rf = format_reward(parsed);
    let (racc, rule) = match &parsed.action {
        Some(a) => accuracy_reward(a, gt, cfg),
        None => (0, Rule::Unparsed),
    };
    RewardBreakdown::compose(rf, racc, rule, cfg)
}

/// Scores a raw model response in one call.
pub fn score_response(raw: &str, gt: &GroundTruthStep, cfg: &RewardConfig) -> RewardBreakdown {
    step_reward(&parse_response(raw), gt, cfg)
}
