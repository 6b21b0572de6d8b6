use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::{ActionKind, EnvState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Operation,
    Retrieval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Simple,
    Medium,
    Complex,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Simple, Difficulty::Medium, Difficulty::Complex];

    /// Bracket for a gold-path length; two-step paths fall between brackets.
    pub fn from_len(n: usize) -> Option<Difficulty> {
        match n {
            1 => Some(Difficulty::Simple),
            3..=5 => Some(Difficulty::Medium),
            n if n > 5 => Some(Difficulty::Complex),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Simple => "simple",
            Difficulty::Medium => "medium",
            Difficulty::Complex => "complex",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One step of a gold path. Clicks and answers name the element they act on;
/// `type` and ENTER name the focused field; scrolls carry an empty element id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldStep {
    pub page_id: String,
    pub element_id: String,
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl CmpOp {
    pub fn holds(&self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Le => lhs <= rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            CmpOp::Le => "at most",
            CmpOp::Lt => "below",
            CmpOp::Ge => "at least",
            CmpOp::Gt => "above",
            CmpOp::Eq => "exactly",
        }
    }
}

/// Declarative condition on the final session state of an operation task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessPredicate {
    /// Cart holds `collection/record`.
    CartContains {
        record: String,
    },
    /// Cart holds some record of `collection` whose numeric `field` satisfies `op value`.
    CartContainsAny {
        collection: String,
        field: String,
        op: CmpOp,
        value: f64,
    },
    FormEquals {
        path: String,
        value: String,
    },
    OnPage {
        page: String,
    },
    All {
        of: Vec<SuccessPredicate>,
    },
}

impl SuccessPredicate {
    pub fn holds(&self, state: &EnvState, data: &crate::sitegen::DataSnapshot) -> bool {
        match self {
            SuccessPredicate::CartContains { record } => state.cart_contains(record),
            SuccessPredicate::CartContainsAny {
                collection,
                field,
                op,
                value,
            } => state.session.cart.iter().any(|(r, n)| {
                *n > 0
                    && r.split_once('/').is_some_and(|(c, id)| {
                        c == collection
                            && data
                                .record(&crate::sitegen::RecordRef::new(c, id))
                                .and_then(|rec| rec.get(field))
                                .and_then(|v| v.as_f64())
                                .is_some_and(|v| op.holds(v, *value))
                    })
            }),
            SuccessPredicate::FormEquals { path, value } => state.session.form_values.get(path) == Some(value),
            SuccessPredicate::OnPage { page } => state.current_page == *page,
            SuccessPredicate::All { of } => of.iter().all(|p| p.holds(state, data)),
        }
    }

    /// Record refs (`collection/record`) the predicate names.
    pub fn record_refs(&self) -> Vec<String> {
        match self {
            SuccessPredicate::CartContains { record } => vec![record.clone()],
            SuccessPredicate::All { of } => of.iter().flat_map(|p| p.record_refs()).collect(),
            _ => Vec::new(),
        }
    }

    /// Field refs (`collection.field`) the predicate names.
    pub fn field_refs(&self) -> Vec<String> {
        match self {
            SuccessPredicate::CartContainsAny { collection, field, .. } => vec![format!("{collection}.{field}")],
            SuccessPredicate::All { of } => of.iter().flat_map(|p| p.field_refs()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn pages(&self) -> Vec<String> {
        match self {
            SuccessPredicate::OnPage { page } => vec![page.clone()],
            SuccessPredicate::All { of } => of.iter().flat_map(|p| p.pages()).collect(),
            _ => Vec::new(),
        }
    }
}

/// A goal over one site. Field order is the `tasks.jsonl` key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub site: String,
    pub start_url: String,
    pub goal: String,
    pub task_type: TaskType,
    #[serde(default)]
    pub expected_answers: Vec<String>,
    #[serde(default)]
    pub key_nodes: Vec<String>,
    #[serde(default)]
    pub gold_path: Vec<GoldStep>,
    #[serde(default)]
    pub difficulty: Option<Difficulty>,
    #[serde(default)]
    pub success_predicate: Option<SuccessPredicate>,
    /// Text the solver is expected to type, by form field path.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// Data the goal mentions: `collection/record` and `collection.field`.
    #[serde(default)]
    pub data_refs: Vec<String>,
}

impl Task {
    pub fn is_retrieval(&self) -> bool {
        self.task_type == TaskType::Retrieval
    }

    pub fn gold_len(&self) -> usize {
        self.gold_path.len()
    }
}

/// `needle` occurs in `hay` as an order-preserving subsequence.
pub fn covers_in_order(hay: &[String], needle: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Length of the longest prefix of `needle` matched in order by `hay`.
pub fn progress(hay: &[String], needle: &[String]) -> usize {
    let mut k = 0;
    for h in hay {
        if k < needle.len() && *h == needle[k] {
            k += 1;
        }
    }
    k
}
