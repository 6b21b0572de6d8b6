use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Logical viewport shared by every bundle.
pub const VIEWPORT_W: i32 = 1280;
pub const VIEWPORT_H: i32 = 1024;

/// Axis-aligned box in logical pixels, serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct BBox {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl From<[i32; 4]> for BBox {
    fn from(v: [i32; 4]) -> Self {
        BBox {
            x: v[0],
            y: v[1],
            w: v[2],
            h: v[3],
        }
    }
}

impl From<BBox> for [i32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        BBox { x, y, w, h }
    }

    pub fn area(&self) -> i64 {
        i64::from(self.w) * i64::from(self.h)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x) + f64::from(self.w) / 2.0,
            f64::from(self.y) + f64::from(self.h) / 2.0,
        )
    }

    /// Half-open containment, used for hit-testing so adjacent boxes never share a pixel.
    pub fn contains_half_open(&self, px: f64, py: f64) -> bool {
        px >= f64::from(self.x)
            && px < f64::from(self.x + self.w)
            && py >= f64::from(self.y)
            && py < f64::from(self.y + self.h)
    }

    /// Closed containment, used by the click reward.
    pub fn contains_closed(&self, px: f64, py: f64) -> bool {
        px >= f64::from(self.x)
            && px <= f64::from(self.x + self.w)
            && py >= f64::from(self.y)
            && py <= f64::from(self.y + self.h)
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    pub fn shifted(&self, dy: i32) -> BBox {
        BBox {
            y: self.y - dy,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Button,
    Link,
    Field,
    Option,
    ListItem,
    AnswerSource,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Button => "button",
            Role::Link => "link",
            Role::Field => "field",
            Role::Option => "option",
            Role::ListItem => "list-item",
            Role::AnswerSource => "answer-source",
        }
    }

    /// Roles a policy may target with a click.
    pub fn is_interactable(&self) -> bool {
        !matches!(self, Role::AnswerSource)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference to one record of a data-snapshot collection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordRef {
    pub collection: String,
    pub record: String,
}

impl RecordRef {
    pub fn new(collection: impl Into<String>, record: impl Into<String>) -> Self {
        RecordRef {
            collection: collection.into(),
            record: record.into(),
        }
    }
}

impl fmt::Display for RecordRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.collection, self.record)
    }
}

/// What happens when an element is activated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Navigate(String),
    SetField(String),
    AppendToCollection { collection: String, record: RecordRef },
    RemoveFromCollection { collection: String, record: RecordRef },
    Reveal(Vec<String>),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Always,
    /// Visible while the scroll window `[offset, offset + VIEWPORT_H)` intersects `[y_min, y_max)`.
    /// The element's box is in page coordinates and scrolls with the content.
    ScrollBand(i32, i32),
    RevealedBy(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub element_id: String,
    pub role: Role,
    pub label_text: String,
    pub bbox: BBox,
    pub effect: Effect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_node: Option<String>,
    pub visibility: Visibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub page_id: String,
    pub url_path: String,
    pub semantics_tag: String,
    /// Total content height; the maximum scroll offset is `scroll_height - VIEWPORT_H`.
    pub scroll_height: i32,
    /// Key node appended when the page is entered through navigation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_node: Option<String>,
    pub elements: Vec<Element>,
}

impl Page {
    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.element_id == id)
    }

    pub fn max_scroll(&self) -> i32 {
        (self.scroll_height - VIEWPORT_H).max(0)
    }
}

/// Directed edge of the page graph: activating `element` on `from` leads to `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct NavEdge {
    pub from: String,
    pub element: String,
    pub to: String,
}

impl From<(String, String, String)> for NavEdge {
    fn from(v: (String, String, String)) -> Self {
        NavEdge {
            from: v.0,
            element: v.1,
            to: v.2,
        }
    }
}

impl From<NavEdge> for (String, String, String) {
    fn from(e: NavEdge) -> Self {
        (e.from, e.element, e.to)
    }
}

impl fmt::Display for NavEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}->{}", self.from, self.element, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub name: String,
    pub steps: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    String,
    Number,
    Time,
    Enum,
}

/// A record value. Times (`HH:MM`) and enum members are stored as strings;
/// their kind lives in the snapshot schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            Value::Text(_) => None,
        }
    }

    /// Display string, identical to what the site renders.
    pub fn render(&self) -> String {
        match self {
            Value::Number(n) => format_number(*n),
            Value::Text(s) => s.clone(),
        }
    }
}

pub fn format_number(n: f64) -> String {
    format!("{n}")
}

pub type Record = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSnapshot {
    pub snapshot_seed: u64,
    /// collection -> field -> kind
    pub schema: BTreeMap<String, BTreeMap<String, FieldKind>>,
    pub collections: BTreeMap<String, Vec<Record>>,
}

impl DataSnapshot {
    pub fn record(&self, r: &RecordRef) -> Option<&Record> {
        self.collections
            .get(&r.collection)?
            .iter()
            .find(|rec| matches!(rec.get("id"), Some(Value::Text(id)) if *id == r.record))
    }

    pub fn has_field(&self, collection: &str, field: &str) -> bool {
        self.schema.get(collection).is_some_and(|f| f.contains_key(field))
    }
}

/// One offline website: page graph, data snapshot and canonical flows.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteBundle {
    pub site_id: String,
    pub version: u64,
    pub seed: u64,
    pub start_page: String,
    pub pages: Vec<Page>,
    pub nav_edges: Vec<NavEdge>,
    pub data_snapshot: DataSnapshot,
    pub flows: Vec<Flow>,
    pub key_node_registry: Vec<String>,
}

impl SiteBundle {
    pub fn page(&self, id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.page_id == id)
    }

    pub fn page_by_url(&self, url: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.url_path == url)
    }

    pub fn flow(&self, name: &str) -> Option<&Flow> {
        self.flows.iter().find(|f| f.name == name)
    }

    pub fn element_count(&self) -> usize {
        self.pages.iter().map(|p| p.elements.len()).sum()
    }

    /// Length of the longest canonical flow.
    pub fn longest_flow(&self) -> usize {
        self.flows.iter().map(|f| f.steps.len()).max().unwrap_or(0)
    }

    /// Edges leaving `(page, element)`, in declaration order.
    pub fn edges_from<'a>(&'a self, page: &'a str, element: &'a str) -> impl Iterator<Item = &'a NavEdge> + 'a {
        self.nav_edges
            .iter()
            .filter(move |e| e.from == page && e.element == element)
    }
}
