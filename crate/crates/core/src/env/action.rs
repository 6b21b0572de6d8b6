use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

/// Point used by actions that carry no coordinate.
pub const SENTINEL: (f64, f64) = (-100.0, -100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    DoubleClick,
    Type,
    Scroll,
    Keypress,
    Drag,
    Wait,
    GetFinalAnswer,
}

impl ActionKind {
    pub const ALL: [ActionKind; 8] = [
        ActionKind::Click,
        ActionKind::DoubleClick,
        ActionKind::Type,
        ActionKind::Scroll,
        ActionKind::Keypress,
        ActionKind::Drag,
        ActionKind::Wait,
        ActionKind::GetFinalAnswer,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::DoubleClick => "double_click",
            ActionKind::Type => "type",
            ActionKind::Scroll => "scroll",
            ActionKind::Keypress => "keypress",
            ActionKind::Drag => "drag",
            ActionKind::Wait => "wait",
            ActionKind::GetFinalAnswer => "get_final_answer",
        }
    }

    pub fn parse(s: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_click_family(&self) -> bool {
        matches!(self, ActionKind::Click | ActionKind::DoubleClick)
    }

    pub fn is_positional(&self) -> bool {
        matches!(self, ActionKind::Click | ActionKind::DoubleClick | ActionKind::Drag)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `[x, y]` or `[[x1, y1], [x2, y2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    At(f64, f64),
    Span((f64, f64), (f64, f64)),
}

impl Point {
    pub fn sentinel() -> Point {
        Point::At(SENTINEL.0, SENTINEL.1)
    }

    pub fn is_sentinel(&self) -> bool {
        matches!(self, Point::At(x, y) if *x == SENTINEL.0 && *y == SENTINEL.1)
    }
}

struct Coord(f64);

impl Serialize for Coord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        // integral coordinates are written without a fractional part
        if self.0.fract() == 0.0 && self.0.abs() < 1e15 {
            s.serialize_i64(self.0 as i64)
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Point::At(x, y) => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element(&Coord(x))?;
                seq.serialize_element(&Coord(y))?;
                seq.end()
            }
            Point::Span(a, b) => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element(&[Coord(a.0), Coord(a.1)])?;
                seq.serialize_element(&[Coord(b.0), Coord(b.1)])?;
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        Point::from_json(&v).ok_or_else(|| de::Error::custom("point must be [x,y] or [[x1,y1],[x2,y2]]"))
    }
}

impl Point {
    pub fn from_json(v: &serde_json::Value) -> Option<Point> {
        let arr = v.as_array()?;
        if arr.len() != 2 {
            return None;
        }
        if let (Some(x), Some(y)) = (arr[0].as_f64(), arr[1].as_f64()) {
            return Some(Point::At(x, y));
        }
        let pair = |v: &serde_json::Value| -> Option<(f64, f64)> {
            let a = v.as_array()?;
            if a.len() != 2 {
                return None;
            }
            Some((a[0].as_f64()?, a[1].as_f64()?))
        };
        Some(Point::Span(pair(&arr[0])?, pair(&arr[1])?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Direction> {
        match s.trim().to_ascii_uppercase().as_str() {
            "UP" => Some(Direction::Up),
            "DOWN" => Some(Direction::Down),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "UP",
            Direction::Down => "DOWN",
        }
    }
}

/// One agent action: kind, point and optional text parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredAction {
    #[serde(rename = "action")]
    pub act: ActionKind,
    pub point: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl StructuredAction {
    pub fn click(x: f64, y: f64) -> Self {
        Self::new(ActionKind::Click, Point::At(x, y), None)
    }

    pub fn double_click(x: f64, y: f64) -> Self {
        Self::new(ActionKind::DoubleClick, Point::At(x, y), None)
    }

    pub fn type_text(text: &str) -> Self {
        Self::new(ActionKind::Type, Point::sentinel(), Some(text.into()))
    }

    pub fn scroll(dir: Direction) -> Self {
        Self::new(ActionKind::Scroll, Point::sentinel(), Some(dir.as_str().into()))
    }

    pub fn keypress(key: &str) -> Self {
        Self::new(ActionKind::Keypress, Point::sentinel(), Some(key.into()))
    }

    pub fn drag(from: (f64, f64), to: (f64, f64)) -> Self {
        let dir = if to.1 < from.1 { Direction::Up } else { Direction::Down };
        Self::new(ActionKind::Drag, Point::Span(from, to), Some(dir.as_str().into()))
    }

    pub fn wait() -> Self {
        Self::new(ActionKind::Wait, Point::sentinel(), None)
    }

    pub fn answer(text: &str) -> Self {
        Self::new(ActionKind::GetFinalAnswer, Point::sentinel(), Some(text.into()))
    }

    pub fn new(act: ActionKind, point: Point, text: Option<String>) -> Self {
        StructuredAction { act, point, text }
    }

    pub fn text_or_empty(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }

    /// Point shape matches the action kind.
    pub fn point_shape_ok(&self) -> bool {
        match (self.act, &self.point) {
            (ActionKind::Drag, Point::Span(..)) => true,
            (ActionKind::Drag, _) => false,
            (_, Point::At(..)) => true,
            _ => false,
        }
    }

    /// First violated conditional-parameter rule, if any.
    pub fn conditional_problem(&self) -> Option<String> {
        if !self.point_shape_ok() {
            return Some(format!("{} has the wrong point shape", self.act));
        }
        if !self.act.is_positional() && !self.point.is_sentinel() {
            return Some(format!("{} must use the [-100,-100] point", self.act));
        }
        let text = self.text.as_deref();
        match self.act {
            ActionKind::Type => match text {
                Some(t) if !t.is_empty() => None,
                _ => Some("type requires input text".into()),
            },
            ActionKind::Scroll | ActionKind::Drag => match text.and_then(Direction::parse) {
                Some(_) => None,
                None => Some(format!("{} requires UP or DOWN", self.act)),
            },
            ActionKind::Keypress => match text {
                Some(t) if !t.trim().is_empty() => None,
                _ => Some("keypress requires a key name".into()),
            },
            ActionKind::GetFinalAnswer => match text {
                Some(_) => None,
                None => Some("get_final_answer requires answer text".into()),
            },
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.conditional_problem() {
            Some(p) => Err(p),
            None => Ok(()),
        }
    }

    /// `<think>…</think><answer>{…}</answer>` rendering.
    pub fn to_wire(&self, think: &str) -> String {
        let json = serde_json::to_string(self).expect("action serializes");
        format!("<think>{think}</think><answer>{json}</answer>")
    }
}
