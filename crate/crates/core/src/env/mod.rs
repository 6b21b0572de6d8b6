//! Deterministic simulator over a [`SiteBundle`].
//!
//! States are plain values and [`Env::step`] is a pure transition function, so
//! any number of episodes can run side by side on independent states.

mod action;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use action::{ActionKind, Direction, Point, StructuredAction, SENTINEL};

use crate::error::{Error, Result};
use crate::hash::{derive_seed, hex64, parse_hex64, Fnv64};
use crate::sitegen::{BBox, Effect, Element, Page, Role, SiteBundle, Visibility, VIEWPORT_H, VIEWPORT_W};
use crate::taskfactory::Task;

/// Pixels moved by one scroll action.
pub const SCROLL_QUANTUM: i32 = 512;

const PROFILES: [&str; 6] = ["ada", "grace", "linus", "margaret", "alan", "barbara"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Session {
    /// Multiset of `collection/record` refs.
    pub cart: BTreeMap<String, u32>,
    pub form_values: BTreeMap<String, String>,
    /// Reveal parents activated on the current page.
    pub revealed: BTreeSet<String>,
    /// Field element that receives `type` and ENTER.
    pub focus: Option<String>,
    /// Per-page slot order of list items after drags.
    pub list_order: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvState {
    pub site_id: String,
    pub version: u64,
    pub current_page: String,
    pub scroll_offset: i32,
    pub session: Session,
    pub step_count: u32,
    pub key_nodes_hit: Vec<String>,
    pub episode_seed: u64,
    pub goal_text: String,
    pub terminal: bool,
    pub emitted_answer: Option<String>,
}

impl EnvState {
    pub fn cart_contains(&self, record_ref: &str) -> bool {
        self.session.cart.get(record_ref).is_some_and(|n| *n > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleElement {
    pub element_id: String,
    pub role: Role,
    pub label_text: String,
    /// Box in viewport coordinates at the current scroll offset.
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub page_id: String,
    pub semantics_tag: String,
    pub visible_elements: Vec<VisibleElement>,
    pub scroll_offset: i32,
    pub goal_text: String,
    pub step_count: u32,
    pub focused: Option<String>,
}

impl Observation {
    pub fn element(&self, id: &str) -> Option<&VisibleElement> {
        self.visible_elements.iter().find(|e| e.element_id == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub key_nodes_newly_hit: Vec<String>,
    pub state_diff: Vec<String>,
    pub terminal: bool,
    pub emitted_answer: Option<String>,
    pub hit_element: Option<String>,
}

/// Digest triplet over the viewport, key-node list and cart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReplayHash {
    pub viewport: u64,
    pub key_nodes: u64,
    pub cart: u64,
}

impl ReplayHash {
    /// Single digest of the triplet, used as a state id in the replay buffer.
    pub fn combined(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write(&self.viewport.to_le_bytes());
        h.write(&self.key_nodes.to_le_bytes());
        h.write(&self.cart.to_le_bytes());
        h.finish()
    }
}

impl Serialize for ReplayHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [hex64(self.viewport), hex64(self.key_nodes), hex64(self.cart)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReplayHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [v, k, c] = <[String; 3]>::deserialize(d)?;
        let p = |s: &str| parse_hex64(s).ok_or_else(|| serde::de::Error::custom(format!("bad hash `{s}`")));
        Ok(ReplayHash {
            viewport: p(&v)?,
            key_nodes: p(&k)?,
            cart: p(&c)?,
        })
    }
}

/// Simulator bound to one bundle.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    bundle: &'a SiteBundle,
}

pub fn band_visible(lo: i32, hi: i32, offset: i32) -> bool {
    lo < offset + VIEWPORT_H && hi > offset
}

fn record_key(collection: &str, record: &str) -> String {
    format!("{collection}/{record}")
}

impl<'a> Env<'a> {
    pub fn new(bundle: &'a SiteBundle) -> Self {
        Env { bundle }
    }

    pub fn bundle(&self) -> &'a SiteBundle {
        self.bundle
    }

    pub fn reset(&self, task: &Task, episode_seed: u64) -> Result<(EnvState, Observation)> {
        if !task.site.eq_ignore_ascii_case(&self.bundle.site_id) {
            return Err(Error::SiteMismatch {
                task_site: task.site.clone(),
                bundle_site: self.bundle.site_id.clone(),
            });
        }
        self.reset_at(&task.start_url, &task.goal, episode_seed)
    }

    /// Starts a session at the page whose url is `start_url`, with a seeded profile.
    pub fn reset_at(&self, start_url: &str, goal: &str, episode_seed: u64) -> Result<(EnvState, Observation)> {
        let page = self
            .bundle
            .page_by_url(start_url)
            .ok_or_else(|| Error::UnknownPage(start_url.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, "profile"));
        let mut session = Session::default();
        session
            .form_values
            .insert("profile.user".into(), PROFILES[rng.gen_range(0..PROFILES.len())].into());
        let state = EnvState {
            site_id: self.bundle.site_id.clone(),
            version: self.bundle.version,
            current_page: page.page_id.clone(),
            scroll_offset: 0,
            session,
            step_count: 0,
            key_nodes_hit: Vec::new(),
            episode_seed,
            goal_text: goal.to_string(),
            terminal: false,
            emitted_answer: None,
        };
        let obs = self.observe(&state);
        Ok((state, obs))
    }

    fn page(&self, state: &EnvState) -> &'a Page {
        self.bundle
            .page(&state.current_page)
            .expect("state always points at an existing page")
    }

    /// Box and visibility of `el` after any list reordering on its page.
    fn geometry<'p>(&self, page: &'p Page, el: &'p Element, state: &EnvState) -> (BBox, &'p Visibility) {
        if el.role == Role::ListItem {
            if let Some(order) = state.session.list_order.get(&page.page_id) {
                if let Some(slot) = order.iter().position(|id| *id == el.element_id) {
                    let originals: Vec<&Element> = page.elements.iter().filter(|e| e.role == Role::ListItem).collect();
                    if let Some(orig) = originals.get(slot) {
                        return (orig.bbox, &orig.visibility);
                    }
                }
            }
        }
        (el.bbox, &el.visibility)
    }

    /// Displayed box if `el` is visible in `state`.
    pub fn displayed_box(&self, page: &Page, el: &Element, state: &EnvState) -> Option<BBox> {
        let (bbox, vis) = self.geometry(page, el, state);
        match vis {
            Visibility::Always => Some(bbox),
            Visibility::ScrollBand(lo, hi) => {
                band_visible(*lo, *hi, state.scroll_offset).then(|| bbox.shifted(state.scroll_offset))
            }
            Visibility::RevealedBy(parent) => state.session.revealed.contains(parent).then_some(bbox),
        }
    }

    fn field_path(el: &Element) -> Option<&str> {
        match &el.effect {
            Effect::SetField(p) => Some(p),
            _ => None,
        }
    }

    pub fn observe(&self, state: &EnvState) -> Observation {
        let page = self.page(state);
        let mut visible = Vec::new();
        for el in &page.elements {
            if let Some(bbox) = self.displayed_box(page, el, state) {
                let label_text = match Self::field_path(el).and_then(|p| state.session.form_values.get(p)) {
                    Some(v) => format!("{}: {}", el.label_text, v),
                    None => el.label_text.clone(),
                };
                visible.push(VisibleElement {
                    element_id: el.element_id.clone(),
                    role: el.role,
                    label_text,
                    bbox,
                });
            }
        }
        Observation {
            page_id: page.page_id.clone(),
            semantics_tag: page.semantics_tag.clone(),
            visible_elements: visible,
            scroll_offset: state.scroll_offset,
            goal_text: state.goal_text.clone(),
            step_count: state.step_count,
            focused: state.session.focus.clone(),
        }
    }

    /// Topmost visible element under a viewport point: smallest area, then lowest id.
    pub fn hit_test(&self, state: &EnvState, x: f64, y: f64) -> Option<&'a Element> {
        if x < 0.0 || y < 0.0 || x >= f64::from(VIEWPORT_W) || y >= f64::from(VIEWPORT_H) {
            return None;
        }
        let page = self.page(state);
        page.elements
            .iter()
            .filter_map(|el| {
                let b = self.displayed_box(page, el, state)?;
                b.contains_half_open(x, y).then_some((b.area(), el))
            })
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.element_id.cmp(&b.1.element_id)))
            .map(|(_, el)| el)
    }

    fn hit_key(state: &mut EnvState, events: &mut StepEvents, key: Option<&String>) {
        if let Some(k) = key {
            if !state.key_nodes_hit.contains(k) {
                state.key_nodes_hit.push(k.clone());
                events.key_nodes_newly_hit.push(k.clone());
            }
        }
    }

    fn navigate(&self, state: &mut EnvState, events: &mut StepEvents, to: &str) {
        state.current_page = to.to_string();
        state.scroll_offset = 0;
        state.session.focus = None;
        state.session.revealed.clear();
        events.state_diff.push(format!("page={to}"));
        let key = self.bundle.page(to).and_then(|p| p.key_node.as_ref());
        Self::hit_key(state, events, key);
    }

    fn fire(&self, state: &mut EnvState, events: &mut StepEvents, el: &Element) {
        match &el.effect {
            Effect::None => return,
            Effect::Navigate(to) => {
                Self::hit_key(state, events, el.key_node.as_ref());
                self.navigate(state, events, to);
                return;
            }
            Effect::SetField(_) => {
                state.session.focus = Some(el.element_id.clone());
                events.state_diff.push(format!("focus={}", el.element_id));
            }
            Effect::AppendToCollection { record, .. } => {
                let k = record_key(&record.collection, &record.record);
                *state.session.cart.entry(k.clone()).or_insert(0) += 1;
                events.state_diff.push(format!("cart+={k}"));
            }
            Effect::RemoveFromCollection { record, .. } => {
                let k = record_key(&record.collection, &record.record);
                if let Some(n) = state.session.cart.get_mut(&k) {
                    *n -= 1;
                    if *n == 0 {
                        state.session.cart.remove(&k);
                    }
                    events.state_diff.push(format!("cart-={k}"));
                }
            }
            Effect::Reveal(_) => {
                state.session.revealed.insert(el.element_id.clone());
                events.state_diff.push(format!("revealed={}", el.element_id));
            }
        }
        Self::hit_key(state, events, el.key_node.as_ref());
    }

    fn reorder(&self, state: &mut EnvState, events: &mut StepEvents, from: (f64, f64), to: (f64, f64)) {
        let (Some(src), Some(dst)) = (self.hit_test(state, from.0, from.1), self.hit_test(state, to.0, to.1)) else {
            return;
        };
        if src.role != Role::ListItem || dst.role != Role::ListItem || src.element_id == dst.element_id {
            return;
        }
        let page = self.page(state);
        let order = state.session.list_order.entry(page.page_id.clone()).or_insert_with(|| {
            page.elements
                .iter()
                .filter(|e| e.role == Role::ListItem)
                .map(|e| e.element_id.clone())
                .collect()
        });
        let (Some(i), Some(j)) = (
            order.iter().position(|e| *e == src.element_id),
            order.iter().position(|e| *e == dst.element_id),
        ) else {
            return;
        };
        let moved = order.remove(i);
        order.insert(j, moved);
        events.state_diff.push(format!("order:{}->{}", src.element_id, j));
    }

    /// Applies one action. Malformed actions violate the precondition and are rejected;
    /// a finished episode cannot be stepped.
    pub fn step(&self, state: &EnvState, action: &StructuredAction) -> Result<(EnvState, Observation, StepEvents)> {
        let (next, events) = self.apply(state, action)?;
        let obs = self.observe(&next);
        Ok((next, obs, events))
    }

    /// Transition without building the observation.
    pub fn apply(&self, state: &EnvState, action: &StructuredAction) -> Result<(EnvState, StepEvents)> {
        action.validate().map_err(Error::InvalidAction)?;
        if state.terminal {
            return Err(Error::Precondition("episode already terminated".into()));
        }
        let mut next = state.clone();
        next.step_count += 1;
        let mut events = StepEvents::default();
        match (action.act, action.point) {
            (ActionKind::Click | ActionKind::DoubleClick, Point::At(x, y)) => {
                if let Some(el) = self.hit_test(state, x, y) {
                    events.hit_element = Some(el.element_id.clone());
                    self.fire(&mut next, &mut events, el);
                }
            }
            (ActionKind::Type, _) => {
                let page = self.page(state);
                let path = state
                    .session
                    .focus
                    .as_deref()
                    .and_then(|f| page.element(f))
                    .and_then(Self::field_path);
                if let Some(path) = path {
                    next.session
                        .form_values
                        .insert(path.to_string(), action.text_or_empty().to_string());
                    events.state_diff.push(format!("{path}={}", action.text_or_empty()));
                }
            }
            (ActionKind::Scroll, _) => {
                let page = self.page(state);
                let delta = match Direction::parse(action.text_or_empty()) {
                    Some(Direction::Up) => -SCROLL_QUANTUM,
                    _ => SCROLL_QUANTUM,
                };
                let off = (state.scroll_offset + delta).clamp(0, page.max_scroll());
                if off != state.scroll_offset {
                    next.scroll_offset = off;
                    events.state_diff.push(format!("scroll={off}"));
                }
            }
            (ActionKind::Keypress, _) => {
                if action.text_or_empty().trim().eq_ignore_ascii_case("enter") {
                    self.submit(state, &mut next, &mut events);
                }
            }
            (ActionKind::Drag, Point::Span(a, b)) => self.reorder(&mut next, &mut events, a, b),
            (ActionKind::GetFinalAnswer, _) => {
                next.terminal = true;
                next.emitted_answer = Some(action.text_or_empty().to_string());
                events.terminal = true;
                events.emitted_answer = next.emitted_answer.clone();
            }
            _ => {}
        }
        Ok((next, events))
    }

    /// Visible elements of the current page with their displayed boxes.
    pub fn visible(&self, state: &EnvState) -> Vec<(&'a Element, BBox)> {
        let page = self.page(state);
        page.elements
            .iter()
            .filter_map(|el| self.displayed_box(page, el, state).map(|b| (el, b)))
            .collect()
    }

    pub fn current_page(&self, state: &EnvState) -> &'a Page {
        self.page(state)
    }

    fn submit(&self, state: &EnvState, next: &mut EnvState, events: &mut StepEvents) {
        let page = self.page(state);
        let Some(focus) = state.session.focus.as_deref() else {
            return;
        };
        let Some(path) = page.element(focus).and_then(Self::field_path) else {
            return;
        };
        if state.session.form_values.get(path).is_none_or(|v| v.is_empty()) {
            return;
        }
        if let Some(edge) = self.bundle.edges_from(&page.page_id, focus).next() {
            let to = edge.to.clone();
            self.navigate(next, events, &to);
        }
    }

    pub fn state_hash(&self, state: &EnvState) -> ReplayHash {
        let obs = self.observe(state);
        #[derive(Serialize)]
        struct Viewport<'s> {
            page: &'s str,
            scroll: i32,
            elements: &'s [VisibleElement],
            focus: &'s Option<String>,
            forms: &'s BTreeMap<String, String>,
        }
        let viewport = serde_json::to_vec(&Viewport {
            page: &obs.page_id,
            scroll: obs.scroll_offset,
            elements: &obs.visible_elements,
            focus: &state.session.focus,
            forms: &state.session.form_values,
        })
        .expect("viewport serializes");
        let keys = serde_json::to_vec(&state.key_nodes_hit).expect("keys serialize");
        let cart = serde_json::to_vec(&state.session.cart).expect("cart serializes");
        let digest = |tag: &str, bytes: &[u8]| {
            let mut h = Fnv64::new();
            h.write_field(tag.as_bytes());
            h.write_field(bytes);
            h.finish()
        };
        ReplayHash {
            viewport: digest("viewport", &viewport),
            key_nodes: digest("key_nodes", &keys),
            cart: digest("cart", &cart),
        }
    }

    /// Center of the visible part of an element's displayed box.
    pub fn click_point(bbox: &BBox) -> (f64, f64) {
        let top = bbox.y.max(0);
        let bottom = (bbox.y + bbox.h).min(VIEWPORT_H);
        let left = bbox.x.max(0);
        let right = (bbox.x + bbox.w).min(VIEWPORT_W);
        (
            (f64::from(left) + f64::from(right)) / 2.0,
            (f64::from(top) + f64::from(bottom)) / 2.0,
        )
    }
}
