//! Seeded procedural generator over the bundle schema.
//!
//! Layout: a fixed sidebar (x < 240) carries `Always` navigation, the content
//! column (x >= 280) carries page content. Scrolling content sits on a 64 px row
//! pitch so no row ever straddles a 512 px scroll boundary.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::*;
use super::SiteSpec;
use crate::error::{Error, Result};
use crate::hash::derive_seed;

pub const SIDEBAR_X: i32 = 20;
pub const SIDEBAR_W: i32 = 200;
pub const CONTENT_X: i32 = 280;
pub const CONTENT_W: i32 = 960;
pub const ROW_PITCH: i32 = 64;
pub const ROW_H: i32 = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTemplate {
    pub name: String,
    pub label: String,
    pub kind: FieldKind,
    #[serde(default)]
    pub values: Vec<String>,
    #[serde(default)]
    pub min: f64,
    #[serde(default)]
    pub max: f64,
    #[serde(default)]
    pub decimals: u32,
    /// Minute step for `time` fields.
    #[serde(default)]
    pub step: u32,
    /// Phrase used to build a long-form equivalent answer ("opens at 11:00").
    #[serde(default)]
    pub answer_phrase: Option<String>,
}

/// One site family. Families are data; see `domains.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTemplate {
    pub name: String,
    pub title: String,
    pub entity: String,
    pub entity_plural: String,
    pub collection: String,
    pub name_prefixes: Vec<String>,
    pub fields: Vec<FieldTemplate>,
    pub constraint_field: String,
    pub checkout_fields: Vec<String>,
}

impl DomainTemplate {
    pub fn field(&self, name: &str) -> Option<&FieldTemplate> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Generator interface, so an alternative (e.g. model-backed) builder can emit
/// the same bundle schema.
pub trait SiteGenerator {
    fn generate(&self, spec: &SiteSpec, seed: u64) -> Result<SiteBundle>;
}

#[derive(Debug, Clone)]
pub struct ProceduralGenerator {
    domains: Vec<DomainTemplate>,
}

impl ProceduralGenerator {
    pub fn new(domains: Vec<DomainTemplate>) -> Self {
        ProceduralGenerator { domains }
    }

    pub fn builtin() -> Self {
        Self::new(super::builtin_domains())
    }

    pub fn domain(&self, name: &str) -> Option<&DomainTemplate> {
        self.domains.iter().find(|d| d.name == name)
    }
}

impl SiteGenerator for ProceduralGenerator {
    fn generate(&self, spec: &SiteSpec, seed: u64) -> Result<SiteBundle> {
        spec.check()?;
        let domain = self
            .domain(&spec.template)
            .ok_or_else(|| Error::Config(format!("unknown domain template `{}`", spec.template)))?;
        if domain.name_prefixes.is_empty() {
            return Err(Error::Config(format!("domain `{}` has no name prefixes", domain.name)));
        }
        Ok(Builder::new(domain, spec, seed).build())
    }
}

pub fn slugify(s: &str) -> String {
    let mut out = String::new();
    let mut last_us = false;
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            last_us = false;
        } else if !last_us && !out.is_empty() {
            out.push('_');
            last_us = true;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

fn letter_code(mut n: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

pub fn format_time(minutes: u32) -> String {
    format!("{:02}:{:02}", (minutes / 60) % 24, minutes % 60)
}

/// 12-hour clock: `11 am`, `7:30 pm`, `12 pm`.
pub fn format_time_12h(minutes: u32) -> String {
    let (h, m) = ((minutes / 60) % 24, minutes % 60);
    let suffix = if h < 12 { "am" } else { "pm" };
    let h12 = match h % 12 {
        0 => 12,
        x => x,
    };
    if m == 0 {
        format!("{h12} {suffix}")
    } else {
        format!("{h12}:{m:02} {suffix}")
    }
}

fn sample_value(f: &FieldTemplate, rng: &mut ChaCha8Rng) -> Value {
    match f.kind {
        FieldKind::Enum => {
            let i = rng.gen_range(0..f.values.len().max(1));
            Value::Text(f.values.get(i).cloned().unwrap_or_default())
        }
        FieldKind::Time => {
            let step = f.step.max(1);
            let lo = f.min as u32 / step;
            let hi = (f.max as u32 / step).max(lo);
            Value::Text(format_time(rng.gen_range(lo..=hi) * step))
        }
        FieldKind::Number => {
            let scale = 10f64.powi(f.decimals as i32);
            let lo = (f.min * scale).round() as i64;
            let hi = ((f.max * scale).round() as i64).max(lo);
            let v = rng.gen_range(lo..=hi) as f64 / scale;
            Value::Number(v)
        }
        FieldKind::String => Value::Text(String::new()),
    }
}

pub fn row_box(row: i32) -> BBox {
    BBox::new(CONTENT_X, row * ROW_PITCH + 8, CONTENT_W, ROW_H)
}

fn sidebar_box(slot: i32) -> BBox {
    BBox::new(SIDEBAR_X, 20 + slot * 56, SIDEBAR_W, 40)
}

fn scroll_height_for_rows(rows: i32) -> i32 {
    let bottom = rows * ROW_PITCH;
    let h = (bottom + 511) / 512 * 512;
    h.max(VIEWPORT_H)
}

struct Builder<'a> {
    domain: &'a DomainTemplate,
    spec: &'a SiteSpec,
    seed: u64,
    records: Vec<Record>,
    slugs: Vec<String>,
    names: Vec<String>,
    pages: Vec<Page>,
    registry: Vec<String>,
}

impl<'a> Builder<'a> {
    fn new(domain: &'a DomainTemplate, spec: &'a SiteSpec, seed: u64) -> Self {
        Builder {
            domain,
            spec,
            seed,
            records: Vec::new(),
            slugs: Vec::new(),
            names: Vec::new(),
            pages: Vec::new(),
            registry: Vec::new(),
        }
    }

    fn site(&self) -> &str {
        &self.domain.name
    }

    fn register(&mut self, key: &str) -> Option<String> {
        if !self.registry.iter().any(|k| k == key) {
            self.registry.push(key.to_string());
        }
        Some(key.to_string())
    }

    fn build(mut self) -> SiteBundle {
        let snapshot_seed = derive_seed(self.seed, "data");
        self.materialize_data(snapshot_seed);
        let depth = self.spec.workflow_depth;
        let ui = self.spec.ui_complexity;

        self.home_page();
        self.list_page("catalog", "browse", "list", "catalog_list", "item");
        self.list_page("results", "search", "results", "results_list", "result");
        for i in 0..self.records.len() {
            self.detail_page(i);
        }
        self.cart_page(depth >= 2);
        if depth >= 2 {
            for k in 1..depth {
                self.checkout_page(k, depth);
            }
            self.confirmation_page();
        }
        if ui >= 3 {
            self.favorites_page();
        }

        let nav_edges = self.nav_edges();
        let flows = self.flows();
        let mut schema = BTreeMap::new();
        let mut fields = BTreeMap::new();
        fields.insert("id".to_string(), FieldKind::String);
        fields.insert("name".to_string(), FieldKind::String);
        for f in &self.domain.fields {
            fields.insert(f.name.clone(), f.kind);
        }
        schema.insert(self.domain.collection.clone(), fields);
        let mut collections = BTreeMap::new();
        collections.insert(self.domain.collection.clone(), self.records.clone());

        SiteBundle {
            site_id: self.site().to_string(),
            version: self.spec.version,
            seed: self.seed,
            start_page: "home".into(),
            pages: self.pages,
            nav_edges,
            data_snapshot: DataSnapshot {
                snapshot_seed,
                schema,
                collections,
            },
            flows,
            key_node_registry: self.registry,
        }
    }

    fn materialize_data(&mut self, snapshot_seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(snapshot_seed);
        let prefixes = &self.domain.name_prefixes;
        for i in 0..self.spec.catalog_size {
            let name = format!("{} {}", prefixes[i % prefixes.len()], letter_code(i / prefixes.len()));
            let slug = slugify(&name);
            let mut rec = Record::new();
            rec.insert("id".into(), Value::Text(slug.clone()));
            rec.insert("name".into(), Value::Text(name.clone()));
            for f in &self.domain.fields {
                rec.insert(f.name.clone(), sample_value(f, &mut rng));
            }
            self.records.push(rec);
            self.slugs.push(slug);
            self.names.push(name);
        }
    }

    fn record_ref(&self, i: usize) -> RecordRef {
        RecordRef::new(self.domain.collection.clone(), self.slugs[i].clone())
    }

    fn sidebar(&mut self, page_id: &str) -> Vec<Element> {
        let mut els = Vec::new();
        let mut slot = 0;
        let mut push =
            |els: &mut Vec<Element>, id: &str, role: Role, label: String, effect: Effect, key: Option<String>| {
                els.push(Element {
                    element_id: id.into(),
                    role,
                    label_text: label,
                    bbox: sidebar_box(slot),
                    effect,
                    key_node: key,
                    visibility: Visibility::Always,
                });
                slot += 1;
            };
        if page_id == "home" {
            let key = self.register("search_box");
            push(
                &mut els,
                "search_box",
                Role::Field,
                format!("Search {}", self.domain.entity_plural),
                Effect::SetField("search.query".into()),
                key,
            );
        } else {
            push(
                &mut els,
                "nav_home",
                Role::Link,
                "Home".into(),
                Effect::Navigate("home".into()),
                None,
            );
        }
        push(
            &mut els,
            "nav_browse",
            Role::Link,
            format!("Browse {}", self.domain.entity_plural),
            Effect::Navigate("catalog".into()),
            None,
        );
        push(
            &mut els,
            "nav_cart",
            Role::Link,
            "Cart".into(),
            Effect::Navigate("cart".into()),
            None,
        );
        if self.spec.ui_complexity >= 1 {
            let mut revealed = vec!["menu_browse".to_string(), "menu_cart".to_string()];
            if self.spec.ui_complexity >= 3 {
                revealed.push("menu_favorites".into());
            }
            push(
                &mut els,
                "menu",
                Role::Button,
                "Menu".into(),
                Effect::Reveal(revealed.clone()),
                None,
            );
            let targets = [
                ("menu_browse", "All listings", "catalog"),
                ("menu_cart", "My cart", "cart"),
                ("menu_favorites", "Favorites", "favorites"),
            ];
            for (id, label, to) in targets.iter().filter(|t| revealed.iter().any(|r| r == t.0)) {
                els.push(Element {
                    element_id: (*id).into(),
                    role: Role::Link,
                    label_text: (*label).into(),
                    bbox: BBox::new(SIDEBAR_X + 20, 20 + slot * 56, SIDEBAR_W - 20, 40),
                    effect: Effect::Navigate((*to).into()),
                    key_node: None,
                    visibility: Visibility::RevealedBy("menu".into()),
                });
                slot += 1;
            }
        }
        els
    }

    fn push_page(&mut self, page: Page) {
        self.pages.push(page);
    }

    fn home_page(&mut self) {
        let mut elements = self.sidebar("home");
        elements.push(Element {
            element_id: "title".into(),
            role: Role::AnswerSource,
            label_text: format!("Welcome to {}", self.domain.title),
            bbox: row_box(0),
            effect: Effect::None,
            key_node: None,
            visibility: Visibility::Always,
        });
        let url = format!("/{}", self.site());
        self.push_page(Page {
            page_id: "home".into(),
            url_path: url,
            semantics_tag: "home".into(),
            scroll_height: VIEWPORT_H,
            key_node: None,
            elements,
        });
    }

    fn list_page(&mut self, page_id: &str, url_seg: &str, tag: &str, key: &str, item_prefix: &str) {
        let mut elements = self.sidebar(page_id);
        let title_box = row_box(0);
        elements.push(Element {
            element_id: "title".into(),
            role: Role::AnswerSource,
            label_text: format!("All {}", self.domain.entity_plural),
            bbox: title_box,
            effect: Effect::None,
            key_node: None,
            visibility: Visibility::ScrollBand(title_box.y, title_box.y + title_box.h),
        });
        for i in 0..self.records.len() {
            let b = row_box(i as i32 + 1);
            elements.push(Element {
                element_id: format!("{item_prefix}_{}", self.slugs[i]),
                role: Role::ListItem,
                label_text: self.names[i].clone(),
                bbox: b,
                effect: Effect::Navigate(format!("detail_{}", self.slugs[i])),
                key_node: None,
                visibility: Visibility::ScrollBand(b.y, b.y + b.h),
            });
        }
        let key_node = self.register(key);
        let url = format!("/{}/{}", self.site(), url_seg);
        self.push_page(Page {
            page_id: page_id.into(),
            url_path: url,
            semantics_tag: tag.into(),
            scroll_height: scroll_height_for_rows(self.records.len() as i32 + 1),
            key_node,
            elements,
        });
    }

    fn detail_page(&mut self, i: usize) {
        let page_id = format!("detail_{}", self.slugs[i]);
        let mut elements = self.sidebar(&page_id);
        let ui = self.spec.ui_complexity;
        elements.push(Element {
            element_id: "ans_name".into(),
            role: Role::AnswerSource,
            label_text: self.names[i].clone(),
            bbox: row_box(0),
            effect: Effect::None,
            key_node: None,
            visibility: Visibility::Always,
        });
        let add_key = self.register("add_to_cart");
        elements.push(Element {
            element_id: "add_to_cart".into(),
            role: Role::Button,
            label_text: "Add to cart".into(),
            bbox: BBox::new(CONTENT_X, row_box(1).y, 300, ROW_H),
            effect: Effect::AppendToCollection {
                collection: "cart".into(),
                record: self.record_ref(i),
            },
            key_node: add_key,
            visibility: Visibility::Always,
        });
        elements.push(Element {
            element_id: "back".into(),
            role: Role::Link,
            label_text: format!("Back to {}", self.domain.entity_plural),
            bbox: BBox::new(CONTENT_X + 340, row_box(1).y, 300, ROW_H),
            effect: Effect::Navigate("catalog".into()),
            key_node: None,
            visibility: Visibility::Always,
        });
        let n_fields = self.domain.fields.len();
        let mut scroll_height = VIEWPORT_H;
        let mut reveal_ids = Vec::new();
        for (k, f) in self.domain.fields.iter().enumerate() {
            let value = self.records[i][&f.name].render();
            let last = k + 1 == n_fields && n_fields > 1;
            let id = format!("ans_{}", f.name);
            let (bbox, visibility) = if last && ui >= 2 {
                // far below the fold: needs a scroll
                let b = BBox::new(CONTENT_X, 1096, CONTENT_W, ROW_H);
                scroll_height = 1536;
                (b, Visibility::ScrollBand(b.y, b.y + b.h))
            } else if k + 2 == n_fields && n_fields > 2 && ui >= 3 {
                reveal_ids.push(id.clone());
                (row_box(k as i32 + 3), Visibility::RevealedBy("more_info".into()))
            } else {
                (row_box(k as i32 + 2), Visibility::Always)
            };
            elements.push(Element {
                element_id: id,
                role: Role::AnswerSource,
                label_text: value,
                bbox,
                effect: Effect::None,
                key_node: None,
                visibility,
            });
        }
        if !reveal_ids.is_empty() {
            elements.push(Element {
                element_id: "more_info".into(),
                role: Role::Button,
                label_text: "More info".into(),
                bbox: BBox::new(CONTENT_X + 680, row_box(1).y, 280, ROW_H),
                effect: Effect::Reveal(reveal_ids),
                key_node: None,
                visibility: Visibility::Always,
            });
        }
        let key_node = self.register(&format!("{}_detail_page", self.slugs[i]));
        let url = format!(
            "/{}/{}/{}",
            self.site(),
            self.domain.entity,
            self.slugs[i].replace('_', "-")
        );
        self.push_page(Page {
            page_id,
            url_path: url,
            semantics_tag: "detail".into(),
            scroll_height,
            key_node,
            elements,
        });
    }

    fn cart_page(&mut self, with_checkout: bool) {
        let mut elements = self.sidebar("cart");
        let title = row_box(0);
        elements.push(Element {
            element_id: "title".into(),
            role: Role::AnswerSource,
            label_text: "Your cart".into(),
            bbox: title,
            effect: Effect::None,
            key_node: None,
            visibility: Visibility::ScrollBand(title.y, title.y + title.h),
        });
        if with_checkout {
            let b = BBox::new(CONTENT_X, row_box(1).y, 300, ROW_H);
            elements.push(Element {
                element_id: "checkout_btn".into(),
                role: Role::Button,
                label_text: "Checkout".into(),
                bbox: b,
                effect: Effect::Navigate("checkout_1".into()),
                key_node: None,
                visibility: Visibility::ScrollBand(b.y, b.y + b.h),
            });
        }
        for i in 0..self.records.len() {
            let b = row_box(i as i32 + 2);
            elements.push(Element {
                element_id: format!("remove_{}", self.slugs[i]),
                role: Role::Button,
                label_text: format!("Remove {}", self.names[i]),
                bbox: b,
                effect: Effect::RemoveFromCollection {
                    collection: "cart".into(),
                    record: self.record_ref(i),
                },
                key_node: None,
                visibility: Visibility::ScrollBand(b.y, b.y + b.h),
            });
        }
        let key_node = self.register("cart_page");
        let url = format!("/{}/cart", self.site());
        self.push_page(Page {
            page_id: "cart".into(),
            url_path: url,
            semantics_tag: "cart".into(),
            scroll_height: scroll_height_for_rows(self.records.len() as i32 + 2),
            key_node,
            elements,
        });
    }

    fn checkout_page(&mut self, k: u8, depth: u8) {
        let page_id = format!("checkout_{k}");
        let mut elements = self.sidebar(&page_id);
        let fields = &self.domain.checkout_fields;
        let fname = fields[(k as usize - 1) % fields.len()].clone();
        elements.push(Element {
            element_id: format!("field_{fname}"),
            role: Role::Field,
            label_text: format!("Enter {fname}"),
            bbox: row_box(0),
            effect: Effect::SetField(format!("checkout.{fname}")),
            key_node: None,
            visibility: Visibility::Always,
        });
        let next = if k + 1 < depth {
            format!("checkout_{}", k + 1)
        } else {
            "confirmation".to_string()
        };
        elements.push(Element {
            element_id: "continue".into(),
            role: Role::Button,
            label_text: if k + 1 < depth {
                "Continue".into()
            } else {
                "Place order".into()
            },
            bbox: BBox::new(CONTENT_X, row_box(1).y, 300, ROW_H),
            effect: Effect::Navigate(next),
            key_node: None,
            visibility: Visibility::Always,
        });
        let key_node = self.register(&format!("checkout_step_{k}"));
        let url = format!("/{}/checkout/{k}", self.site());
        self.push_page(Page {
            page_id,
            url_path: url,
            semantics_tag: "checkout".into(),
            scroll_height: VIEWPORT_H,
            key_node,
            elements,
        });
    }

    fn confirmation_page(&mut self) {
        let mut elements = self.sidebar("confirmation");
        elements.push(Element {
            element_id: "title".into(),
            role: Role::AnswerSource,
            label_text: "Order placed".into(),
            bbox: row_box(0),
            effect: Effect::None,
            key_node: None,
            visibility: Visibility::Always,
        });
        let key_node = self.register("order_confirmed");
        let url = format!("/{}/order/confirmed", self.site());
        self.push_page(Page {
            page_id: "confirmation".into(),
            url_path: url,
            semantics_tag: "confirmation".into(),
            scroll_height: VIEWPORT_H,
            key_node,
            elements,
        });
    }

    fn favorites_page(&mut self) {
        let mut elements = self.sidebar("favorites");
        let n = self.records.len().min(8);
        for i in 0..n {
            let b = row_box(i as i32);
            elements.push(Element {
                element_id: format!("fav_{}", self.slugs[i]),
                role: Role::ListItem,
                label_text: self.names[i].clone(),
                bbox: b,
                effect: Effect::None,
                key_node: None,
                visibility: Visibility::ScrollBand(b.y, b.y + b.h),
            });
        }
        let url = format!("/{}/favorites", self.site());
        self.push_page(Page {
            page_id: "favorites".into(),
            url_path: url,
            semantics_tag: "favorites".into(),
            scroll_height: VIEWPORT_H,
            key_node: None,
            elements,
        });
    }

    fn nav_edges(&self) -> Vec<NavEdge> {
        let mut edges = Vec::new();
        for p in &self.pages {
            for e in &p.elements {
                match &e.effect {
                    Effect::Navigate(to) => edges.push(NavEdge {
                        from: p.page_id.clone(),
                        element: e.element_id.clone(),
                        to: to.clone(),
                    }),
                    Effect::SetField(path) => {
                        // form submission with ENTER
                        let to = if path == "search.query" {
                            Some("results".to_string())
                        } else {
                            p.element("continue").and_then(|c| match &c.effect {
                                Effect::Navigate(t) => Some(t.clone()),
                                _ => None,
                            })
                        };
                        if let Some(to) = to {
                            edges.push(NavEdge {
                                from: p.page_id.clone(),
                                element: e.element_id.clone(),
                                to,
                            });
                        }
                    }
                    _ => {}
                }
            }
        }
        edges
    }

    fn flows(&self) -> Vec<Flow> {
        let first = format!("detail_{}", self.slugs[0]);
        let browse = vec![
            ("home".to_string(), "nav_browse".to_string()),
            ("catalog".to_string(), format!("item_{}", self.slugs[0])),
            (first.clone(), "add_to_cart".to_string()),
            (first, "nav_cart".to_string()),
        ];
        let mut flows = vec![Flow {
            name: "browse".into(),
            steps: browse.clone(),
        }];
        let depth = self.spec.workflow_depth;
        if depth >= 2 {
            let mut steps = browse;
            steps.push(("cart".into(), "checkout_btn".into()));
            for k in 1..depth {
                steps.push((format!("checkout_{k}"), "continue".into()));
            }
            flows.push(Flow {
                name: "checkout".into(),
                steps,
            });
        }
        flows
    }
}
