use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::*;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    Reachability {
        page: String,
    },
    DanglingReference {
        location: String,
        message: String,
    },
    Geometry {
        page: String,
        element: String,
        message: String,
    },
    Duplicate {
        location: String,
        id: String,
    },
    Flow {
        flow: String,
        message: String,
    },
    Data {
        message: String,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Reachability { page } => write!(f, "page `{page}` unreachable from start"),
            Issue::DanglingReference { location, message } => {
                write!(f, "dangling reference at {location}: {message}")
            }
            Issue::Geometry { page, element, message } => write!(f, "geometry {page}/{element}: {message}"),
            Issue::Duplicate { location, id } => write!(f, "duplicate id `{id}` in {location}"),
            Issue::Flow { flow, message } => write!(f, "flow `{flow}`: {message}"),
            Issue::Data { message } => write!(f, "data snapshot: {message}"),
        }
    }
}

/// Every invariant violation found in a bundle; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.issues.iter().map(|i| i.to_string()).collect()
    }
}

/// Pages reachable from `start` over the nav graph.
pub fn reachable_pages(bundle: &SiteBundle, start: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    if bundle.page(start).is_some() {
        seen.insert(start.to_string());
        queue.push_back(start.to_string());
    }
    while let Some(p) = queue.pop_front() {
        for e in bundle.nav_edges.iter().filter(|e| e.from == p) {
            if bundle.page(&e.to).is_some() && seen.insert(e.to.clone()) {
                queue.push_back(e.to.clone());
            }
        }
    }
    seen
}

fn visible_at_top(el: &Element) -> bool {
    match el.visibility {
        Visibility::Always => true,
        Visibility::ScrollBand(lo, hi) => lo < VIEWPORT_H && hi > 0,
        Visibility::RevealedBy(_) => false,
    }
}

pub fn validate_bundle(bundle: &SiteBundle) -> ValidationReport {
    let mut issues = Vec::new();
    let registry: HashSet<&str> = bundle.key_node_registry.iter().map(String::as_str).collect();
    let page_ids: HashSet<&str> = bundle.pages.iter().map(|p| p.page_id.as_str()).collect();

    if bundle.page(&bundle.start_page).is_none() {
        issues.push(Issue::DanglingReference {
            location: "start_page".into(),
            message: format!("no page `{}`", bundle.start_page),
        });
    }

    let mut seen_pages = HashSet::new();
    for page in &bundle.pages {
        if !seen_pages.insert(page.page_id.as_str()) {
            issues.push(Issue::Duplicate {
                location: "pages".into(),
                id: page.page_id.clone(),
            });
        }
        check_page(bundle, page, &registry, &page_ids, &mut issues);
    }

    // nav edges
    for edge in &bundle.nav_edges {
        let loc = format!("nav_edge {edge}");
        let Some(from) = bundle.page(&edge.from) else {
            issues.push(Issue::DanglingReference {
                location: loc,
                message: format!("no page `{}`", edge.from),
            });
            continue;
        };
        if bundle.page(&edge.to).is_none() {
            issues.push(Issue::DanglingReference {
                location: loc,
                message: format!("no page `{}`", edge.to),
            });
            continue;
        }
        match from.element(&edge.element).map(|e| &e.effect) {
            None => issues.push(Issue::DanglingReference {
                location: loc,
                message: format!("no element `{}` on `{}`", edge.element, edge.from),
            }),
            Some(Effect::Navigate(t)) if *t != edge.to => issues.push(Issue::DanglingReference {
                location: loc,
                message: format!("element navigates to `{t}`"),
            }),
            Some(Effect::Navigate(_)) | Some(Effect::SetField(_)) => {}
            Some(_) => issues.push(Issue::DanglingReference {
                location: loc,
                message: "element has no navigation or submission effect".into(),
            }),
        }
    }
    for page in &bundle.pages {
        for el in &page.elements {
            if let Effect::Navigate(to) = &el.effect {
                let has = bundle
                    .nav_edges
                    .iter()
                    .any(|e| e.from == page.page_id && e.element == el.element_id && e.to == *to);
                if !has && page_ids.contains(to.as_str()) {
                    issues.push(Issue::DanglingReference {
                        location: format!("{}/{}", page.page_id, el.element_id),
                        message: "navigate effect without nav edge".into(),
                    });
                }
            }
        }
    }

    // reachability
    let reach = reachable_pages(bundle, &bundle.start_page);
    for page in &bundle.pages {
        if !reach.contains(&page.page_id) {
            issues.push(Issue::Reachability {
                page: page.page_id.clone(),
            });
        }
    }

    for flow in &bundle.flows {
        check_flow(bundle, flow, &reach, &mut issues);
    }

    check_data(&bundle.data_snapshot, &mut issues);
    ValidationReport { issues }
}

fn check_page(
    bundle: &SiteBundle,
    page: &Page,
    registry: &HashSet<&str>,
    page_ids: &HashSet<&str>,
    issues: &mut Vec<Issue>,
) {
    if page.scroll_height < VIEWPORT_H {
        issues.push(Issue::Geometry {
            page: page.page_id.clone(),
            element: String::new(),
            message: format!("scroll height {} below viewport", page.scroll_height),
        });
    }
    if let Some(k) = &page.key_node {
        if !registry.contains(k.as_str()) {
            issues.push(Issue::DanglingReference {
                location: page.page_id.clone(),
                message: format!("key node `{k}` not in registry"),
            });
        }
    }
    let mut ids = HashSet::new();
    for el in &page.elements {
        let loc = format!("{}/{}", page.page_id, el.element_id);
        if !ids.insert(el.element_id.as_str()) {
            issues.push(Issue::Duplicate {
                location: page.page_id.clone(),
                id: el.element_id.clone(),
            });
        }
        let b = el.bbox;
        let geo = |m: String| Issue::Geometry {
            page: page.page_id.clone(),
            element: el.element_id.clone(),
            message: m,
        };
        if b.w <= 0 || b.h <= 0 {
            issues.push(geo(format!("non-positive size {}x{}", b.w, b.h)));
        } else {
            let y_limit = match el.visibility {
                Visibility::ScrollBand(..) => page.scroll_height,
                _ => VIEWPORT_H,
            };
            if b.x < 0 || b.y < 0 || b.x + b.w > VIEWPORT_W || b.y + b.h > y_limit {
                issues.push(geo(format!(
                    "box {:?} outside extent {}x{}",
                    <[i32; 4]>::from(b),
                    VIEWPORT_W,
                    y_limit
                )));
            }
        }
        if let Visibility::RevealedBy(parent) = &el.visibility {
            if page.element(parent).is_none() {
                issues.push(Issue::DanglingReference {
                    location: loc.clone(),
                    message: format!("revealed by missing element `{parent}`"),
                });
            }
        }
        if let Some(k) = &el.key_node {
            if !registry.contains(k.as_str()) {
                issues.push(Issue::DanglingReference {
                    location: loc.clone(),
                    message: format!("key node `{k}` not in registry"),
                });
            }
        }
        match &el.effect {
            Effect::Navigate(to) if !page_ids.contains(to.as_str()) => issues.push(Issue::DanglingReference {
                location: loc.clone(),
                message: format!("navigates to missing page `{to}`"),
            }),
            Effect::AppendToCollection { record, .. } | Effect::RemoveFromCollection { record, .. } => {
                if bundle.data_snapshot.record(record).is_none() {
                    issues.push(Issue::DanglingReference {
                        location: loc.clone(),
                        message: format!("missing record `{record}`"),
                    });
                }
            }
            Effect::Reveal(ids) => {
                for id in ids {
                    if page.element(id).is_none() {
                        issues.push(Issue::DanglingReference {
                            location: loc.clone(),
                            message: format!("reveals missing element `{id}`"),
                        });
                    }
                }
            }
            Effect::SetField(path) if path.is_empty() => issues.push(Issue::DanglingReference {
                location: loc.clone(),
                message: "empty field path".into(),
            }),
            _ => {}
        }
    }
    // interactable boxes in the same visibility layer must not fully overlap
    let inter: Vec<&Element> = page.elements.iter().filter(|e| e.role.is_interactable()).collect();
    for (i, a) in inter.iter().enumerate() {
        for b in &inter[i + 1..] {
            if layer(a) == layer(b) && (a.bbox.contains_box(&b.bbox) || b.bbox.contains_box(&a.bbox)) {
                issues.push(Issue::Geometry {
                    page: page.page_id.clone(),
                    element: a.element_id.clone(),
                    message: format!("fully overlaps `{}`", b.element_id),
                });
            }
        }
    }
}

fn layer(e: &Element) -> u8 {
    match e.visibility {
        Visibility::ScrollBand(..) => 1,
        _ => 0,
    }
}

fn check_flow(bundle: &SiteBundle, flow: &Flow, reach: &BTreeSet<String>, issues: &mut Vec<Issue>) {
    let err = |m: String| Issue::Flow {
        flow: flow.name.clone(),
        message: m,
    };
    let Some((first, _)) = flow.steps.first() else {
        issues.push(err("empty flow".into()));
        return;
    };
    if !reach.contains(first) {
        issues.push(err(format!("starts at unreachable page `{first}`")));
    }
    let mut current = first.clone();
    for (i, (page_id, el_id)) in flow.steps.iter().enumerate() {
        if *page_id != current {
            issues.push(err(format!(
                "step {i} expects page `{page_id}` but walk is on `{current}`"
            )));
            return;
        }
        let Some(page) = bundle.page(page_id) else {
            issues.push(err(format!("step {i}: missing page `{page_id}`")));
            return;
        };
        let Some(el) = page.element(el_id) else {
            issues.push(err(format!("step {i}: missing element `{el_id}`")));
            return;
        };
        if !visible_at_top(el) {
            issues.push(err(format!("step {i}: `{el_id}` not visible on arrival")));
        }
        if let Effect::Navigate(to) = &el.effect {
            current = to.clone();
        }
    }
}

fn check_data(data: &DataSnapshot, issues: &mut Vec<Issue>) {
    for (coll, records) in &data.collections {
        let Some(schema) = data.schema.get(coll) else {
            issues.push(Issue::Data {
                message: format!("collection `{coll}` has no schema"),
            });
            continue;
        };
        let mut ids = HashSet::new();
        for (i, rec) in records.iter().enumerate() {
            match rec.get("id") {
                Some(Value::Text(id)) => {
                    if !ids.insert(id.clone()) {
                        issues.push(Issue::Duplicate {
                            location: coll.clone(),
                            id: id.clone(),
                        });
                    }
                }
                _ => issues.push(Issue::Data {
                    message: format!("{coll}[{i}] has no string id"),
                }),
            }
            for (field, value) in rec {
                match schema.get(field) {
                    None => issues.push(Issue::Data {
                        message: format!("{coll}[{i}].{field} not in schema"),
                    }),
                    Some(FieldKind::Number) if value.as_f64().is_none() => issues.push(Issue::Data {
                        message: format!("{coll}[{i}].{field} should be a number"),
                    }),
                    Some(FieldKind::String | FieldKind::Time | FieldKind::Enum) if value.as_f64().is_some() => issues
                        .push(Issue::Data {
                            message: format!("{coll}[{i}].{field} should be text"),
                        }),
                    _ => {}
                }
            }
        }
    }
}
