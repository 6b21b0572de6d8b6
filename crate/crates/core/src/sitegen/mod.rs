//! Procedural synthesis of offline site bundles.
//!
//! A [`SiteBundle`] is a seeded, versioned description of one website: its pages
//! and elements (with boxes in a fixed 1280x1024 viewport frame), the page graph,
//! a typed data snapshot, canonical click flows and the key-node registry.

mod corrupt;
mod generate;
mod io;
mod model;
mod validate;

use serde::{Deserialize, Serialize};

pub use corrupt::inject_dangling_records;
pub use generate::{
    format_time, format_time_12h, row_box, slugify, DomainTemplate, FieldTemplate, ProceduralGenerator, SiteGenerator,
};
pub use io::{export_bundle, load_bundle, parse_bundle, render_bundle, ExportManifest, DATA_FILE, KNOWLEDGE_FILE};
pub use model::*;
pub use validate::{reachable_pages, validate_bundle, Issue, ValidationReport};

use crate::error::{Error, Result};

pub const MAX_CATALOG: usize = 200;
pub const MAX_UI_COMPLEXITY: u8 = 3;
pub const MAX_WORKFLOW_DEPTH: u8 = 5;

/// Knobs for one site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSpec {
    /// Domain family name, e.g. `mealdash`.
    pub template: String,
    /// Number of records, one detail page each. 1..=200.
    pub catalog_size: usize,
    /// 0 plain, 1 hover menu, 2 below-the-fold content, 3 hidden details and a drag list.
    #[serde(default)]
    pub ui_complexity: u8,
    /// 1 browse/cart only; each extra level adds one checkout page. 1..=5.
    #[serde(default = "default_depth")]
    pub workflow_depth: u8,
    #[serde(default = "default_version")]
    pub version: u64,
}

fn default_depth() -> u8 {
    2
}

fn default_version() -> u64 {
    1
}

impl SiteSpec {
    pub fn new(template: &str, catalog_size: usize) -> Self {
        SiteSpec {
            template: template.into(),
            catalog_size,
            ui_complexity: 0,
            workflow_depth: default_depth(),
            version: default_version(),
        }
    }

    pub fn with_ui(mut self, ui: u8) -> Self {
        self.ui_complexity = ui;
        self
    }

    pub fn with_depth(mut self, depth: u8) -> Self {
        self.workflow_depth = depth;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(1..=MAX_CATALOG).contains(&self.catalog_size) {
            return Err(Error::Config(format!(
                "catalog_size {} outside 1..={MAX_CATALOG}",
                self.catalog_size
            )));
        }
        if self.ui_complexity > MAX_UI_COMPLEXITY {
            return Err(Error::Config(format!(
                "ui_complexity {} outside 0..={MAX_UI_COMPLEXITY}",
                self.ui_complexity
            )));
        }
        if !(1..=MAX_WORKFLOW_DEPTH).contains(&self.workflow_depth) {
            return Err(Error::Config(format!(
                "workflow_depth {} outside 1..={MAX_WORKFLOW_DEPTH}",
                self.workflow_depth
            )));
        }
        Ok(())
    }
}

/// The ten built-in site families.
pub fn builtin_domains() -> Vec<DomainTemplate> {
    serde_json::from_str(include_str!("domains.json")).expect("embedded domains.json is valid")
}

/// Synthesizes a bundle with the built-in procedural generator.
pub fn synthesize_site(spec: &SiteSpec, seed: u64) -> Result<SiteBundle> {
    ProceduralGenerator::builtin().generate(spec, seed)
}
