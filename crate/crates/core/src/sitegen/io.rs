use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::*;
use super::validate::validate_bundle;
use crate::error::{Error, Result};
use crate::jsonl::{read_text, to_pretty, write_text};

pub const KNOWLEDGE_FILE: &str = "knowledge.json";
pub const DATA_FILE: &str = "data.json";

/// On-disk shape of `knowledge.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnowledgeDoc {
    site_id: String,
    version: u64,
    seed: u64,
    start_page: String,
    pages: Vec<Page>,
    nav_edges: Vec<NavEdge>,
    flows: Vec<Flow>,
    key_nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub files: Vec<PathBuf>,
}

/// Renders the two bundle documents without touching the filesystem.
pub fn render_bundle(bundle: &SiteBundle) -> Result<(String, String)> {
    let doc = KnowledgeDoc {
        site_id: bundle.site_id.clone(),
        version: bundle.version,
        seed: bundle.seed,
        start_page: bundle.start_page.clone(),
        pages: bundle.pages.clone(),
        nav_edges: bundle.nav_edges.clone(),
        flows: bundle.flows.clone(),
        key_nodes: bundle.key_node_registry.clone(),
    };
    Ok((to_pretty(&doc)?, to_pretty(&bundle.data_snapshot)?))
}

/// Writes `knowledge.json` and `data.json`. Bundles that violate any invariant are refused.
pub fn export_bundle(bundle: &SiteBundle, dir: &Path) -> Result<ExportManifest> {
    let report = validate_bundle(bundle);
    if !report.is_empty() {
        return Err(Error::Invariant(report.messages()));
    }
    let (knowledge, data) = render_bundle(bundle)?;
    let k = dir.join(KNOWLEDGE_FILE);
    let d = dir.join(DATA_FILE);
    write_text(&k, &knowledge)?;
    write_text(&d, &data)?;
    Ok(ExportManifest { files: vec![k, d] })
}

/// Parses both documents and validates the result.
pub fn parse_bundle(knowledge: &str, data: &str) -> Result<SiteBundle> {
    let doc: KnowledgeDoc = serde_json::from_str(knowledge).map_err(|e| Error::Schema {
        context: KNOWLEDGE_FILE.into(),
        message: e.to_string(),
    })?;
    let snapshot: DataSnapshot = serde_json::from_str(data).map_err(|e| Error::Schema {
        context: DATA_FILE.into(),
        message: e.to_string(),
    })?;
    let bundle = SiteBundle {
        site_id: doc.site_id,
        version: doc.version,
        seed: doc.seed,
        start_page: doc.start_page,
        pages: doc.pages,
        nav_edges: doc.nav_edges,
        data_snapshot: snapshot,
        flows: doc.flows,
        key_node_registry: doc.key_nodes,
    };
    let report = validate_bundle(&bundle);
    if !report.is_empty() {
        return Err(Error::Invariant(report.messages()));
    }
    Ok(bundle)
}

pub fn load_bundle(dir: &Path) -> Result<SiteBundle> {
    let knowledge = read_text(&dir.join(KNOWLEDGE_FILE))?;
    let data = read_text(&dir.join(DATA_FILE))?;
    parse_bundle(&knowledge, &data)
}
