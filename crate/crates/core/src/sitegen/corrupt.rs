use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{SiteBundle, Value};
use crate::hash::derive_seed;

/// Copy of `bundle` whose data snapshot no longer matches its pages: the ids
/// of a `fraction` of each collection's records are renamed, so anything
/// derived from the data points at records the pages do not know.
///
/// Meant for exercising validators and replay checks.
pub fn inject_dangling_records(bundle: &SiteBundle, fraction: f64, seed: u64) -> SiteBundle {
    let mut out = bundle.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "dangling"));
    for records in out.data_snapshot.collections.values_mut() {
        let n = ((records.len() as f64) * fraction.clamp(0.0, 1.0)).ceil() as usize;
        let mut idx: Vec<usize> = (0..records.len()).collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(n) {
            if let Some(Value::Text(id)) = records[i].get_mut("id") {
                id.push_str("_orphan");
            }
        }
    }
    out
}
