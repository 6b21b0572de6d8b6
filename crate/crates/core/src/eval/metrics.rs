use serde::{Deserialize, Serialize};

use crate::env::{ActionKind, Point, StructuredAction};
use crate::rewards::{accuracy_reward, click_hits, GroundTruthStep, RewardConfig};

/// One predicted action against the gold step it should match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPair {
    pub predicted: StructuredAction,
    pub gold: GroundTruthStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// Fraction with the gold action kind.
    pub type_acc: f64,
    /// Click-rule hits over click-family gold steps; `None` when there are none.
    pub gr: Option<f64>,
    /// Fraction with accuracy reward 1 (kind and parameters).
    pub sr: f64,
    pub pairs: usize,
    pub click_pairs: usize,
    /// Set when no pairs were supplied; the rates are then zeros.
    pub empty: bool,
}

pub fn is_click_family(kind: ActionKind) -> bool {
    matches!(kind, ActionKind::Click | ActionKind::DoubleClick)
}

pub fn step_metrics(pairs: &[StepPair], cfg: &RewardConfig) -> StepMetrics {
    if pairs.is_empty() {
        return StepMetrics {
            type_acc: 0.0,
            gr: None,
            sr: 0.0,
            pairs: 0,
            click_pairs: 0,
            empty: true,
        };
    }
    let n = pairs.len() as f64;
    let typed = pairs.iter().filter(|p| p.predicted.act == p.gold.gt_type).count();
    let exact = pairs
        .iter()
        .filter(|p| accuracy_reward(&p.predicted, &p.gold, cfg).0 == 1)
        .count();
    let clicks: Vec<&StepPair> = pairs.iter().filter(|p| is_click_family(p.gold.gt_type)).collect();
    let grounded = clicks
        .iter()
        .filter(|p| match (&p.predicted.point, &p.gold.gt_bbox) {
            (Point::At(x, y), Some(b)) => !p.predicted.point.is_sentinel() && click_hits((*x, *y), b, cfg),
            _ => false,
        })
        .count();
    StepMetrics {
        type_acc: typed as f64 / n,
        gr: (!clicks.is_empty()).then(|| grounded as f64 / clicks.len() as f64),
        sr: exact as f64 / n,
        pairs: pairs.len(),
        click_pairs: clicks.len(),
        empty: false,
    }
}
