//! Detection matching, average precision, and the HICO-DET / V-COCO
//! evaluation protocols.
//!
//! Per-image matching runs through [`ExecMode`]; per-image results are merged
//! in image order, so reports do not depend on scheduling.

mod binned;
mod hico;
mod vcoco;

pub use binned::{bin_index, bin_value, binned_ap_analysis, BinMode, BinRow, BinnedReport};
pub use hico::{eval_hico, HicoClassAp, HicoReport, HoiClass, SplitMap};
pub use vcoco::{eval_vcoco, eval_vcoco_scenario, ActionAp, Scenario, ScenarioReport, VcocoReport};

use serde::{Deserialize, Serialize};

use crate::assignment::GtInstance;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::geometry::iou;
use crate::inference::{top_k_select, HoiDetection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Both boxes need an IoU strictly above this.
    pub iou_threshold: f64,
    /// Detections kept per image.
    pub top_k: usize,
    /// HOI classes with fewer training instances than this are rare.
    pub rare_threshold: usize,
    pub presence_threshold: f64,
    /// V-COCO scenario to report; `None` reports both.
    pub vcoco_scenario: Option<Scenario>,
    /// Action classes left out of the V-COCO mean.
    pub excluded_actions: Vec<usize>,
    /// Bins with fewer positive instances are omitted from binned analysis.
    pub min_bin_count: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            top_k: 100,
            rare_threshold: 10,
            presence_threshold: 0.0,
            vcoco_scenario: None,
            excluded_actions: Vec::new(),
            min_bin_count: 10,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold {} not in (0, 1)",
                self.iou_threshold
            )));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which criteria a detection must meet to match a ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Both boxes, the action and the object class.
    Hico,
    /// Both boxes and the action; object-less ground truths follow the
    /// scenario rule.
    Vcoco(Scenario),
}

/// Greedy score-ordered matching of one image's detections.
///
/// `dets` must be sorted by descending score. Entry `i` of the result is the
/// ground truth consumed by detection `i`, or `None` for a false positive.
/// A ground truth is consumed once per action. Among eligible ground truths the
/// one with the largest `min(IoU_h, IoU_o)` wins, ties to the lower index.
pub fn match_detections(
    dets: &[HoiDetection],
    gts: &[GtInstance],
    cfg: &EvalConfig,
    protocol: Protocol,
) -> Vec<Option<usize>> {
    let mut consumed: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.actions.len()]).collect();
    let t = cfg.iou_threshold;
    dets.iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in gts.iter().enumerate() {
                let a = d.action_class;
                if !g.actions.get(a).copied().unwrap_or(false) || consumed[gi][a] {
                    continue;
                }
                if protocol == Protocol::Hico && g.object_class != d.object_class {
                    continue;
                }
                let ih = iou(&d.human_box, &g.human_box);
                let io = match protocol {
                    Protocol::Vcoco(Scenario::One) if g.no_object => {
                        if d.object_box.is_empty_sentinel() {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Protocol::Vcoco(Scenario::Two) if g.no_object => 1.0,
                    _ => iou(&d.object_box, &g.object_box),
                };
                if ih <= t || io <= t {
                    continue;
                }
                let overlap = ih.min(io);
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((gi, overlap));
                }
            }
            best.map(|(gi, _)| {
                consumed[gi][d.action_class] = true;
                gi
            })
        })
        .collect()
}

/// All-points average precision.
///
/// `scored` holds `(score, is_true_positive)` pairs; they are ranked by
/// descending score with ties kept in input order. The precision curve is
/// replaced by its non-increasing envelope and integrated over recall.
pub fn average_precision(scored: &[(f64, bool)], n_positives: usize) -> f64 {
    if n_positives == 0 {
        return 0.0;
    }
    let mut ranked = scored.to_vec();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    let mut precision: Vec<f64> = ranked
        .iter()
        .enumerate()
        .map(|(i, &(_, hit))| {
            tp += hit as usize;
            tp as f64 / (i + 1) as f64
        })
        .collect();
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let area: f64 = ranked
        .iter()
        .zip(&precision)
        .filter(|((_, hit), _)| *hit)
        .map(|(_, p)| p)
        .sum();
    area / n_positives as f64
}

/// Mean of the given values, `None` when empty.
pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// One image's top-k detections, ranked, with their matches.
pub(crate) struct MatchedImage {
    pub dets: Vec<HoiDetection>,
    pub matches: Vec<Option<usize>>,
}

pub(crate) fn match_images(
    dets: &[Vec<HoiDetection>],
    gts: &[Vec<GtInstance>],
    cfg: &EvalConfig,
    protocol: Protocol,
    exec: ExecMode,
) -> Result<Vec<MatchedImage>> {
    cfg.validate()?;
    if dets.len() != gts.len() {
        return Err(Error::shape(format!("{} images of detections", gts.len()), dets.len()));
    }
    Ok(exec.map_range(gts.len(), |i| {
        let ranked = top_k_select(dets[i].clone(), cfg.top_k);
        let matches = match_detections(&ranked, &gts[i], cfg, protocol);
        MatchedImage { dets: ranked, matches }
    }))
}
