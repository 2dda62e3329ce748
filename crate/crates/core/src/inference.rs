//! Turning query predictions into scored HOI detections.

use serde::{Deserialize, Serialize};

use crate::assignment::Prediction;
use crate::error::{Error, Result};
use crate::geometry::NormBox;

/// A scored `<human box, object box, object class, action class>` tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoiDetection {
    pub human_box: NormBox,
    pub object_box: NormBox,
    /// Zero-based object class.
    pub object_class: usize,
    /// Zero-based action class.
    pub action_class: usize,
    pub score: f64,
}

impl HoiDetection {
    pub fn validate(&self, n_obj: usize, n_act: usize) -> Result<()> {
        if self.object_class >= n_obj || self.action_class >= n_act {
            return Err(Error::invalid(format!(
                "detection class ({}, {}) out of range ({n_obj}, {n_act})",
                self.object_class, self.action_class
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::invalid(format!("score {} outside [0, 1]", self.score)));
        }
        Ok(())
    }
}

/// Best real object class of a prediction and its probability.
///
/// When "no pair" holds the overall maximum this is the second-highest entry;
/// otherwise it is the overall maximum. Both reduce to the argmax over the
/// first `N_obj` entries. Ties go to the lower index.
pub fn object_confidence(pred: &Prediction) -> (usize, f64) {
    let real = &pred.object_probs[..pred.n_obj()];
    let mut best = (0, real[0]);
    for (k, &p) in real.iter().enumerate().skip(1) {
        if p > best.1 {
            best = (k, p);
        }
    }
    best
}

/// One detection per query and action, in query-major order.
///
/// Detections whose score does not exceed `presence_threshold` are dropped;
/// a threshold of 0 or below disables the filter.
pub fn decode(preds: &[Prediction], presence_threshold: f64) -> Vec<HoiDetection> {
    let mut out = Vec::with_capacity(preds.iter().map(|p| p.action_probs.len()).sum());
    for pred in preds {
        let (object_class, conf) = object_confidence(pred);
        for (action_class, &a) in pred.action_probs.iter().enumerate() {
            let score = conf * a;
            if score > presence_threshold || presence_threshold <= 0.0 {
                out.push(HoiDetection {
                    human_box: pred.human_box,
                    object_box: pred.object_box,
                    object_class,
                    action_class,
                    score,
                });
            }
        }
    }
    out
}

/// The `k` highest-scoring detections, highest first.
///
/// The sort is stable, so equal scores keep their input order; for the output
/// of [`decode`] that is (query, action) order.
pub fn top_k_select(mut dets: Vec<HoiDetection>, k: usize) -> Vec<HoiDetection> {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    dets.truncate(k);
    dets
}
