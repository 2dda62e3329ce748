//! Matching costs between padded ground truths and query predictions, and the
//! optimal one-to-one assignment between them.

mod hungarian;

pub use hungarian::{assignment_cost, hungarian, solve_rectangular};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{giou, l1, NormBox};

/// One annotated human-object pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub human_box: NormBox,
    pub object_box: NormBox,
    /// Zero-based object class index.
    pub object_class: usize,
    /// Multi-hot action labels.
    pub actions: Vec<bool>,
    /// Interaction without an object (the object box is meaningless).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_object: bool,
}

impl GtInstance {
    pub fn new(human_box: NormBox, object_box: NormBox, object_class: usize, actions: Vec<bool>) -> Self {
        Self {
            human_box,
            object_box,
            object_class,
            actions,
            no_object: false,
        }
    }

    pub fn n_positive_actions(&self) -> usize {
        self.actions.iter().filter(|&&a| a).count()
    }

    pub fn validate(&self, n_obj: usize, n_act: usize) -> Result<()> {
        if self.object_class >= n_obj {
            return Err(Error::invalid(format!(
                "object class {} out of range (N_obj = {n_obj})",
                self.object_class
            )));
        }
        if self.actions.len() != n_act {
            return Err(Error::shape(format!("{n_act} actions"), self.actions.len()));
        }
        if self.n_positive_actions() == 0 {
            return Err(Error::invalid("instance has no positive action"));
        }
        if !self.human_box.is_normalized() || (!self.no_object && !self.object_box.is_normalized()) {
            return Err(Error::invalid("box coordinates outside [0, 1]"));
        }
        Ok(())
    }
}

/// One query's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub human_box: NormBox,
    pub object_box: NormBox,
    /// Softmax over `N_obj + 1` entries; the last one is "no pair".
    pub object_probs: Vec<f64>,
    /// Independent sigmoid probabilities per action.
    pub action_probs: Vec<f64>,
}

impl Prediction {
    pub fn n_obj(&self) -> usize {
        self.object_probs.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if self.object_probs.len() < 2 {
            return Err(Error::invalid("object distribution needs at least one real class"));
        }
        if !self.object_probs.iter().all(in_unit) || !self.action_probs.iter().all(in_unit) {
            return Err(Error::invalid("probability outside [0, 1]"));
        }
        let s: f64 = self.object_probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("object probabilities sum to {s}")));
        }
        Ok(())
    }
}

/// Weights of the four matching costs and the action-cost epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub eta_b: f64,
    pub eta_u: f64,
    pub eta_c: f64,
    pub eta_a: f64,
    pub epsilon: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            eta_b: 2.5,
            eta_u: 1.0,
            eta_c: 1.0,
            eta_a: 1.0,
            epsilon: 1e-4,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.eta_b, self.eta_u, self.eta_c, self.eta_a];
        if w.iter().any(|&x| x.is_nan() || x < 0.0) || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("cost weights must be >= 0 and epsilon > 0".into()));
        }
        Ok(())
    }
}

/// Optimal assignment of ground-truth slots to predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// `permutation[slot] = prediction index`.
    pub permutation: Vec<usize>,
    /// Number of real ground truths; slots at or beyond it are padding.
    pub n_real: usize,
}

impl Assignment {
    pub fn n_queries(&self) -> usize {
        self.permutation.len()
    }

    /// Slots filled with "no pair".
    pub fn padded_set(&self) -> std::ops::Range<usize> {
        self.n_real..self.permutation.len()
    }

    /// For each prediction, the real ground-truth slot it is matched to.
    pub fn gt_for_prediction(&self) -> Vec<Option<usize>> {
        let mut inv = vec![None; self.permutation.len()];
        for (slot, &pred) in self.permutation.iter().enumerate().take(self.n_real) {
            inv[pred] = Some(slot);
        }
        inv
    }
}

/// Larger of the human and object box L1 distances.
pub fn pair_box_cost(gt: &GtInstance, pred: &Prediction) -> f64 {
    l1(&gt.human_box, &pred.human_box).max(l1(&gt.object_box, &pred.object_box))
}

/// Larger of the negated human and object GIoUs.
pub fn pair_giou_cost(gt: &GtInstance, pred: &Prediction) -> f64 {
    (-giou(&gt.human_box, &pred.human_box)).max(-giou(&gt.object_box, &pred.object_box))
}

/// Negated predicted probability of the ground-truth object class.
pub fn object_class_cost(gt: &GtInstance, pred: &Prediction) -> f64 {
    -pred.object_probs[gt.object_class]
}

/// Balanced agreement over positive and negative action labels, negated.
pub fn action_class_cost(gt: &GtInstance, pred: &Prediction, epsilon: f64) -> f64 {
    let mut pos_hit = 0.0;
    let mut neg_hit = 0.0;
    let mut n_pos = 0.0;
    let mut n_neg = 0.0;
    for (&a, &p) in gt.actions.iter().zip(&pred.action_probs) {
        if a {
            pos_hit += p;
            n_pos += 1.0;
        } else {
            neg_hit += 1.0 - p;
            n_neg += 1.0;
        }
    }
    -0.5 * (pos_hit / (n_pos + epsilon) + neg_hit / (n_neg + epsilon))
}

/// The weighted matching cost of one real ground truth against one prediction.
pub fn pair_cost(gt: &GtInstance, pred: &Prediction, w: &CostWeights) -> f64 {
    w.eta_b * pair_box_cost(gt, pred)
        + w.eta_u * pair_giou_cost(gt, pred)
        + w.eta_c * object_class_cost(gt, pred)
        + w.eta_a * action_class_cost(gt, pred, w.epsilon)
}

/// `N_q x N_q` cost matrix; rows past the real ground truths are zero.
pub fn build_cost_matrix(gts: &[GtInstance], preds: &[Prediction], weights: &CostWeights) -> Result<Array2<f64>> {
    let nq = preds.len();
    if gts.len() > nq {
        return Err(Error::invalid(format!(
            "{} ground truths exceed {nq} queries",
            gts.len()
        )));
    }
    let mut cost = Array2::zeros((nq, nq));
    for (i, gt) in gts.iter().enumerate() {
        for (j, pred) in preds.iter().enumerate() {
            cost[[i, j]] = pair_cost(gt, pred, weights);
        }
    }
    Ok(cost)
}

/// Optimal assignment of padded ground truths to predictions.
///
/// Real rows are solved exactly; padded slots take the remaining predictions
/// in ascending index order.
pub fn match_predictions(gts: &[GtInstance], preds: &[Prediction], weights: &CostWeights) -> Result<Assignment> {
    let cost = build_cost_matrix(gts, preds, weights)?;
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matching cost".into()));
    }
    let real = cost.slice(ndarray::s![..gts.len(), ..]).to_owned();
    let mut permutation = solve_rectangular(&real)?;
    let mut taken = vec![false; preds.len()];
    for &j in &permutation {
        taken[j] = true;
    }
    permutation.extend((0..preds.len()).filter(|&j| !taken[j]));
    Ok(Assignment {
        permutation,
        n_real: gts.len(),
    })
}
