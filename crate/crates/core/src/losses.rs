//! Set-prediction training loss over matched query/ground-truth pairs.
//!
//! Four terms: box L1, GIoU, object-class cross-entropy (with the no-pair
//! class for padded slots) and focal action loss. [`total_loss_with_grad`]
//! also returns the gradient with respect to every prediction output, which
//! the model chains back through its activations.

use serde::{Deserialize, Serialize};

use crate::assignment::{match_predictions, Assignment, CostWeights, GtInstance, Prediction};
use crate::error::Result;
use crate::geometry::{giou, giou_with_grad, l1, NormBox};

/// Loss weights plus the focal/clamping settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_b: f64,
    pub lambda_u: f64,
    pub lambda_c: f64,
    pub lambda_a: f64,
    /// Focusing exponent of the focal loss.
    pub focal_gamma: f64,
    /// Log arguments (`p` or `1 - p`) are clamped to at least this.
    pub prob_clamp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_b: 2.5,
            lambda_u: 1.0,
            lambda_c: 1.0,
            lambda_a: 1.0,
            focal_gamma: 2.0,
            prob_clamp: 1e-7,
        }
    }
}

impl LossWeights {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            lambda_b: self.lambda_b * k,
            lambda_u: self.lambda_u * k,
            lambda_c: self.lambda_c * k,
            lambda_a: self.lambda_a * k,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "box")]
    pub box_l1: f64,
    pub giou: f64,
    pub obj_class: f64,
    pub action: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("box", self.box_l1),
            ("giou", self.giou),
            ("obj_class", self.obj_class),
            ("action", self.action),
            ("total", self.total),
        ]
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite(&self) -> Option<&'static str> {
        self.fields().into_iter().find(|(_, v)| !v.is_finite()).map(|(n, _)| n)
    }

    pub(crate) fn accumulate(&mut self, other: &LossBreakdown) {
        self.box_l1 += other.box_l1;
        self.giou += other.giou;
        self.obj_class += other.obj_class;
        self.action += other.action;
        self.total += other.total;
    }

    pub(crate) fn scale(&mut self, k: f64) {
        self.box_l1 *= k;
        self.giou *= k;
        self.obj_class *= k;
        self.action *= k;
        self.total *= k;
    }
}

/// Gradient of a scalar loss with respect to one query's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrad {
    pub human_box: [f64; 4],
    pub object_box: [f64; 4],
    pub object_probs: Vec<f64>,
    pub action_probs: Vec<f64>,
}

impl PredictionGrad {
    fn zeros_like(p: &Prediction) -> Self {
        Self {
            human_box: [0.0; 4],
            object_box: [0.0; 4],
            object_probs: vec![0.0; p.object_probs.len()],
            action_probs: vec![0.0; p.action_probs.len()],
        }
    }
}

fn matched<'a>(
    gts: &'a [GtInstance],
    preds: &'a [Prediction],
    assignment: &'a Assignment,
) -> impl Iterator<Item = (&'a GtInstance, usize)> + 'a {
    gts.iter()
        .zip(assignment.permutation.iter().copied())
        .map(move |(g, j)| {
            debug_assert!(j < preds.len());
            (g, j)
        })
}

/// Mean over real ground truths of human L1 + object L1.
pub fn box_loss(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let s: f64 = matched(gts, preds, assignment)
        .map(|(g, j)| l1(&g.human_box, &preds[j].human_box) + l1(&g.object_box, &preds[j].object_box))
        .sum();
    s / gts.len() as f64
}

/// Mean over real ground truths of `2 - giou_human - giou_object`.
pub fn giou_loss(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let s: f64 = matched(gts, preds, assignment)
        .map(|(g, j)| 2.0 - giou(&g.human_box, &preds[j].human_box) - giou(&g.object_box, &preds[j].object_box))
        .sum();
    s / gts.len() as f64
}

/// Clamp `p` so the logarithm taken of it is finite: `log p` for a positive
/// target, `log(1 - p)` for a negative one. The flag marks a clamped value.
fn clamp_prob(target: bool, p: f64, clamp: f64) -> (f64, bool) {
    if target && p < clamp {
        (clamp, true)
    } else if !target && p > 1.0 - clamp {
        (1.0 - clamp, true)
    } else {
        (p, false)
    }
}

/// Class target of every query: the matched ground-truth class, or no-pair.
fn class_targets(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment) -> Vec<usize> {
    let no_pair = preds.first().map_or(0, Prediction::n_obj);
    let mut targets = vec![no_pair; preds.len()];
    for (g, j) in matched(gts, preds, assignment) {
        targets[j] = g.object_class;
    }
    targets
}

/// Mean over all queries of the negative log-likelihood of the class target.
pub fn class_loss(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment) -> f64 {
    class_loss_clamped(gts, preds, assignment, LossWeights::default().prob_clamp)
}

fn class_loss_clamped(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment, clamp: f64) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let targets = class_targets(gts, preds, assignment);
    let s: f64 = preds
        .iter()
        .zip(&targets)
        .map(|(p, &t)| -clamp_prob(true, p.object_probs[t], clamp).0.ln())
        .sum();
    s / preds.len() as f64
}

/// Binary focal loss of one element.
pub fn focal_elementwise(target: bool, p: f64, gamma: f64) -> f64 {
    if target {
        -(1.0 - p).powf(gamma) * p.ln()
    } else {
        -p.powf(gamma) * (1.0 - p).ln()
    }
}

/// Derivative of [`focal_elementwise`] with respect to `p`.
pub fn focal_elementwise_grad(target: bool, p: f64, gamma: f64) -> f64 {
    if target {
        gamma * (1.0 - p).powf(gamma - 1.0) * p.ln() - (1.0 - p).powf(gamma) / p
    } else {
        -gamma * p.powf(gamma - 1.0) * (1.0 - p).ln() + p.powf(gamma) / (1.0 - p)
    }
}

fn action_denominator(gts: &[GtInstance]) -> f64 {
    (gts.iter().map(GtInstance::n_positive_actions).sum::<usize>() as f64).max(1.0)
}

/// Focal loss over every query's actions (padded slots target all zeros),
/// normalized by the number of positive labels (at least 1).
pub fn action_loss(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment) -> f64 {
    action_loss_with(gts, preds, assignment, &LossWeights::default())
}

fn action_loss_with(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment, w: &LossWeights) -> f64 {
    let owner = assignment.gt_for_prediction();
    let mut s = 0.0;
    for (j, p) in preds.iter().enumerate() {
        let gt = owner[j].map(|slot| &gts[slot]);
        for (k, &prob) in p.action_probs.iter().enumerate() {
            let target = gt.is_some_and(|g| g.actions[k]);
            s += focal_elementwise(target, clamp_prob(target, prob, w.prob_clamp).0, w.focal_gamma);
        }
    }
    s / action_denominator(gts)
}

fn combine(box_l1: f64, giou: f64, obj_class: f64, action: f64, w: &LossWeights) -> LossBreakdown {
    LossBreakdown {
        box_l1,
        giou,
        obj_class,
        action,
        total: w.lambda_b * box_l1 + w.lambda_u * giou + w.lambda_c * obj_class + w.lambda_a * action,
    }
}

/// Weighted loss over one image's predictions under a fixed assignment.
pub fn total_loss(gts: &[GtInstance], preds: &[Prediction], assignment: &Assignment, w: &LossWeights) -> LossBreakdown {
    combine(
        box_loss(gts, preds, assignment),
        giou_loss(gts, preds, assignment),
        class_loss_clamped(gts, preds, assignment, w.prob_clamp),
        action_loss_with(gts, preds, assignment, w),
        w,
    )
}

/// Sum over decoder layers of the total loss, each layer matched on its own.
pub fn aux_total_loss(
    gts: &[GtInstance],
    per_layer: &[Vec<Prediction>],
    costs: &CostWeights,
    w: &LossWeights,
) -> Result<f64> {
    let mut s = 0.0;
    for preds in per_layer {
        let a = match_predictions(gts, preds, costs)?;
        s += total_loss(gts, preds, &a, w).total;
    }
    Ok(s)
}

fn box_sign(gt: &NormBox, pred: &NormBox) -> [f64; 4] {
    let (g, p) = (gt.to_array(), pred.to_array());
    let mut out = [0.0; 4];
    for k in 0..4 {
        let d = p[k] - g[k];
        out[k] = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    out
}

/// Loss and its gradient with respect to every prediction output.
///
/// The assignment is held fixed. Clamped probabilities and L1 kinks get a
/// zero derivative.
pub fn total_loss_with_grad(
    gts: &[GtInstance],
    preds: &[Prediction],
    assignment: &Assignment,
    w: &LossWeights,
) -> (LossBreakdown, Vec<PredictionGrad>) {
    let breakdown = total_loss(gts, preds, assignment, w);
    let mut grads: Vec<PredictionGrad> = preds.iter().map(PredictionGrad::zeros_like).collect();

    if !gts.is_empty() {
        let inv_n = 1.0 / gts.len() as f64;
        for (g, j) in matched(gts, preds, assignment) {
            let p = &preds[j];
            let gr = &mut grads[j];
            let sh = box_sign(&g.human_box, &p.human_box);
            let so = box_sign(&g.object_box, &p.object_box);
            let (_, dh) = giou_with_grad(&g.human_box, &p.human_box);
            let (_, dob) = giou_with_grad(&g.object_box, &p.object_box);
            for k in 0..4 {
                gr.human_box[k] += inv_n * (w.lambda_b * sh[k] - w.lambda_u * dh[k]);
                gr.object_box[k] += inv_n * (w.lambda_b * so[k] - w.lambda_u * dob[k]);
            }
        }
    }

    if !preds.is_empty() {
        let targets = class_targets(gts, preds, assignment);
        let inv_q = 1.0 / preds.len() as f64;
        for ((p, &t), gr) in preds.iter().zip(&targets).zip(grads.iter_mut()) {
            let (pc, clamped) = clamp_prob(true, p.object_probs[t], w.prob_clamp);
            if !clamped {
                gr.object_probs[t] += -w.lambda_c * inv_q / pc;
            }
        }
    }

    let owner = assignment.gt_for_prediction();
    let inv_d = 1.0 / action_denominator(gts);
    for (j, p) in preds.iter().enumerate() {
        let gt = owner[j].map(|slot| &gts[slot]);
        for (k, &prob) in p.action_probs.iter().enumerate() {
            let target = gt.is_some_and(|g| g.actions[k]);
            let (pc, clamped) = clamp_prob(target, prob, w.prob_clamp);
            if !clamped {
                grads[j].action_probs[k] += w.lambda_a * inv_d * focal_elementwise_grad(target, pc, w.focal_gamma);
            }
        }
    }

    (breakdown, grads)
}
