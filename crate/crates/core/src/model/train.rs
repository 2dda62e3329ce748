//! Loss gradients through the network and a decoupled-weight-decay Adam
//! training loop.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{predictions_from_heads, HeadVars, HoiModel};
use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::assignment::{match_predictions, Assignment, CostWeights, GtInstance, Prediction};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::io::raster::Image;
use crate::losses::{total_loss_with_grad, LossBreakdown, LossWeights, PredictionGrad};

/// One training image with its annotations.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image: Image,
    pub gts: Vec<GtInstance>,
}

/// Loss and parameter gradients for one image.
#[derive(Debug, Clone)]
pub struct LossGradients {
    /// Per decoder layer loss under that layer's own matching.
    pub layer_losses: Vec<LossBreakdown>,
    pub assignments: Vec<Assignment>,
    /// Sum of the layer totals.
    pub aux_total: f64,
    /// One gradient per parameter, in store order.
    pub grads: Vec<Array2<f64>>,
}

fn seed_for_layer(t: &Tape, h: &HeadVars, preds: &[Prediction], grads: &[PredictionGrad]) -> Vec<(Var, Array2<f64>)> {
    let nq = preds.len();
    let n_cls = t.value(h.object_class).ncols();
    let n_act = t.value(h.action_class).ncols();
    let mut g_h = Array2::zeros((nq, 4));
    let mut g_o = Array2::zeros((nq, 4));
    let mut g_c = Array2::zeros((nq, n_cls));
    let mut g_a = Array2::zeros((nq, n_act));
    for (i, (p, g)) in preds.iter().zip(grads).enumerate() {
        let (hb, ob) = (p.human_box.to_array(), p.object_box.to_array());
        for k in 0..4 {
            g_h[[i, k]] = g.human_box[k] * hb[k] * (1.0 - hb[k]);
            g_o[[i, k]] = g.object_box[k] * ob[k] * (1.0 - ob[k]);
        }
        let dot: f64 = g.object_probs.iter().zip(&p.object_probs).map(|(d, q)| d * q).sum();
        for k in 0..n_cls {
            g_c[[i, k]] = p.object_probs[k] * (g.object_probs[k] - dot);
        }
        for k in 0..n_act {
            let q = p.action_probs[k];
            g_a[[i, k]] = g.action_probs[k] * q * (1.0 - q);
        }
    }
    vec![
        (h.human_box, g_h),
        (h.object_box, g_o),
        (h.object_class, g_c),
        (h.action_class, g_a),
    ]
}

/// Gradient of the layer-summed loss with respect to every parameter.
///
/// Each decoder layer is matched independently; the matchings are held
/// constant while differentiating.
pub fn loss_gradients(
    model: &HoiModel,
    image: &Image,
    gts: &[GtInstance],
    costs: &CostWeights,
    weights: &LossWeights,
) -> Result<LossGradients> {
    let mut t = Tape::new(&model.params);
    let heads = model.forward_tape(&mut t, image)?;
    let mut layer_losses = Vec::with_capacity(heads.len());
    let mut assignments = Vec::with_capacity(heads.len());
    let mut seeds = Vec::new();
    for (l, h) in heads.iter().enumerate() {
        let preds = predictions_from_heads(&t, h);
        let a = match_predictions(gts, &preds, costs)?;
        let (breakdown, g) = total_loss_with_grad(gts, &preds, &a, weights);
        if let Some(component) = breakdown.non_finite() {
            return Err(Error::NonFinite(format!("{component} loss at decoder layer {l}")));
        }
        seeds.extend(seed_for_layer(&t, h, &preds, &g));
        layer_losses.push(breakdown);
        assignments.push(a);
    }
    let grads = t.backward(&seeds);
    if let Some(i) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("gradient of {}", model.params.name(i))));
    }
    Ok(LossGradients {
        aux_total: layer_losses.iter().map(|b| b.total).sum(),
        layer_losses,
        assignments,
        grads,
    })
}

/// Layer-summed loss under fixed per-layer assignments (no gradients).
pub fn aux_loss_with_assignments(
    model: &HoiModel,
    image: &Image,
    gts: &[GtInstance],
    assignments: &[Assignment],
    weights: &LossWeights,
) -> Result<f64> {
    let layers = model.forward(image)?;
    if layers.len() != assignments.len() {
        return Err(Error::shape(format!("{} assignments", layers.len()), assignments.len()));
    }
    Ok(layers
        .iter()
        .zip(assignments)
        .map(|(preds, a)| crate::losses::total_loss(gts, preds, a, weights).total)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Images per step; 0 means the whole dataset.
    pub batch_size: usize,
    /// Clip the global gradient norm to this value.
    pub grad_clip: Option<f64>,
    /// Multiply the learning rate by `lr_drop_factor` from this step on.
    pub lr_drop_at: Option<usize>,
    pub lr_drop_factor: f64,
    /// Seeds the minibatch order.
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            steps: 1000,
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 0,
            grad_clip: None,
            lr_drop_at: None,
            lr_drop_factor: 0.1,
            seed: 0,
        }
    }
}

/// Adam with weight decay decoupled from the gradient step.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl AdamW {
    pub fn new(params: &ParamStore) -> Self {
        let zeros = || params.values().iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Array2<f64>], lr: f64, s: &TrainSettings) {
        self.t += 1;
        let bc1 = 1.0 - s.beta1.powi(self.t as i32);
        let bc2 = 1.0 - s.beta2.powi(self.t as i32);
        for (i, p) in params.values_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = s.beta1 * *m + (1.0 - s.beta1) * g;
                *v = s.beta2 * *v + (1.0 - s.beta2) * g * g;
                if lr != 0.0 {
                    let update = (*m / bc1) / ((*v / bc2).sqrt() + s.adam_eps);
                    *p -= lr * (update + s.weight_decay * *p);
                }
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    /// Final decoder layer's loss, averaged over the batch.
    pub final_layer: LossBreakdown,
    /// Layer-summed loss, averaged over the batch.
    pub aux_total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub log: Vec<StepLog>,
}

fn batch_indices(n: usize, s: &TrainSettings, step: usize, order: &mut [usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    if s.batch_size == 0 || s.batch_size >= n {
        return (0..n).collect();
    }
    let per_epoch = n.div_ceil(s.batch_size);
    let k = step % per_epoch;
    if k == 0 {
        order.shuffle(rng);
    }
    order[k * s.batch_size..((k + 1) * s.batch_size).min(n)].to_vec()
}

/// Train `model` in place on `data`.
pub fn train(
    model: &mut HoiModel,
    data: &[TrainSample],
    costs: &CostWeights,
    weights: &LossWeights,
    settings: &TrainSettings,
    exec: ExecMode,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut opt = AdamW::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(settings.steps);

    for step in 0..settings.steps {
        let batch = batch_indices(data.len(), settings, step, &mut order, &mut rng);
        let results = exec.map(&batch, |&i| {
            loss_gradients(model, &data[i].image, &data[i].gts, costs, weights)
        });
        let inv_b = 1.0 / batch.len() as f64;
        let mut grads: Vec<Array2<f64>> = model
            .params
            .values()
            .iter()
            .map(|p| Array2::zeros(p.raw_dim()))
            .collect();
        let mut final_layer = LossBreakdown::default();
        let mut aux_total = 0.0;
        for r in results {
            let r = r.map_err(|e| match e {
                Error::NonFinite(component) => Error::Diverged { step, component },
                other => other,
            })?;
            for (acc, g) in grads.iter_mut().zip(&r.grads) {
                acc.scaled_add(inv_b, g);
            }
            if let Some(last) = r.layer_losses.last() {
                final_layer.accumulate(last);
            }
            aux_total += r.aux_total;
        }
        final_layer.scale(inv_b);
        aux_total *= inv_b;
        if !aux_total.is_finite() {
            return Err(Error::Diverged {
                step,
                component: "total".into(),
            });
        }
        if let Some(max_norm) = settings.grad_clip {
            let norm = grads
                .iter()
                .map(|g| g.iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm > max_norm {
                let k = max_norm / norm;
                grads.iter_mut().for_each(|g| g.mapv_inplace(|v| v * k));
            }
        }
        let lr = match settings.lr_drop_at {
            Some(at) if step >= at => settings.learning_rate * settings.lr_drop_factor,
            _ => settings.learning_rate,
        };
        opt.step(&mut model.params, &grads, lr, settings);
        log.push(StepLog {
            step,
            final_layer,
            aux_total,
        });
    }
    Ok(TrainReport { log })
}
