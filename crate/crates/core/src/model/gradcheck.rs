//! Central finite-difference check of [`loss_gradients`].
//!
//! The numeric side only runs forward passes and the plain loss functions,
//! with each decoder layer's matching frozen at the unperturbed point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::HoiModel;
use super::train::{aux_loss_with_assignments, loss_gradients};
use crate::assignment::{CostWeights, GtInstance};
use crate::error::Result;
use crate::exec::ExecMode;
use crate::geometry::NormBox;
use crate::io::raster::Image;
use crate::losses::LossWeights;

#[derive(Debug, Clone, Copy)]
pub struct GradcheckOptions {
    pub step: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-3,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub n_checked: usize,
    pub max_abs_error: f64,
    /// Largest relative error among entries above the absolute floor.
    pub max_rel_error: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// True when `analytic` and `numeric` agree to `rel_tol`, or both differ by
/// less than `abs_floor`.
pub fn grads_agree(analytic: f64, numeric: f64, opts: &GradcheckOptions) -> bool {
    let err = (analytic - numeric).abs();
    err <= opts.abs_floor || err <= opts.rel_tol * analytic.abs().max(numeric.abs())
}

/// Compare every parameter gradient against central differences.
pub fn gradcheck(
    model: &HoiModel,
    image: &Image,
    gts: &[GtInstance],
    costs: &CostWeights,
    weights: &LossWeights,
    opts: &GradcheckOptions,
    exec: ExecMode,
) -> Result<GradcheckReport> {
    let analytic = loss_gradients(model, image, gts, costs, weights)?;
    let assignments = &analytic.assignments;

    let coords: Vec<(usize, usize)> = (0..model.params.len())
        .flat_map(|p| (0..model.params.value(p).len()).map(move |k| (p, k)))
        .collect();
    let numeric = exec.map(&coords, |&(p, k)| -> Result<f64> {
        let eval = |delta: f64| {
            let mut m = model.clone();
            m.params.value_mut(p).as_slice_mut().expect("contiguous")[k] += delta;
            aux_loss_with_assignments(&m, image, gts, assignments, weights)
        };
        Ok((eval(opts.step)? - eval(-opts.step)?) / (2.0 * opts.step))
    });

    let mut report = GradcheckReport {
        n_checked: coords.len(),
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        failures: Vec::new(),
    };
    for (&(p, k), num) in coords.iter().zip(numeric) {
        let num = num?;
        let an = analytic.grads[p].as_slice().expect("contiguous")[k];
        let err = (an - num).abs();
        report.max_abs_error = report.max_abs_error.max(err);
        if err > opts.abs_floor {
            report.max_rel_error = report.max_rel_error.max(err / an.abs().max(num.abs()));
        }
        if !grads_agree(an, num, opts) {
            report.failures.push(GradMismatch {
                param: model.params.name(p).to_owned(),
                index: k,
                analytic: an,
                numeric: num,
            });
        }
    }
    Ok(report)
}

/// A random gradient-check instance: perturbed parameters (so no bias sits
/// exactly on a ReLU kink), a noise image and 1..=2 random ground truths.
pub fn random_instance(model: &HoiModel, seed: u64) -> (HoiModel, Image, Vec<GtInstance>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = model.clone();
    for v in m.params.values_mut() {
        v.mapv_inplace(|x| x + rng.random_range(-0.2..0.2));
    }
    let c = &m.config;
    let mut image = Image::new(3, c.image_h, c.image_w);
    image.data.iter_mut().for_each(|v| *v = rng.random());
    let n_gt = rng.random_range(1..=2.min(c.n_queries));
    let rand_box = |rng: &mut ChaCha8Rng| {
        NormBox::new(
            rng.random_range(0.25..0.75),
            rng.random_range(0.25..0.75),
            rng.random_range(0.1..0.4),
            rng.random_range(0.1..0.4),
        )
    };
    let gts = (0..n_gt)
        .map(|_| {
            let mut actions: Vec<bool> = (0..c.n_act_classes).map(|_| rng.random_bool(0.5)).collect();
            let first = rng.random_range(0..c.n_act_classes);
            actions[first] = true;
            GtInstance::new(
                rand_box(&mut rng),
                rand_box(&mut rng),
                rng.random_range(0..c.n_obj_classes),
                actions,
            )
        })
        .collect();
    (m, image, gts)
}
