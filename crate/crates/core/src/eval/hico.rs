//! HICO-DET style mAP: one AP per (object, action) class, default and
//! known-object settings, full / rare / non-rare splits.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{average_precision, match_images, mean, EvalConfig, Protocol};
use crate::assignment::GtInstance;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::inference::HoiDetection;

/// An HOI class and its number of training instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoiClass {
    pub object_class: usize,
    pub action_class: usize,
    pub train_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HicoClassAp {
    pub object_class: usize,
    pub action_class: usize,
    pub rare: bool,
    pub n_positives: usize,
    pub default_ap: f64,
    pub known_object_ap: f64,
}

/// Means over classes with at least one positive; `None` for an empty split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMap {
    pub full: Option<f64>,
    pub rare: Option<f64>,
    pub non_rare: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HicoReport {
    pub classes: Vec<HicoClassAp>,
    pub default: SplitMap,
    pub known_object: SplitMap,
}

impl SplitMap {
    fn from_classes(classes: &[HicoClassAp], ap: impl Fn(&HicoClassAp) -> f64) -> Self {
        let scored: Vec<&HicoClassAp> = classes.iter().filter(|c| c.n_positives > 0).collect();
        Self {
            full: mean(scored.iter().map(|c| ap(c))),
            rare: mean(scored.iter().filter(|c| c.rare).map(|c| ap(c))),
            non_rare: mean(scored.iter().filter(|c| !c.rare).map(|c| ap(c))),
        }
    }

    fn entries(&self) -> [(&'static str, Option<f64>); 3] {
        [("full", self.full), ("rare", self.rare), ("non_rare", self.non_rare)]
    }
}

impl HicoReport {
    /// Tab-separated `setting split class ap` lines: the six mAPs first, then
    /// every per-class AP (class written as `object:action`).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (setting, m) in [("default", &self.default), ("known_object", &self.known_object)] {
            for (split, v) in m.entries() {
                let v = v.map_or("n/a".to_owned(), |v| format!("{v:.6}"));
                let _ = writeln!(s, "{setting}\t{split}\tmAP\t{v}");
            }
        }
        for c in &self.classes {
            let split = if c.rare { "rare" } else { "non_rare" };
            let id = format!("{}:{}", c.object_class, c.action_class);
            let _ = writeln!(s, "default\t{split}\t{id}\t{:.6}", c.default_ap);
            let _ = writeln!(s, "known_object\t{split}\t{id}\t{:.6}", c.known_object_ap);
        }
        s
    }
}

/// Evaluate per-image detections against per-image ground truths.
///
/// Every positive `(object, action)` pair in the ground truth must appear in
/// `classes`. Detections of classes outside the table are ignored.
pub fn eval_hico(
    dets: &[Vec<HoiDetection>],
    gts: &[Vec<GtInstance>],
    classes: &[HoiClass],
    cfg: &EvalConfig,
    exec: ExecMode,
) -> Result<HicoReport> {
    let mut index = HashMap::new();
    for (i, c) in classes.iter().enumerate() {
        if index.insert((c.object_class, c.action_class), i).is_some() {
            return Err(Error::invalid(format!(
                "HOI class {}:{} listed twice",
                c.object_class, c.action_class
            )));
        }
    }
    let mut n_pos = vec![0usize; classes.len()];
    for (img, image_gts) in gts.iter().enumerate() {
        for g in image_gts {
            for (a, _) in g.actions.iter().enumerate().filter(|(_, &on)| on) {
                let &c = index
                    .get(&(g.object_class, a))
                    .ok_or_else(|| Error::invalid(format!("image {img}: unknown HOI class {}:{a}", g.object_class)))?;
                n_pos[c] += 1;
            }
        }
    }

    let matched = match_images(dets, gts, cfg, Protocol::Hico, exec)?;

    let mut default: Vec<Vec<(f64, bool)>> = vec![Vec::new(); classes.len()];
    let mut known: Vec<Vec<(f64, bool)>> = vec![Vec::new(); classes.len()];
    for (m, image_gts) in matched.iter().zip(gts) {
        for (d, hit) in m.dets.iter().zip(&m.matches) {
            let Some(&c) = index.get(&(d.object_class, d.action_class)) else {
                continue;
            };
            let entry = (d.score, hit.is_some());
            default[c].push(entry);
            if image_gts.iter().any(|g| g.object_class == d.object_class) {
                known[c].push(entry);
            }
        }
    }

    let per_class: Vec<HicoClassAp> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| HicoClassAp {
            object_class: c.object_class,
            action_class: c.action_class,
            rare: c.train_count < cfg.rare_threshold,
            n_positives: n_pos[i],
            default_ap: average_precision(&default[i], n_pos[i]),
            known_object_ap: average_precision(&known[i], n_pos[i]),
        })
        .collect();
    Ok(HicoReport {
        default: SplitMap::from_classes(&per_class, |c| c.default_ap),
        known_object: SplitMap::from_classes(&per_class, |c| c.known_object_ap),
        classes: per_class,
    })
}
