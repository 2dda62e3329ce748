//! mAP broken down by human-object center distance or by the larger box area.
//!
//! Detections are matched once against all ground truths under the HICO
//! protocol. Inside a bin, a detection matched to a ground truth of that bin is
//! a true positive, one matched elsewhere is ignored, and an unmatched one is a
//! false positive in every bin.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{average_precision, match_images, mean, EvalConfig, Protocol};
use crate::assignment::GtInstance;
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::geometry::center_distance;
use crate::inference::HoiDetection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMode {
    /// Euclidean distance between the two box centers.
    Distance,
    /// The larger of the two box areas.
    Area,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    /// Positive `(instance, action)` pairs in the bin.
    pub n_instances: usize,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedReport {
    pub mode: BinMode,
    pub bin_width: f64,
    /// mAP with every ground truth in play.
    pub overall: f64,
    /// Bins meeting the minimum count, by increasing index.
    pub bins: Vec<BinRow>,
}

impl BinnedReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,n_instances,map\n");
        for b in &self.bins {
            let _ = writeln!(s, "{:.4},{:.4},{},{:.6}", b.lo, b.hi, b.n_instances, b.map);
        }
        s
    }
}

/// The quantity a ground truth is binned by.
pub fn bin_value(g: &GtInstance, mode: BinMode) -> f64 {
    match mode {
        BinMode::Distance => center_distance(&g.human_box, &g.object_box),
        BinMode::Area => g.human_box.area().max(g.object_box.area()),
    }
}

/// `floor(value / width)`, nudged by 1e-9 so values on an edge computed with
/// rounding error (e.g. `0.3 / 0.1`) land in the upper bin.
pub fn bin_index(value: f64, width: f64) -> usize {
    (value / width + 1e-9).floor().max(0.0) as usize
}

pub fn binned_ap_analysis(
    dets: &[Vec<HoiDetection>],
    gts: &[Vec<GtInstance>],
    mode: BinMode,
    bin_width: f64,
    cfg: &EvalConfig,
    exec: ExecMode,
) -> Result<BinnedReport> {
    if bin_width.is_nan() || bin_width <= 0.0 {
        return Err(Error::Config(format!("bin width {bin_width} must be positive")));
    }
    let matched = match_images(dets, gts, cfg, Protocol::Hico, exec)?;
    let bins: Vec<Vec<usize>> = gts
        .iter()
        .map(|image| image.iter().map(|g| bin_index(bin_value(g, mode), bin_width)).collect())
        .collect();

    // Positives per bin and HOI class.
    let mut positives: BTreeMap<usize, BTreeMap<(usize, usize), usize>> = BTreeMap::new();
    let mut totals: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (image, image_bins) in gts.iter().zip(&bins) {
        for (g, &b) in image.iter().zip(image_bins) {
            for (a, _) in g.actions.iter().enumerate().filter(|(_, &on)| on) {
                *positives.entry(b).or_default().entry((g.object_class, a)).or_default() += 1;
                *totals.entry((g.object_class, a)).or_default() += 1;
            }
        }
    }

    // `bin = None` keeps every ground truth.
    let class_map = |bin: Option<usize>, counts: &BTreeMap<(usize, usize), usize>| {
        let aps = counts.iter().map(|(&(o, a), &n)| {
            let mut scored = Vec::new();
            for (m, image_bins) in matched.iter().zip(&bins) {
                for (d, hit) in m.dets.iter().zip(&m.matches) {
                    if (d.object_class, d.action_class) != (o, a) {
                        continue;
                    }
                    match (hit, bin) {
                        (None, _) => scored.push((d.score, false)),
                        (Some(gi), Some(b)) if image_bins[*gi] != b => {}
                        (Some(_), _) => scored.push((d.score, true)),
                    }
                }
            }
            average_precision(&scored, n)
        });
        mean(aps).unwrap_or(0.0)
    };

    let overall = class_map(None, &totals);
    let rows = positives
        .iter()
        .filter_map(|(&b, counts)| {
            let n: usize = counts.values().sum();
            (n >= cfg.min_bin_count).then(|| BinRow {
                index: b,
                lo: b as f64 * bin_width,
                hi: (b + 1) as f64 * bin_width,
                n_instances: n,
                map: class_map(Some(b), counts),
            })
        })
        .collect();
    Ok(BinnedReport {
        mode,
        bin_width,
        overall,
        bins: rows,
    })
}
