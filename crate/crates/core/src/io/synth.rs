//! Synthetic scenes of colored rectangles.
//!
//! Humans are drawn in the red channel, objects in the green/blue channels
//! with a per-class color, so overlapping boxes stay visible. Box corners are
//! snapped to the pixel grid. The three actions are spatial relations between
//! a pair's boxes:
//!
//! - `overlapping`: the boxes intersect with positive area;
//! - `adjacent`: not overlapping and the edge gap is below 0.1;
//! - `distant_aligned`: centers more than 0.3 apart and within 0.05 of each
//!   other on at least one axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetFile, DatasetHeader, ImageRecord};
use super::raster::Image;
use crate::assignment::GtInstance;
use crate::error::{Error, Result};
use crate::eval::HoiClass;
use crate::geometry::{center_distance, NormBox};

pub const ACTION_NAMES: [&str; 3] = ["overlapping", "adjacent", "distant_aligned"];
const COLORS: [[u8; 2]; 6] = [[255, 0], [0, 255], [255, 255], [128, 255], [255, 128], [128, 128]];
const MAX_TRIES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_images: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub n_obj_classes: usize,
    pub min_instances: usize,
    pub max_instances: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_images: 8,
            image_h: 32,
            image_w: 32,
            n_obj_classes: 3,
            min_instances: 1,
            max_instances: 2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_h < 8 || self.image_w < 8 {
            return Err(Error::Config("synthetic images need at least 8x8 pixels".into()));
        }
        if self.n_obj_classes == 0 || self.n_obj_classes > COLORS.len() {
            return Err(Error::Config(format!("n_obj_classes must be in 1..={}", COLORS.len())));
        }
        if self.min_instances == 0 || self.min_instances > self.max_instances || self.max_instances > 3 {
            return Err(Error::Config("instance range must satisfy 1 <= min <= max <= 3".into()));
        }
        Ok(())
    }
}

/// Green/blue intensities of an object class.
pub fn object_color(class: usize) -> [u8; 2] {
    COLORS[class % COLORS.len()]
}

pub fn overlapping(a: &NormBox, b: &NormBox) -> bool {
    let (p, q) = (a.to_corners(), b.to_corners());
    p[2].min(q[2]) > p[0].max(q[0]) && p[3].min(q[3]) > p[1].max(q[1])
}

/// Largest axis-wise gap between the box edges; 0 when they touch or overlap.
pub fn edge_gap(a: &NormBox, b: &NormBox) -> f64 {
    let (p, q) = (a.to_corners(), b.to_corners());
    let gx = p[0].max(q[0]) - p[2].min(q[2]);
    let gy = p[1].max(q[1]) - p[3].min(q[3]);
    gx.max(gy).max(0.0)
}

/// Action labels of a human-object pair.
pub fn relation_labels(human: &NormBox, object: &NormBox) -> Vec<bool> {
    let over = overlapping(human, object);
    let adjacent = !over && edge_gap(human, object) < 0.1;
    let aligned = center_distance(human, object) > 0.3
        && ((human.cx - object.cx).abs() < 0.05 || (human.cy - object.cy).abs() < 0.05);
    vec![over, adjacent, aligned]
}

fn snap(b: NormBox, h: usize, w: usize) -> NormBox {
    let c = b.to_corners();
    let (fw, fh) = (w as f64, h as f64);
    NormBox::from_corners([
        (c[0] * fw).round() / fw,
        (c[1] * fh).round() / fh,
        (c[2] * fw).round() / fw,
        (c[3] * fh).round() / fh,
    ])
}

fn inside(b: &NormBox) -> bool {
    let c = b.to_corners();
    c[0] >= 0.0 && c[1] >= 0.0 && c[2] <= 1.0 && c[3] <= 1.0 && c[2] > c[0] && c[3] > c[1]
}

fn sample_pair(rng: &mut ChaCha8Rng, relation: usize) -> (NormBox, NormBox) {
    let human = NormBox::new(
        rng.random_range(0.15..0.85),
        rng.random_range(0.2..0.8),
        rng.random_range(0.15..0.3),
        rng.random_range(0.25..0.4),
    );
    let (ow, oh) = (rng.random_range(0.12..0.25), rng.random_range(0.12..0.25));
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let (cx, cy) = match relation {
        0 => (
            human.cx + rng.random_range(-0.12..0.12),
            human.cy + rng.random_range(-0.12..0.12),
        ),
        1 => {
            let gap = rng.random_range(0.02..0.07);
            if rng.random_bool(0.5) {
                let s = sign(rng);
                (
                    human.cx + s * ((human.w + ow) / 2.0 + gap),
                    human.cy + rng.random_range(-0.1..0.1),
                )
            } else {
                let s = sign(rng);
                (
                    human.cx + rng.random_range(-0.1..0.1),
                    human.cy + s * ((human.h + oh) / 2.0 + gap),
                )
            }
        }
        _ => {
            let d = sign(rng) * rng.random_range(0.35..0.6);
            let jitter = rng.random_range(-0.03..0.03);
            if rng.random_bool(0.5) {
                (human.cx + d, human.cy + jitter)
            } else {
                (human.cx + jitter, human.cy + d)
            }
        }
    };
    (human, NormBox::new(cx, cy, ow, oh))
}

/// Draw instances onto a black canvas.
pub fn render(instances: &[GtInstance], h: usize, w: usize) -> Image {
    let mut img = Image::new(3, h, w);
    let mut fill = |b: &NormBox, channel: usize, v: u8| {
        if v == 0 {
            return;
        }
        let c = b.to_corners();
        for y in 0..h {
            let py = (y as f64 + 0.5) / h as f64;
            if py < c[1] || py > c[3] {
                continue;
            }
            for x in 0..w {
                let px = (x as f64 + 0.5) / w as f64;
                if px >= c[0] && px <= c[2] {
                    let cur = img.get(channel, y, x);
                    img.set(channel, y, x, cur.max(v));
                }
            }
        }
    };
    for g in instances {
        fill(&g.human_box, 0, 255);
        if !g.no_object {
            let [gv, bv] = object_color(g.object_class);
            fill(&g.object_box, 1, gv);
            fill(&g.object_box, 2, bv);
        }
    }
    img
}

/// A dataset of `n_images` scenes plus their rasters.
///
/// Image `i` is stored as `images/synth_{i:04}.hras`. Every `(object, action)`
/// pair is listed in the class table with its instance count.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(DatasetFile, Vec<Image>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.n_images);
    let mut images = Vec::with_capacity(cfg.n_images);
    let mut counts = vec![vec![0usize; ACTION_NAMES.len()]; cfg.n_obj_classes];
    for i in 0..cfg.n_images {
        let target = rng.random_range(cfg.min_instances..=cfg.max_instances);
        let mut instances: Vec<GtInstance> = Vec::with_capacity(target);
        let mut tries = 0;
        while instances.len() < target && tries < MAX_TRIES {
            tries += 1;
            let relation = rng.random_range(0..ACTION_NAMES.len());
            let (hb, ob) = sample_pair(&mut rng, relation);
            let (hb, ob) = (snap(hb, cfg.image_h, cfg.image_w), snap(ob, cfg.image_h, cfg.image_w));
            if !inside(&hb) || !inside(&ob) {
                continue;
            }
            let actions = relation_labels(&hb, &ob);
            if !actions[relation] {
                continue;
            }
            // Keep pairs apart so each rectangle belongs to one instance.
            let clear = instances.iter().all(|g| {
                [g.human_box, g.object_box]
                    .iter()
                    .all(|b| edge_gap(b, &hb) > 0.05 && edge_gap(b, &ob) > 0.05)
            });
            if !clear {
                continue;
            }
            let class = rng.random_range(0..cfg.n_obj_classes);
            instances.push(GtInstance::new(hb, ob, class, actions));
        }
        if instances.len() < cfg.min_instances {
            return Err(Error::Config(format!(
                "could not place {} instances in image {i}",
                cfg.min_instances
            )));
        }
        for g in &instances {
            for (a, &on) in g.actions.iter().enumerate() {
                counts[g.object_class][a] += on as usize;
            }
        }
        let id = format!("synth_{i:04}");
        images.push(render(&instances, cfg.image_h, cfg.image_w));
        records.push(ImageRecord {
            image: Some(format!("images/{id}.hras")),
            id,
            seed: None,
            instances,
        });
    }
    let hoi_classes = (0..cfg.n_obj_classes)
        .flat_map(|o| (0..ACTION_NAMES.len()).map(move |a| (o, a)))
        .map(|(o, a)| HoiClass {
            object_class: o,
            action_class: a,
            train_count: counts[o][a],
        })
        .collect();
    let header = DatasetHeader {
        n_obj: cfg.n_obj_classes,
        n_act: ACTION_NAMES.len(),
        object_names: (0..cfg.n_obj_classes).map(|k| format!("rect_{k}")).collect(),
        action_names: ACTION_NAMES.iter().map(|s| s.to_string()).collect(),
        hoi_classes,
    };
    let ds = DatasetFile {
        header,
        images: records,
    };
    ds.validate()?;
    Ok((ds, images))
}
