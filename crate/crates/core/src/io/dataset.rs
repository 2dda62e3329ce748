//! Annotated image collections.
//!
//! ```text
//! {"format":"hoiset-dataset","version":1,"n_obj":3,"n_act":3,
//!  "object_names":[...],"action_names":[...],
//!  "hoi_classes":[{"object_class":0,"action_class":1,"train_count":4},...]}
//! {"id":"synth_0000","image":"images/synth_0000.hras","instances":[...]}
//! ...one line per image
//! ```
//!
//! `image` is a raster sidecar path relative to the dataset file.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::lines::{read_lines, write_lines};
use super::raster::Image;
use crate::assignment::GtInstance;
use crate::error::{Error, Result};
use crate::eval::HoiClass;

pub const DATASET_FORMAT: &str = "hoiset-dataset";
pub const DATASET_VERSION: u32 = 1;
/// File name used when a dataset path names a directory.
pub const DATASET_FILE_NAME: &str = "dataset.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub n_obj: usize,
    pub n_act: usize,
    #[serde(default)]
    pub object_names: Vec<String>,
    #[serde(default)]
    pub action_names: Vec<String>,
    /// Training instance counts per HOI class, for the rare split.
    #[serde(default)]
    pub hoi_classes: Vec<HoiClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub instances: Vec<GtInstance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub images: Vec<ImageRecord>,
}

/// `path` itself, or `path/dataset.jsonl` when `path` is a directory.
pub fn resolve_dataset_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(DATASET_FILE_NAME)
    } else {
        path.to_owned()
    }
}

impl DatasetFile {
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        for (what, names, n) in [
            ("object", &h.object_names, h.n_obj),
            ("action", &h.action_names, h.n_act),
        ] {
            if !names.is_empty() && names.len() != n {
                return Err(Error::invalid(format!("{} {what} names for {n} classes", names.len())));
            }
        }
        let mut seen = HashSet::new();
        for c in &h.hoi_classes {
            if c.object_class >= h.n_obj || c.action_class >= h.n_act {
                return Err(Error::invalid(format!(
                    "HOI class {}:{} out of range",
                    c.object_class, c.action_class
                )));
            }
            if !seen.insert((c.object_class, c.action_class)) {
                return Err(Error::invalid(format!(
                    "HOI class {}:{} listed twice",
                    c.object_class, c.action_class
                )));
            }
        }
        let mut ids = HashSet::new();
        for rec in &self.images {
            if !ids.insert(rec.id.as_str()) {
                return Err(Error::invalid(format!("duplicate image id {:?}", rec.id)));
            }
            for g in &rec.instances {
                g.validate(h.n_obj, h.n_act)
                    .map_err(|e| Error::invalid(format!("image {:?}: {e}", rec.id)))?;
            }
        }
        Ok(())
    }

    pub fn ground_truths(&self) -> Vec<Vec<GtInstance>> {
        self.images.iter().map(|r| r.instances.clone()).collect()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_lines(w, DATASET_FORMAT, DATASET_VERSION, &self.header, &self.images)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let (header, images) = read_lines(r, DATASET_FORMAT, DATASET_VERSION)?;
        let ds = Self { header, images };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    /// Load from a file, or from `dataset.jsonl` inside a directory.
    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(resolve_dataset_path(path))?))
    }

    /// Read the raster of image `idx`; `base` is the dataset's directory.
    pub fn load_image(&self, base: &Path, idx: usize) -> Result<Image> {
        let rec = &self.images[idx];
        let rel = rec
            .image
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("image {:?} has no raster", rec.id)))?;
        Image::read_from(BufReader::new(File::open(base.join(rel))?))
    }
}
