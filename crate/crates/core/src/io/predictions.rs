//! Per-image detections and raw per-query outputs.
//!
//! Detection file:
//!
//! ```text
//! {"format":"hoiset-detections","version":1,"n_obj":3,"n_act":3}
//! {"id":"synth_0000","detections":[{"human_box":{...},"object_box":{...},
//!   "object_class":0,"action_class":2,"score":0.93},...]}
//! ```
//!
//! Query file (`hoiset-queries`): same header plus `n_queries`, then
//! `{"id":...,"predictions":[...]}` with one entry per query.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::DatasetFile;
use super::lines::{read_lines, write_lines};
use crate::assignment::Prediction;
use crate::error::{Error, Result};
use crate::inference::HoiDetection;

pub const DETECTIONS_FORMAT: &str = "hoiset-detections";
pub const QUERIES_FORMAT: &str = "hoiset-queries";
pub const PREDICTIONS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionHeader {
    pub n_obj: usize,
    pub n_act: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub id: String,
    pub detections: Vec<HoiDetection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub header: PredictionHeader,
    pub images: Vec<DetectionRecord>,
}

fn by_id<'a, T>(
    dataset: &DatasetFile,
    records: impl Iterator<Item = (&'a str, T)>,
    empty: impl Fn() -> T,
) -> Result<Vec<T>> {
    let pos: HashMap<&str, usize> = dataset
        .images
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let mut out: Vec<Option<T>> = (0..dataset.images.len()).map(|_| None).collect();
    for (id, v) in records {
        let &i = pos
            .get(id)
            .ok_or_else(|| Error::invalid(format!("prediction for unknown image {id:?}")))?;
        if out[i].replace(v).is_some() {
            return Err(Error::invalid(format!("image {id:?} predicted twice")));
        }
    }
    Ok(out.into_iter().map(|v| v.unwrap_or_else(&empty)).collect())
}

impl PredictionFile {
    pub fn validate(&self) -> Result<()> {
        for rec in &self.images {
            for d in &rec.detections {
                d.validate(self.header.n_obj, self.header.n_act)
                    .map_err(|e| Error::invalid(format!("image {:?}: {e}", rec.id)))?;
            }
        }
        Ok(())
    }

    /// Detections in dataset image order; images without a record get none.
    pub fn aligned(&self, dataset: &DatasetFile) -> Result<Vec<Vec<HoiDetection>>> {
        if (self.header.n_obj, self.header.n_act) != (dataset.header.n_obj, dataset.header.n_act) {
            return Err(Error::invalid("prediction and dataset class counts differ"));
        }
        by_id(
            dataset,
            self.images.iter().map(|r| (r.id.as_str(), r.detections.clone())),
            Vec::new,
        )
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_lines(w, DETECTIONS_FORMAT, PREDICTIONS_VERSION, &self.header, &self.images)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let (header, images) = read_lines(r, DETECTIONS_FORMAT, PREDICTIONS_VERSION)?;
        let f = Self { header, images };
        f.validate()?;
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryHeader {
    pub n_obj: usize,
    pub n_act: usize,
    pub n_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFile {
    pub header: QueryHeader,
    pub images: Vec<QueryRecord>,
}

impl QueryFile {
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        for rec in &self.images {
            if rec.predictions.len() != h.n_queries {
                return Err(Error::shape(format!("{} queries", h.n_queries), rec.predictions.len()));
            }
            for p in &rec.predictions {
                if p.object_probs.len() != h.n_obj + 1 || p.action_probs.len() != h.n_act {
                    return Err(Error::invalid(format!("image {:?}: prediction width mismatch", rec.id)));
                }
                p.validate()
                    .map_err(|e| Error::invalid(format!("image {:?}: {e}", rec.id)))?;
            }
        }
        Ok(())
    }

    /// Query outputs in dataset image order; every image must be present.
    pub fn aligned(&self, dataset: &DatasetFile) -> Result<Vec<Vec<Prediction>>> {
        let out = by_id(
            dataset,
            self.images.iter().map(|r| (r.id.as_str(), Some(r.predictions.clone()))),
            || None,
        )?;
        out.into_iter()
            .zip(&dataset.images)
            .map(|(p, r)| p.ok_or_else(|| Error::invalid(format!("no query outputs for image {:?}", r.id))))
            .collect()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_lines(w, QUERIES_FORMAT, PREDICTIONS_VERSION, &self.header, &self.images)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let (header, images) = read_lines(r, QUERIES_FORMAT, PREDICTIONS_VERSION)?;
        let f = Self { header, images };
        f.validate()?;
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
