//! Named parameter tensors and the checkpoint container.
//!
//! Checkpoint layout (JSON Lines, UTF-8):
//!
//! ```text
//! {"format":"hoiset-checkpoint","version":1,"count":<n>,"meta":<any>}
//! {"name":"<param name>","shape":[rows,cols],"values":[...row-major...]}
//! ...one line per parameter, in store order
//! ```
//!
//! Values are written with shortest round-trip float formatting, so a
//! save/load cycle is bit-exact.

use std::io::{BufRead, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "hoiset-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn push(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn value(&self, idx: usize) -> &Array2<f64> {
        &self.values[idx]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Array2<f64> {
        &mut self.values[idx]
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.values
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W, meta: &serde_json::Value) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            count: self.len(),
            meta: meta.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for (name, v) in self.iter() {
            let rec = ParamRecord {
                name: name.to_owned(),
                shape: [v.nrows(), v.ncols()],
                values: v.iter().copied().collect(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(Self, serde_json::Value)> {
        let mut lines = r.lines();
        let header: CheckpointHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::Format("empty checkpoint".into())),
        };
        if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                header.format, header.version
            )));
        }
        let mut store = ParamStore::default();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ParamRecord = serde_json::from_str(&line)?;
            let arr = Array2::from_shape_vec((rec.shape[0], rec.shape[1]), rec.values)
                .map_err(|e| Error::Format(format!("parameter {}: {e}", rec.name)))?;
            store.push(rec.name, arr);
        }
        if store.len() != header.count {
            return Err(Error::Format(format!(
                "checkpoint declares {} parameters, found {}",
                header.count,
                store.len()
            )));
        }
        Ok((store, header.meta))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    count: usize,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}
