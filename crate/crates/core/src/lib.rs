//! Query-based pairwise human-object interaction (HOI) set prediction.
//!
//! Matching costs and Hungarian assignment, set-prediction losses, a toy
//! transformer encoder-decoder with pair queries, detection decoding and
//! HICO-DET / V-COCO style mAP evaluation.

pub mod assignment;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod losses;
pub mod model;

pub use error::{Error, Result};
pub use exec::ExecMode;
