//! Toy-scale query-based HOI network with reverse-mode gradients.

pub mod config;
pub mod gradcheck;
pub mod network;
pub mod params;
pub mod tape;
pub mod train;

pub use config::ModelConfig;
pub use gradcheck::{gradcheck, GradcheckOptions, GradcheckReport};
pub use network::{positional_encoding, HoiModel};
pub use params::ParamStore;
pub use train::{loss_gradients, train, AdamW, LossGradients, StepLog, TrainReport, TrainSample, TrainSettings};
