use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of stride-2 convolutions in the toy backbone.
pub const BACKBONE_LAYERS: usize = 3;

/// Network dimensions. Feature maps are `grid_h x grid_w` after the backbone
/// reduces the `image_h x image_w` input by three stride-2 convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub n_queries: usize,
    pub n_obj_classes: usize,
    pub n_act_classes: usize,
    pub ffn_hidden_dim: usize,
    /// Hidden width of the two box FFNs.
    pub head_hidden_dim: usize,
    pub backbone_channels: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub seed: u64,
    #[serde(default = "default_ln_eps")]
    pub layer_norm_eps: f64,
}

fn default_ln_eps() -> f64 {
    1e-5
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::paper()
    }
}

fn reduced(n: usize) -> usize {
    (0..BACKBONE_LAYERS).fold(n, |s, _| (s - 1) / 2 + 1)
}

impl ModelConfig {
    /// Full-size transformer dimensions on a small input raster.
    pub fn paper() -> Self {
        Self {
            d_model: 256,
            n_heads: 8,
            n_encoder_layers: 6,
            n_decoder_layers: 6,
            n_queries: 100,
            n_obj_classes: 80,
            n_act_classes: 117,
            ffn_hidden_dim: 2048,
            head_hidden_dim: 256,
            backbone_channels: 64,
            grid_h: 8,
            grid_w: 8,
            image_h: 64,
            image_w: 64,
            seed: 0,
            layer_norm_eps: 1e-5,
        }
    }

    /// Scale used for the synthetic overfit runs.
    pub fn desk() -> Self {
        Self {
            d_model: 32,
            n_heads: 4,
            n_encoder_layers: 2,
            n_decoder_layers: 2,
            n_queries: 8,
            n_obj_classes: 3,
            n_act_classes: 3,
            ffn_hidden_dim: 64,
            head_hidden_dim: 32,
            backbone_channels: 16,
            grid_h: 4,
            grid_w: 4,
            image_h: 32,
            image_w: 32,
            seed: 0,
            layer_norm_eps: 1e-5,
        }
    }

    /// Smallest configuration, used for finite-difference gradient checks.
    pub fn tiny() -> Self {
        Self {
            d_model: 16,
            n_heads: 2,
            n_encoder_layers: 1,
            n_decoder_layers: 1,
            n_queries: 4,
            n_obj_classes: 2,
            n_act_classes: 3,
            ffn_hidden_dim: 8,
            head_hidden_dim: 8,
            backbone_channels: 2,
            grid_h: 4,
            grid_w: 4,
            image_h: 32,
            image_w: 32,
            seed: 0,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "paper" | "default" => Some(Self::paper()),
            "desk" => Some(Self::desk()),
            "tiny" => Some(Self::tiny()),
            _ => None,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn n_tokens(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_queries", self.n_queries),
            ("n_obj_classes", self.n_obj_classes),
            ("n_act_classes", self.n_act_classes),
            ("ffn_hidden_dim", self.ffn_hidden_dim),
            ("head_hidden_dim", self.head_hidden_dim),
            ("backbone_channels", self.backbone_channels),
            ("image_h", self.image_h),
            ("image_w", self.image_w),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be >= 1")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !self.d_model.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "d_model {} must be divisible by 4 for the 2-D positional encoding",
                self.d_model
            )));
        }
        let (gh, gw) = (reduced(self.image_h), reduced(self.image_w));
        if (gh, gw) != (self.grid_h, self.grid_w) {
            return Err(Error::Config(format!(
                "grid {}x{} does not match backbone output {gh}x{gw} for a {}x{} image",
                self.grid_h, self.grid_w, self.image_h, self.image_w
            )));
        }
        if self.layer_norm_eps.is_nan() || self.layer_norm_eps <= 0.0 {
            return Err(Error::Config("layer_norm_eps must be positive".into()));
        }
        Ok(())
    }
}
