use serde::{Deserialize, Serialize};

use super::ModelError;

/// Spread of the initial weight matrices. Embedding tables always start at
/// N(0, 0.02²); both schemes truncate at ±2σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// std = 1/√fan_in, so each layer keeps its input scale.
    #[default]
    FanIn,
    /// std = 0.02 for every matrix.
    Fixed,
}

/// Encoder dimensions and structural switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub patch: usize,
    pub width: usize,
    pub layers: usize,
    pub heads: usize,
    /// MLP hidden size as a multiple of the width.
    pub mlp_ratio: usize,
    pub text_width: usize,
    pub text_layers: usize,
    pub text_heads: usize,
    pub vocab_size: usize,
    pub context_len: usize,
    /// Shared embedding dimension d.
    pub embed_dim: usize,
    /// Names and descriptions go through one text encoder.
    pub share_text_encoder: bool,
    /// Learn separate pre-training temperatures instead of the fixed one.
    pub learnable_pretrain_temp: bool,
    /// Fixed pre-training temperature, also the start value when learnable.
    pub pretrain_temperature: f32,
    pub weight_init: WeightInit,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            image_height: 16,
            image_width: 16,
            patch: 4,
            width: 32,
            layers: 2,
            heads: 2,
            mlp_ratio: 4,
            text_width: 32,
            text_layers: 2,
            text_heads: 2,
            vocab_size: 1024,
            context_len: 32,
            embed_dim: 16,
            share_text_encoder: true,
            learnable_pretrain_temp: false,
            pretrain_temperature: 0.25,
            weight_init: WeightInit::FanIn,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: &str| Err(ModelError::Config(m.to_string()));
        let dims = [
            self.image_height,
            self.image_width,
            self.patch,
            self.width,
            self.layers,
            self.heads,
            self.mlp_ratio,
            self.text_width,
            self.text_layers,
            self.text_heads,
            self.embed_dim,
        ];
        if dims.contains(&0) {
            return err("all dimensions must be positive");
        }
        if self.image_height % self.patch != 0 || self.image_width % self.patch != 0 {
            return err("patch must divide image height and width");
        }
        if self.width % self.heads != 0 || self.text_width % self.text_heads != 0 {
            return err("width must be divisible by the number of heads");
        }
        if self.vocab_size <= 3 {
            return err("vocab_size must exceed the 3 reserved ids");
        }
        if self.context_len < 3 {
            return err("context_len must be at least 3");
        }
        if !(self.pretrain_temperature > 0.0 && self.pretrain_temperature.is_finite()) {
            return err("pretrain_temperature must be positive");
        }
        Ok(())
    }

    pub fn n_patches(&self) -> usize {
        (self.image_height / self.patch) * (self.image_width / self.patch)
    }

    /// Encoder dimensions only, ignoring the text-sharing and temperature switches.
    pub fn dims_fingerprint(&self) -> String {
        Self {
            share_text_encoder: true,
            learnable_pretrain_temp: false,
            pretrain_temperature: 0.25,
            ..self.clone()
        }
        .fingerprint()
    }

    /// Architecture fields that decide parameter shapes, as a stable string.
    pub fn fingerprint(&self) -> String {
        format!(
            "img{}x{}p{}w{}l{}h{}m{}|txt w{}l{}h{}v{}c{}|d{}|shared{}|ptemp{}",
            self.image_height,
            self.image_width,
            self.patch,
            self.width,
            self.layers,
            self.heads,
            self.mlp_ratio,
            self.text_width,
            self.text_layers,
            self.text_heads,
            self.vocab_size,
            self.context_len,
            self.embed_dim,
            self.share_text_encoder,
            self.learnable_pretrain_temp,
        )
    }
}
