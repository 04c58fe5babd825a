//! Tiny image and text transformers projecting into a shared unit-norm space.
//!
//! The image side patchifies, prepends a learnable cls token and reads the
//! cls output; the text side embeds hashed tokens and reads the hidden state
//! at the end-of-sequence position. Both use pre-norm blocks with QuickGELU
//! MLPs.

mod arch;
mod encoder;

pub use arch::{ArchConfig, WeightInit};
pub use encoder::{ImageEncoder, TextEncoder, TextRole};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Image;
use crate::numerics::{Bound, ParamId, ParamStore, Tape, Var};
use crate::text::TokenizedText;
use crate::{Error, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("ShapeMismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("TokenOutOfRange: token id {id} not below vocabulary size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("ArchMismatch: {0}")]
    ArchMismatch(String),
}

/// Logit scale at initialization: exp(scale) = 1/0.07.
pub fn initial_logit_scale() -> f32 {
    (1.0f32 / 0.07).ln()
}

/// Upper bound on exp(logit scale).
pub const MAX_LOGIT_SCALE: f32 = 100.0;

/// Trainable state of the whole model plus its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: ArchConfig,
    pub store: ParamStore,
}

/// Truncated N(0, std²) sampler, redrawing outside ±2σ.
pub(crate) struct TruncNormal {
    normal: Normal<f32>,
    bound: f32,
}

impl TruncNormal {
    pub(crate) fn new(std: f32) -> Self {
        Self {
            normal: Normal::new(0.0, std).expect("positive std"),
            bound: 2.0 * std,
        }
    }

    pub(crate) fn tensor(&self, shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| loop {
                let v = self.normal.sample(rng);
                if v.abs() <= self.bound {
                    break v;
                }
            })
            .collect();
        Tensor::new(shape.to_vec(), data)
    }
}

/// Std of embedding tables, and of weight matrices under [`WeightInit::Fixed`].
pub const INIT_STD: f32 = 0.02;

/// Draws initial embedding tables and weight matrices.
pub(crate) struct Init {
    embed: TruncNormal,
    scheme: WeightInit,
}

impl Init {
    pub(crate) fn new(scheme: WeightInit) -> Self {
        Self {
            embed: TruncNormal::new(INIT_STD),
            scheme,
        }
    }

    pub(crate) fn embedding(&self, shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        self.embed.tensor(shape, rng)
    }

    /// A `[fan_in × fan_out]` matrix.
    pub(crate) fn matrix(&self, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
        match self.scheme {
            WeightInit::Fixed => self.embed.tensor(&[fan_in, fan_out], rng),
            WeightInit::FanIn => TruncNormal::new(1.0 / (fan_in as f32).sqrt()).tensor(&[fan_in, fan_out], rng),
        }
    }
}

/// Deterministic initialization from `seed`.
pub fn init_params(arch: &ArchConfig, seed: u64) -> Result<ModelParams, ModelError> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Init::new(arch.weight_init);
    let mut store = ParamStore::new();
    ImageEncoder::register(arch, &mut store, &init, &mut rng);
    TextEncoder::register(arch, TextRole::Name, &mut store, &init, &mut rng);
    if !arch.share_text_encoder {
        TextEncoder::register(arch, TextRole::Description, &mut store, &init, &mut rng);
    }
    store.insert("logit_scale", Tensor::new(vec![1], vec![initial_logit_scale()]));
    if arch.learnable_pretrain_temp {
        let s = (1.0f32 / arch.pretrain_temperature).ln();
        store.insert("pretrain.logit_scale_ii", Tensor::new(vec![1], vec![s]));
        store.insert("pretrain.logit_scale_ia", Tensor::new(vec![1], vec![s]));
    }
    Ok(ModelParams {
        arch: arch.clone(),
        store,
    })
}

impl ModelParams {
    pub fn image_encoder(&self) -> ImageEncoder {
        ImageEncoder::new(&self.arch, &self.store)
    }

    /// Encoder used for label names and activity texts, or for descriptions.
    /// Both roles resolve to the same parameters when the text encoder is shared.
    pub fn text_encoder(&self, role: TextRole) -> TextEncoder {
        let role = if self.arch.share_text_encoder {
            TextRole::Name
        } else {
            role
        };
        TextEncoder::new(&self.arch, role, &self.store)
    }

    pub fn logit_scale_id(&self) -> ParamId {
        self.store.id("logit_scale").expect("logit_scale parameter")
    }

    /// exp(logit scale) = 1/τ.
    pub fn logit_scale(&self) -> f32 {
        self.store.value(self.logit_scale_id()).item().exp()
    }

    pub fn temperature(&self) -> f32 {
        1.0 / self.logit_scale()
    }

    /// Keeps exp(logit scale) at or below [`MAX_LOGIT_SCALE`].
    pub fn clamp_logit_scales(&mut self) {
        let cap = MAX_LOGIT_SCALE.ln();
        for name in ["logit_scale", "pretrain.logit_scale_ii", "pretrain.logit_scale_ia"] {
            if let Some(id) = self.store.id(name) {
                let v = &mut self.store.value_mut(id).data_mut()[0];
                *v = v.min(cap);
            }
        }
    }

    /// Adds a `C`-way linear classifier over the image cls feature.
    pub fn add_linear_head(&mut self, n_classes: usize, seed: u64) {
        if self.store.id("head.w").is_some() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let init = Init::new(self.arch.weight_init);
        self.store.insert("head.w", init.matrix(self.arch.width, n_classes, &mut rng));
        self.store.insert("head.b", Tensor::zeros(&[n_classes]));
    }

    pub fn has_linear_head(&self) -> bool {
        self.store.id("head.w").is_some()
    }

    /// Linear-head logits `[B×C]` from image cls features.
    pub fn head_logits(&self, tape: &mut Tape, bound: &Bound, features: Var) -> Var {
        let w = bound.var(self.store.id("head.w").expect("linear head"));
        let b = bound.var(self.store.id("head.b").expect("linear head"));
        let z = tape.matmul(features, w);
        tape.add_row(z, b)
    }

    /// Image embeddings without gradient tracking, in chunks of `chunk`.
    pub fn embed_images(&self, images: &[Image], chunk: usize) -> Result<Tensor, Error> {
        let enc = self.image_encoder();
        self.embed_chunks(images, chunk, |tape, bound, part| enc.encode(tape, bound, part))
    }

    /// Cls features feeding the linear head, without gradient tracking.
    pub fn image_features(&self, images: &[Image], chunk: usize) -> Result<Tensor, Error> {
        let enc = self.image_encoder();
        self.embed_chunks(images, chunk, |tape, bound, part| enc.features(tape, bound, part))
    }

    pub fn embed_texts(&self, role: TextRole, texts: &[TokenizedText], chunk: usize) -> Result<Tensor, Error> {
        let enc = self.text_encoder(role);
        self.embed_chunks(texts, chunk, |tape, bound, part| enc.encode(tape, bound, part))
    }

    fn embed_chunks<T>(
        &self,
        items: &[T],
        chunk: usize,
        f: impl Fn(&mut Tape, &Bound, &[T]) -> Result<Var, Error>,
    ) -> Result<Tensor, Error> {
        let mut rows = 0;
        let mut cols = 0;
        let mut data = Vec::new();
        for part in items.chunks(chunk.max(1)) {
            let mut tape = Tape::new();
            let bound = self.store.bind(&mut tape);
            let out = f(&mut tape, &bound, part)?;
            let v = tape.value(out);
            rows += v.rows();
            cols = v.cols();
            data.extend_from_slice(v.data());
        }
        Ok(Tensor::matrix(rows, cols, data))
    }

    /// Gives descriptions their own text encoder, starting from a copy of the
    /// shared one. No-op when already separate.
    pub fn unshare_text_encoder(&mut self) {
        if !self.arch.share_text_encoder {
            return;
        }
        let src = TextRole::Name.prefix();
        let dst = TextRole::Description.prefix();
        for id in self.ids_with_prefix(&format!("{src}.")) {
            let name = format!("{dst}{}", &self.store.name(id)[src.len()..]);
            let value = self.store.value(id).clone();
            self.store.insert(name, value);
        }
        self.arch.share_text_encoder = false;
    }

    /// Ids of all parameters whose name starts with `prefix`.
    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.store
            .ids()
            .filter(|&id| self.store.name(id).starts_with(prefix))
            .collect()
    }
}

#[cfg(test)]
mod tests;
