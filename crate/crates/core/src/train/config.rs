use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{AdamW, TrainError};
use crate::data::AugmentPolicy;
use crate::model::ArchConfig;
use crate::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    #[default]
    Pretrain,
    Finetune,
}

/// What the fine-tuning loss compares images against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinetuneMode {
    /// Image–name term plus name–description term.
    NamesAndDescriptions,
    /// Image–name term only.
    NamesOnly,
    /// Image term against description embeddings.
    DescriptionsOnly,
    /// No text; a linear classifier over image features.
    LinearHead,
}

/// Everything one training run needs besides data and architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub stage: Stage,
    pub task: Task,
    /// Weight of the image–name term.
    pub lambda: f32,
    /// Fixed pre-training temperature.
    pub epsilon: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub lr: f32,
    pub min_lr: f32,
    pub optimizer: AdamW,
    pub seed: u64,
    /// Pre-train with the image–activity term.
    pub use_activity_text: bool,
    /// Pre-train with the image–image term.
    pub use_pretrained_image: bool,
    pub use_names: bool,
    pub use_descriptions: bool,
    pub share_text_encoder: bool,
    pub learnable_pretrain_temp: bool,
    /// Both views anchor the image–image term.
    pub symmetric_anchors: bool,
    /// Force the linear-head classifier even when text is enabled.
    pub linear_head: bool,
    /// Positives are only the other view of the same sample.
    pub instance_positives: bool,
    pub augment: AugmentPolicy,
    pub data: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Directory holding `label_name.txt`, `fe_description.txt`, ... overrides.
    pub templates: Option<PathBuf>,
    pub init: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::pretrain()
    }
}

impl RunConfig {
    /// Activity pre-training: 5 epochs with 1 of warmup.
    pub fn pretrain() -> Self {
        Self {
            stage: Stage::Pretrain,
            task: Task::Fer,
            lambda: 2.0,
            epsilon: 0.25,
            batch_size: 64,
            epochs: 5,
            warmup_epochs: 1,
            lr: 1e-3,
            min_lr: 1e-6,
            optimizer: AdamW::default(),
            seed: 0,
            use_activity_text: true,
            use_pretrained_image: true,
            use_names: true,
            use_descriptions: true,
            share_text_encoder: true,
            learnable_pretrain_temp: false,
            symmetric_anchors: false,
            linear_head: false,
            instance_positives: false,
            augment: AugmentPolicy::full(),
            data: None,
            labels: None,
            templates: None,
            init: None,
            out: None,
        }
    }

    /// Label-text fine-tuning for `task`.
    pub fn finetune(task: Task) -> Self {
        Self {
            stage: Stage::Finetune,
            task,
            epochs: 10,
            warmup_epochs: 1,
            lr: 1e-3,
            augment: AugmentPolicy::flip_only(),
            ..Self::pretrain()
        }
    }

    pub fn finetune_mode(&self) -> FinetuneMode {
        match (self.linear_head, self.use_names, self.use_descriptions) {
            (true, _, _) | (false, false, false) => FinetuneMode::LinearHead,
            (false, true, true) => FinetuneMode::NamesAndDescriptions,
            (false, true, false) => FinetuneMode::NamesOnly,
            (false, false, true) => FinetuneMode::DescriptionsOnly,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |key: &str, msg: String| Err(TrainError::Config(format!("{key}: {msg}")));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return err("lambda", format!("{} must be positive", self.lambda));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return err("epsilon", format!("{} must be positive", self.epsilon));
        }
        if self.batch_size < 2 {
            return err("batch_size", format!("{} must be at least 2", self.batch_size));
        }
        if self.epochs == 0 {
            return err("epochs", "must be positive".into());
        }
        if self.warmup_epochs > self.epochs {
            return err("warmup_epochs", format!("{} exceeds epochs {}", self.warmup_epochs, self.epochs));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err("lr", format!("{} must be positive", self.lr));
        }
        if !(self.min_lr >= 0.0 && self.min_lr <= self.lr) {
            return err("min_lr", format!("{} must lie in [0, lr]", self.min_lr));
        }
        let o = &self.optimizer;
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2)) {
            return err("optimizer", "betas must lie in [0, 1)".into());
        }
        if !(o.eps > 0.0 && o.weight_decay >= 0.0) {
            return err("optimizer", "eps must be positive and weight_decay non-negative".into());
        }
        if self.stage == Stage::Pretrain && !self.use_activity_text && !self.use_pretrained_image {
            return err("use_pretrained_image", "pre-training needs the image or the activity term".into());
        }
        Ok(())
    }

    /// `base` with the run's text-sharing and temperature switches applied.
    pub fn model_arch(&self, base: &ArchConfig) -> ArchConfig {
        ArchConfig {
            share_text_encoder: self.share_text_encoder,
            learnable_pretrain_temp: self.learnable_pretrain_temp,
            pretrain_temperature: self.epsilon,
            ..base.clone()
        }
    }
}
