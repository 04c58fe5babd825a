//! Prompt templates, label files and the hashing tokenizer.

mod labels;
mod templates;
mod tokenizer;

pub use labels::{builtin_activities, builtin_labels, load_labels, write_labels, ActivitySet, LabelEntry, LabelSet};
pub use templates::{render_prompt, sample_template, TemplateKind, TemplateSet};
pub use tokenizer::{name_collision_rate, stable_hash, TokenizedText, Tokenizer, BOS_ID, EOS_ID, PAD_ID};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("IndexOutOfRange: template index {index} but set has {len} templates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("EmptySet: template set has no templates")]
    EmptySet,
    #[error("EmptyPayload: prompt payload must be non-empty")]
    EmptyPayload,
    #[error("BadTemplate: template {template:?} must contain exactly one {{}} placeholder")]
    BadTemplate { template: String },
    #[error("BadTemplate: label_name set must hold exactly one template, got {count}")]
    NameSetSize { count: usize },
    #[error("ParseError: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}
