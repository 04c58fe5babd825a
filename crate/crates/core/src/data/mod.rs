//! Samples, synthetic generation, JSONL ingest, augmentation and batching.

mod augment;
mod batch;
mod jsonl;
mod synth;

pub use augment::{augment, AugmentPolicy};
pub use batch::{make_batches, Batch, BatchPlan};
pub use jsonl::{load_jsonl, write_jsonl};
pub use synth::{generate_synthetic, synthetic_labels, SynthConfig, ATTRIBUTE_WORDS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Task;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("ParseError: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("SchemaError: line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("BatchTooSmall: contrastive batch has {size} samples, need at least 2")]
    BatchTooSmall { size: usize },
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

/// Grayscale grid, row-major, pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Self {
        assert_eq!(pixels.len(), height * width, "image pixel count");
        Self { height, width, pixels }
    }

    pub fn at(&self, r: usize, c: usize) -> f32 {
        self.pixels[r * self.width + c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        self.pixels.chunks(self.width).map(<[f32]>::to_vec).collect()
    }
}

/// Class index (FER) or multi-hot vector of length C (AUR).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Class(usize),
    MultiHot(Vec<u8>),
}

impl Target {
    pub fn class(&self) -> Option<usize> {
        match self {
            Target::Class(c) => Some(*c),
            Target::MultiHot(_) => None,
        }
    }

    pub fn multi_hot(&self) -> Option<&[u8]> {
        match self {
            Target::MultiHot(v) => Some(v),
            Target::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub identity: usize,
    pub activity: usize,
    pub activity_text: String,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub task: Task,
    pub n_classes: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.empty_like()
        }
    }

    fn empty_like(&self) -> Dataset {
        Dataset {
            height: self.height,
            width: self.width,
            task: self.task,
            n_classes: self.n_classes,
            samples: Vec::new(),
        }
    }

    /// Deterministic shuffled split; the first part holds `round(frac·len)` samples.
    pub fn split(&self, frac: f32, seed: u64) -> (Dataset, Dataset) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let cut = ((self.len() as f32) * frac).round() as usize;
        let (a, b) = idx.split_at(cut.min(self.len()));
        (self.subset(a), self.subset(b))
    }

    /// FER only: keeps samples whose class is listed and renumbers targets to
    /// their position in `classes`.
    pub fn restrict_classes(&self, classes: &[usize]) -> Dataset {
        let mut out = self.empty_like();
        out.n_classes = classes.len();
        for s in &self.samples {
            if let Some(pos) = s.target.class().and_then(|c| classes.iter().position(|&k| k == c)) {
                let mut s = s.clone();
                s.target = Target::Class(pos);
                out.samples.push(s);
            }
        }
        out
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.samples.iter().filter_map(|s| s.target.class()).collect()
    }
}
