//! Similarity-based prediction, classification metrics, description-based
//! zero-shot evaluation and linear probes on frozen embeddings.

mod metrics;
mod probe;

pub use metrics::{accuracy, f1_scores, predict_au, predict_fer, EmptyClassF1, F1Scores};
pub use probe::{linear_probe, LinearProbe};

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::model::{ModelParams, TextRole};
use crate::text::{render_prompt, LabelEntry, TemplateSet, Tokenizer};
use crate::train::Prompts;
use crate::{Error, Task, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("SizeMismatch: {0}")]
    SizeMismatch(String),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("BadTemperature: {0} must be positive and finite")]
    BadTemperature(f32),
    #[error("NotBinary: sample {sample}, class {class} is neither 0 nor 1")]
    NotBinary { sample: usize, class: usize },
    #[error("EmptyInput: nothing to score")]
    EmptyInput,
    #[error("ClassOverlap: classes {0:?} are both seen and unseen")]
    ClassOverlap(Vec<usize>),
    #[error("TooFewSamples: {n} samples, need at least {need}")]
    TooFewSamples { n: usize, need: usize },
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
}

/// Which label text stands for each class at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClassText {
    #[default]
    Names,
    Descriptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub class_text: ClassText,
    pub empty_class_f1: EmptyClassF1,
    pub threshold: f32,
    pub chunk: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            class_text: ClassText::Names,
            empty_class_f1: EmptyClassF1::One,
            threshold: 0.5,
            chunk: 256,
        }
    }
}

/// Scores of one model on one dataset.
///
/// `confusion` is `[true][predicted]` counts for FER and `[tp, fp, fn, tn]`
/// per class for AUR. AUR accuracy is the fraction of correct entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub per_class_f1: Vec<f32>,
    pub macro_f1: f32,
    pub accuracy: f32,
    pub confusion: Vec<Vec<usize>>,
    pub n_samples: usize,
    pub fingerprint: String,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn f1_csv(&self) -> String {
        let mut out = String::from("class,f1\n");
        for (c, f) in self.per_class_f1.iter().enumerate() {
            let _ = writeln!(out, "{c},{f}");
        }
        out
    }

    /// Writes the JSON report and a `class,f1` table next to it.
    pub fn write(&self, json_path: impl AsRef<Path>) -> Result<(), EvalError> {
        let json_path = json_path.as_ref();
        std::fs::write(json_path, self.to_json())?;
        std::fs::write(json_path.with_extension("f1.csv"), self.f1_csv())?;
        Ok(())
    }

    /// The task's headline number: accuracy for FER, macro F1 for AUR.
    pub fn headline(&self) -> f32 {
        match self.task {
            Task::Fer => self.accuracy,
            Task::Aur => self.macro_f1,
        }
    }
}

/// Class-side embeddings from template 0 of the name or description set.
pub fn class_embeddings(
    model: &ModelParams,
    labels: &[LabelEntry],
    text: ClassText,
    task: Task,
    prompts: &Prompts,
) -> Result<Tensor, Error> {
    let tokenizer = Tokenizer::new(model.arch.vocab_size, model.arch.context_len);
    let (set, role): (&TemplateSet, TextRole) = match text {
        ClassText::Names => (&prompts.label_name, TextRole::Name),
        ClassText::Descriptions => (prompts.description(task), TextRole::Description),
    };
    let tokens = labels
        .iter()
        .map(|l| {
            let payload = match text {
                ClassText::Names => &l.name,
                ClassText::Descriptions => &l.description,
            };
            Ok(tokenizer.tokenize(&render_prompt(set, 0, payload)?))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    model.embed_texts(role, &tokens, 64)
}

/// Class predictions (FER) or multi-hot predictions (AUR) for every sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Classes(Vec<usize>),
    MultiHot(Vec<Vec<u8>>),
}

pub fn predict(
    model: &ModelParams,
    data: &Dataset,
    labels: &[LabelEntry],
    prompts: &Prompts,
    opts: &EvalOptions,
) -> Result<Predictions, Error> {
    if labels.len() != data.n_classes {
        return Err(EvalError::SizeMismatch(format!("{} labels for {} classes", labels.len(), data.n_classes)).into());
    }
    let images: Vec<_> = data.samples.iter().map(|s| s.image.clone()).collect();
    if model.has_linear_head() {
        let feats = model.image_features(&images, opts.chunk)?;
        let logits = head_logits(model, &feats);
        if logits.first().map_or(0, Vec::len) != data.n_classes && !logits.is_empty() {
            return Err(EvalError::SizeMismatch(format!(
                "linear head has {} outputs for {} classes",
                logits[0].len(),
                data.n_classes
            ))
            .into());
        }
        return Ok(match data.task {
            Task::Fer => Predictions::Classes(
                logits
                    .iter()
                    .map(|row| {
                        let mut best = 0;
                        for k in 1..row.len() {
                            if row[k] > row[best] {
                                best = k;
                            }
                        }
                        best
                    })
                    .collect(),
            ),
            Task::Aur => Predictions::MultiHot(metrics::threshold_logits(&logits, opts.threshold)),
        });
    }
    let zi = model.embed_images(&images, opts.chunk)?;
    let zt = class_embeddings(model, labels, opts.class_text, data.task, prompts)?;
    Ok(match data.task {
        Task::Fer => Predictions::Classes(predict_fer(&zi, &zt)?),
        Task::Aur => Predictions::MultiHot(predict_au(&zi, &zt, model.temperature(), opts.threshold)?),
    })
}

fn head_logits(model: &ModelParams, feats: &Tensor) -> Vec<Vec<f64>> {
    let w = model.store.value(model.store.id("head.w").expect("linear head"));
    let b = model.store.value(model.store.id("head.b").expect("linear head"));
    let c = b.len();
    (0..feats.rows())
        .map(|i| {
            (0..c)
                .map(|k| {
                    b.data()[k] as f64
                        + feats
                            .row(i)
                            .iter()
                            .enumerate()
                            .map(|(j, &f)| f as f64 * w.data()[j * c + k] as f64)
                            .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

fn class_targets(data: &Dataset) -> Result<Vec<usize>, EvalError> {
    data.samples
        .iter()
        .enumerate()
        .map(|(i, s)| match s.target.class() {
            Some(c) if c < data.n_classes => Ok(c),
            _ => Err(EvalError::ShapeMismatch(format!("sample {i} has no class below {}", data.n_classes))),
        })
        .collect()
}

fn multi_hot_targets(data: &Dataset) -> Result<Vec<Vec<u8>>, EvalError> {
    data.samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.target
                .multi_hot()
                .map(<[u8]>::to_vec)
                .ok_or_else(|| EvalError::ShapeMismatch(format!("sample {i} has no multi-hot target")))
        })
        .collect()
}

/// Scores predictions against the dataset's targets.
pub fn score(data: &Dataset, preds: &Predictions, empty: EmptyClassF1, fingerprint: String) -> Result<EvalReport, Error> {
    let c = data.n_classes;
    let (per_class_f1, macro_f1, acc, confusion) = match preds {
        Predictions::Classes(p) => {
            let truth = class_targets(data)?;
            let f1 = f1_scores(&metrics::one_hot(p, c), &metrics::one_hot(&truth, c), empty)?;
            let mut confusion = vec![vec![0usize; c]; c];
            for (&t, &q) in truth.iter().zip(p) {
                confusion[t][q] += 1;
            }
            (f1.per_class, f1.macro_f1, accuracy(p, &truth)?, confusion)
        }
        Predictions::MultiHot(p) => {
            let truth = multi_hot_targets(data)?;
            if truth.is_empty() {
                return Err(EvalError::EmptyInput.into());
            }
            let f1 = f1_scores(p, &truth, empty)?;
            let correct: usize = f1.counts.iter().map(|k| k[0] + k[3]).sum();
            let acc = (correct as f64 / (truth.len() * c) as f64) as f32;
            let confusion = f1.counts.iter().map(|k| k.to_vec()).collect();
            (f1.per_class, f1.macro_f1, acc, confusion)
        }
    };
    Ok(EvalReport {
        task: data.task,
        per_class_f1,
        macro_f1,
        accuracy: acc,
        confusion,
        n_samples: data.len(),
        fingerprint,
    })
}

/// Predicts and scores in one go.
pub fn evaluate(
    model: &ModelParams,
    data: &Dataset,
    labels: &[LabelEntry],
    prompts: &Prompts,
    opts: &EvalOptions,
) -> Result<EvalReport, Error> {
    let preds = predict(model, data, labels, prompts, opts)?;
    score(data, &preds, opts.empty_class_f1, model.arch.fingerprint())
}

/// Classifies samples of classes never trained on by their similarity to
/// the unseen classes' description embeddings.
///
/// `data` holds only unseen-class samples with targets indexing
/// `unseen_labels`; `seen` and `unseen` are the original class ids.
pub fn zero_shot_eval(
    model: &ModelParams,
    data: &Dataset,
    unseen_labels: &[LabelEntry],
    seen: &[usize],
    unseen: &[usize],
    prompts: &Prompts,
) -> Result<EvalReport, Error> {
    let overlap: Vec<usize> = unseen.iter().filter(|c| seen.contains(c)).copied().collect();
    if !overlap.is_empty() {
        return Err(EvalError::ClassOverlap(overlap).into());
    }
    if data.task != Task::Fer {
        return Err(EvalError::SizeMismatch("zero-shot evaluation scores single-label data".into()).into());
    }
    if unseen_labels.len() != unseen.len() || data.n_classes != unseen.len() {
        return Err(EvalError::SizeMismatch(format!(
            "{} unseen labels, {} unseen classes, dataset has {}",
            unseen_labels.len(),
            unseen.len(),
            data.n_classes
        ))
        .into());
    }
    let images: Vec<_> = data.samples.iter().map(|s| s.image.clone()).collect();
    let zi = model.embed_images(&images, 256)?;
    let zt = class_embeddings(model, unseen_labels, ClassText::Descriptions, Task::Fer, prompts)?;
    let preds = Predictions::Classes(predict_fer(&zi, &zt)?);
    score(data, &preds, EmptyClassF1::One, model.arch.fingerprint())
}
