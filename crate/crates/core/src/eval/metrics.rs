use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::Tensor;

fn check_dims(zi: &Tensor, zt: &Tensor) -> Result<(), EvalError> {
    if zi.cols() != zt.cols() {
        return Err(EvalError::SizeMismatch(format!(
            "image embeddings have {} dims, text embeddings {}",
            zi.cols(),
            zt.cols()
        )));
    }
    if zt.rows() == 0 {
        return Err(EvalError::SizeMismatch("no class embeddings".into()));
    }
    Ok(())
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Most similar class per image; ties go to the lowest index.
pub fn predict_fer(zi: &Tensor, zt: &Tensor) -> Result<Vec<usize>, EvalError> {
    check_dims(zi, zt)?;
    Ok((0..zi.rows())
        .map(|i| {
            let mut best = (0, f64::NEG_INFINITY);
            for c in 0..zt.rows() {
                let s = dot(zi.row(i), zt.row(c));
                if s > best.1 {
                    best = (c, s);
                }
            }
            best.0
        })
        .collect())
}

/// Bit `c` is set iff `σ(zI·zT_c / τ) ≥ threshold`.
pub fn predict_au(zi: &Tensor, zt: &Tensor, temperature: f32, threshold: f32) -> Result<Vec<Vec<u8>>, EvalError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(EvalError::BadTemperature(temperature));
    }
    check_dims(zi, zt)?;
    Ok(threshold_logits(
        &(0..zi.rows())
            .map(|i| (0..zt.rows()).map(|c| dot(zi.row(i), zt.row(c)) / temperature as f64).collect())
            .collect::<Vec<Vec<f64>>>(),
        threshold,
    ))
}

/// `σ(x) ≥ threshold` as a logit comparison; exactly `x ≥ 0` at 0.5.
pub(crate) fn threshold_logits(logits: &[Vec<f64>], threshold: f32) -> Vec<Vec<u8>> {
    let cut = if threshold == 0.5 {
        0.0
    } else {
        let p = threshold as f64;
        (p / (1.0 - p)).ln()
    };
    logits
        .iter()
        .map(|row| row.iter().map(|&x| (x >= cut) as u8).collect())
        .collect()
}

/// Score given to a class with no true and no predicted positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmptyClassF1 {
    #[default]
    One,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub per_class: Vec<f32>,
    pub macro_f1: f32,
    /// `[tp, fp, fn, tn]` per class.
    pub counts: Vec<[usize; 4]>,
}

pub fn f1_scores(pred: &[Vec<u8>], truth: &[Vec<u8>], empty: EmptyClassF1) -> Result<F1Scores, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::ShapeMismatch(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    let c = truth.first().map_or(0, Vec::len);
    let mut counts = vec![[0usize; 4]; c];
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != c || t.len() != c {
            return Err(EvalError::ShapeMismatch(format!(
                "sample {i}: {} predicted and {} true entries, expected {c}",
                p.len(),
                t.len()
            )));
        }
        for k in 0..c {
            let slot = match (p[k], t[k]) {
                (1, 1) => 0,
                (1, 0) => 1,
                (0, 1) => 2,
                (0, 0) => 3,
                _ => return Err(EvalError::NotBinary { sample: i, class: k }),
            };
            counts[k][slot] += 1;
        }
    }
    let per_class: Vec<f32> = counts
        .iter()
        .map(|&[tp, fp, fn_, _]| {
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                match empty {
                    EmptyClassF1::One => 1.0,
                    EmptyClassF1::Zero => 0.0,
                }
            } else {
                (2.0 * tp as f64 / denom as f64) as f32
            }
        })
        .collect();
    let macro_f1 = if c == 0 {
        0.0
    } else {
        (per_class.iter().map(|&f| f as f64).sum::<f64>() / c as f64) as f32
    };
    Ok(F1Scores {
        per_class,
        macro_f1,
        counts,
    })
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f32, EvalError> {
    if pred.is_empty() || truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(EvalError::ShapeMismatch(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok((hits as f64 / pred.len() as f64) as f32)
}

pub(crate) fn one_hot(ids: &[usize], classes: usize) -> Vec<Vec<u8>> {
    ids.iter()
        .map(|&y| (0..classes).map(|c| (c == y) as u8).collect())
        .collect()
}
