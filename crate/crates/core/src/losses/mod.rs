//! Contrastive and classification objectives over unit-norm embeddings.
//!
//! Every loss builds on the tape so gradients reach embeddings, encoders and
//! learnable temperatures alike.

mod masks;
pub mod oracle;
mod weights;

pub use masks::{build_pair_masks, PairMasks};
pub use weights::{class_weights, ClassWeights};

use thiserror::Error;

use crate::numerics::{Tape, Var};
use crate::Tensor;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("LengthMismatch: {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("BadTemperature: {0} must be positive and finite")]
    BadTemperature(f32),
    #[error("EmptyValidRow: anchor {anchor} has no valid candidates")]
    EmptyValidRow { anchor: usize },
    #[error("SizeMismatch: {0}")]
    SizeMismatch(String),
    #[error("TargetOutOfRange: sample {sample} has class {class}, only {classes} classes")]
    TargetOutOfRange {
        sample: usize,
        class: usize,
        classes: usize,
    },
    #[error("TargetNotBinary: sample {sample}, class {class}: value {value}")]
    TargetNotBinary { sample: usize, class: usize, value: u8 },
    #[error("BadLambda: {0} must be positive and finite")]
    BadLambda(f32),
    #[error("EmptyDataset: cannot derive class weights from no samples")]
    EmptyDataset,
}

/// How similarity logits are scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    /// Logits are cosine similarity divided by this value.
    Fixed(f32),
    /// Scalar leaf `s`; logits are cosine similarity times `exp(s)`.
    LogScale(Var),
}

/// `a · cᵀ` scaled by the temperature.
pub fn similarity_logits(tape: &mut Tape, a: Var, c: Var, temperature: Temperature) -> Result<Var, LossError> {
    let (da, dc) = (tape.value(a).cols(), tape.value(c).cols());
    if da != dc {
        return Err(LossError::SizeMismatch(format!("embedding dims {da} vs {dc}")));
    }
    let s = tape.matmul_t(a, c);
    Ok(match temperature {
        Temperature::Fixed(t) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(LossError::BadTemperature(t));
            }
            tape.scale(s, 1.0 / t)
        }
        Temperature::LogScale(v) => {
            let e = tape.exp(v);
            tape.scale_by(s, e)
        }
    })
}

/// Multi-positive contrastive loss, summed over anchors. Each anchor's mean
/// log-probability over its positives is taken against the softmax over its
/// valid candidates; anchors without positives contribute 0.
pub fn supcon_loss(
    tape: &mut Tape,
    anchors: Var,
    candidates: Var,
    masks: &PairMasks,
    temperature: Temperature,
) -> Result<Var, LossError> {
    let (n, m) = (tape.value(anchors).rows(), tape.value(candidates).rows());
    if n != masks.n_anchors || m != masks.n_candidates {
        return Err(LossError::SizeMismatch(format!(
            "masks are {}×{}, embeddings give {n}×{m}",
            masks.n_anchors, masks.n_candidates
        )));
    }
    for i in 0..n {
        if !masks.valid[i * m..(i + 1) * m].iter().any(|&v| v) {
            return Err(LossError::EmptyValidRow { anchor: i });
        }
    }
    let logits = similarity_logits(tape, anchors, candidates, temperature)?;
    let logp = tape.log_softmax_rows(logits, Some(masks.valid.clone()));
    let mut weight = vec![0.0f32; n * m];
    for i in 0..n {
        let count = masks.positive_count[i];
        if count == 0 {
            continue;
        }
        for j in 0..m {
            if masks.positive[i * m + j] {
                weight[i * m + j] = -1.0 / count as f32;
            }
        }
    }
    let w = tape.constant(Tensor::matrix(n, m, weight));
    let terms = tape.mul(logp, w);
    Ok(tape.sum_all(terms))
}

/// The two pre-training terms and their combination.
#[derive(Debug, Clone, Copy)]
pub struct PretrainLoss {
    pub total: Var,
    pub image_image: Var,
    pub image_activity: Option<Var>,
}

/// Image–image term plus, when activity-text embeddings are given, the
/// image–activity term; the total is their mean.
///
/// `labels` decide positives. `activity` holds one text row per sample. With
/// `symmetric_anchors` both views act as anchors in the image–image term,
/// which is then halved to keep its scale.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_loss(
    tape: &mut Tape,
    view1: Var,
    view2: Var,
    activity: Option<Var>,
    labels: &[usize],
    t_image: Temperature,
    t_activity: Temperature,
    symmetric_anchors: bool,
) -> Result<PretrainLoss, LossError> {
    let both = tape.concat_rows(&[view1, view2]);
    let image_image = if symmetric_anchors {
        let doubled: Vec<usize> = labels.iter().chain(labels).copied().collect();
        let self_map: Vec<usize> = (0..doubled.len()).collect();
        let masks = build_pair_masks(&doubled, &doubled, Some(&self_map))?;
        let l = supcon_loss(tape, both, both, &masks, t_image)?;
        tape.scale(l, 0.5)
    } else {
        supcon_loss(tape, view1, both, &PairMasks::image_image(labels), t_image)?
    };
    let Some(text) = activity else {
        return Ok(PretrainLoss {
            total: image_image,
            image_image,
            image_activity: None,
        });
    };
    let cands = tape.concat_rows(&[view1, text]);
    let image_activity = supcon_loss(tape, view1, cands, &PairMasks::image_text(labels, labels), t_activity)?;
    let sum = tape.add(image_image, image_activity);
    Ok(PretrainLoss {
        total: tape.scale(sum, 0.5),
        image_image,
        image_activity: Some(image_activity),
    })
}

/// Cross-entropy of description→name similarities against the diagonal.
pub fn name_description_loss(tape: &mut Tape, descriptions: Var, names: Var, temperature: Temperature) -> Result<Var, LossError> {
    let (c, c2) = (tape.value(descriptions).rows(), tape.value(names).rows());
    if c != c2 {
        return Err(LossError::SizeMismatch(format!("{c} descriptions vs {c2} names")));
    }
    let logits = similarity_logits(tape, descriptions, names, temperature)?;
    let targets: Vec<usize> = (0..c).collect();
    weighted_cross_entropy(tape, logits, &targets, &ClassWeights::uniform(c))
}

/// `−(1/B) Σ_i w[y_i] · log softmax(logits_i)[y_i]`
pub fn weighted_cross_entropy(tape: &mut Tape, logits: Var, targets: &[usize], w: &ClassWeights) -> Result<Var, LossError> {
    let (b, c) = (tape.value(logits).rows(), tape.value(logits).cols());
    check_batch(targets.len(), b)?;
    check_weights(w, c)?;
    let mut weight = vec![0.0f32; b * c];
    for (i, &y) in targets.iter().enumerate() {
        if y >= c {
            return Err(LossError::TargetOutOfRange {
                sample: i,
                class: y,
                classes: c,
            });
        }
        weight[i * c + y] = -w.w[y] / b as f32;
    }
    let logp = tape.log_softmax_rows(logits, None);
    let wv = tape.constant(Tensor::matrix(b, c, weight));
    let terms = tape.mul(logp, wv);
    Ok(tape.sum_all(terms))
}

/// `−(1/B) Σ_i Σ_c [w_c y log σ(x) + (1−y) log(1−σ(x))]`, weight on the
/// positive term only.
pub fn weighted_binary_cross_entropy(tape: &mut Tape, logits: Var, targets: &[Vec<u8>], w: &ClassWeights) -> Result<Var, LossError> {
    let (b, c) = (tape.value(logits).rows(), tape.value(logits).cols());
    check_batch(targets.len(), b)?;
    check_weights(w, c)?;
    let mut pos = vec![0.0f32; b * c];
    let mut neg = vec![0.0f32; b * c];
    for (i, row) in targets.iter().enumerate() {
        if row.len() != c {
            return Err(LossError::LengthMismatch {
                what: "multi-hot target",
                expected: c,
                got: row.len(),
            });
        }
        for (k, &y) in row.iter().enumerate() {
            match y {
                1 => pos[i * c + k] = -w.w[k] / b as f32,
                0 => neg[i * c + k] = -1.0 / b as f32,
                value => {
                    return Err(LossError::TargetNotBinary {
                        sample: i,
                        class: k,
                        value,
                    })
                }
            }
        }
    }
    let lp = tape.log_sigmoid(logits);
    let flipped = tape.scale(logits, -1.0);
    let ln = tape.log_sigmoid(flipped);
    let pos = tape.constant(Tensor::matrix(b, c, pos));
    let neg = tape.constant(Tensor::matrix(b, c, neg));
    let a = tape.mul(lp, pos);
    let bterm = tape.mul(ln, neg);
    let a = tape.sum_all(a);
    let bterm = tape.sum_all(bterm);
    Ok(tape.add(a, bterm))
}

pub fn fer_image_name_loss(
    tape: &mut Tape,
    images: Var,
    names: Var,
    targets: &[usize],
    w: &ClassWeights,
    temperature: Temperature,
) -> Result<Var, LossError> {
    let logits = similarity_logits(tape, images, names, temperature)?;
    weighted_cross_entropy(tape, logits, targets, w)
}

pub fn au_image_name_loss(
    tape: &mut Tape,
    images: Var,
    names: Var,
    targets: &[Vec<u8>],
    w: &ClassWeights,
    temperature: Temperature,
) -> Result<Var, LossError> {
    let logits = similarity_logits(tape, images, names, temperature)?;
    weighted_binary_cross_entropy(tape, logits, targets, w)
}

fn check_lambda(lambda: f32) -> Result<(), LossError> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(LossError::BadLambda(lambda))
    }
}

/// `(λ·L_IN + L_DN)/2` on the tape.
pub fn finetune_loss(tape: &mut Tape, image_name: Var, name_description: Var, lambda: f32) -> Result<Var, LossError> {
    check_lambda(lambda)?;
    let a = tape.scale(image_name, lambda);
    let s = tape.add(a, name_description);
    Ok(tape.scale(s, 0.5))
}

/// `(λ·L_IN + L_DN)/2` on plain values.
pub fn finetune_total(image_name: f32, name_description: f32, lambda: f32) -> Result<f32, LossError> {
    check_lambda(lambda)?;
    Ok((lambda * image_name + name_description) * 0.5)
}

fn check_batch(targets: usize, rows: usize) -> Result<(), LossError> {
    if targets != rows {
        return Err(LossError::LengthMismatch {
            what: "targets",
            expected: rows,
            got: targets,
        });
    }
    Ok(())
}

fn check_weights(w: &ClassWeights, classes: usize) -> Result<(), LossError> {
    if w.w.len() != classes {
        return Err(LossError::LengthMismatch {
            what: "class weights",
            expected: classes,
            got: w.w.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
