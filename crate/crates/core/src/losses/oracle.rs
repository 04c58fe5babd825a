//! Direct scalar enumerations of each loss, in f64, for cross-checking the
//! tape versions.

use super::PairMasks;
use crate::Tensor;

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Triple loop over anchors, positives and valid candidates.
pub fn supcon(anchors: &Tensor, candidates: &Tensor, masks: &PairMasks, temperature: f64) -> f64 {
    let (n, m) = (anchors.rows(), candidates.rows());
    let mut total = 0.0;
    for i in 0..n {
        if masks.positive_count[i] == 0 {
            continue;
        }
        let logit = |k: usize| dot(anchors.row(i), candidates.row(k)) / temperature;
        let mut anchor_sum = 0.0;
        for j in 0..m {
            if !masks.is_positive(i, j) {
                continue;
            }
            let mut denom = 0.0;
            for k in 0..m {
                if masks.is_valid(i, k) {
                    denom += logit(k).exp();
                }
            }
            anchor_sum += (logit(j).exp() / denom).ln();
        }
        total -= anchor_sum / masks.positive_count[i] as f64;
    }
    total
}

pub fn name_description(descriptions: &Tensor, names: &Tensor, temperature: f64) -> f64 {
    let c = descriptions.rows();
    let mut total = 0.0;
    for i in 0..c {
        let mut denom = 0.0;
        for j in 0..c {
            denom += (dot(descriptions.row(i), names.row(j)) / temperature).exp();
        }
        let num = (dot(descriptions.row(i), names.row(i)) / temperature).exp();
        total -= (num / denom).ln();
    }
    total / c as f64
}

pub fn fer_image_name(images: &Tensor, names: &Tensor, targets: &[usize], w: &[f32], temperature: f64) -> f64 {
    let (b, c) = (images.rows(), names.rows());
    let mut total = 0.0;
    for i in 0..b {
        let mut denom = 0.0;
        for j in 0..c {
            denom += (dot(images.row(i), names.row(j)) / temperature).exp();
        }
        for k in 0..c {
            if targets[i] == k {
                let num = (dot(images.row(i), names.row(k)) / temperature).exp();
                total -= w[k] as f64 * (num / denom).ln();
            }
        }
    }
    total / b as f64
}

pub fn au_image_name(images: &Tensor, names: &Tensor, targets: &[Vec<u8>], w: &[f32], temperature: f64) -> f64 {
    let (b, c) = (images.rows(), names.rows());
    let mut total = 0.0;
    for i in 0..b {
        for k in 0..c {
            let x = dot(images.row(i), names.row(k)) / temperature;
            let y = targets[i][k] as f64;
            total -= w[k] as f64 * y * log_sigmoid(x) + (1.0 - y) * log_sigmoid(-x);
        }
    }
    total / b as f64
}
