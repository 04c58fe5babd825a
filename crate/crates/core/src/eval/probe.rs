use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::Tensor;

/// Multinomial logistic regression on frozen embeddings, trained by
/// full-batch gradient descent on standardized features and scored by
/// k-fold held-out accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearProbe {
    pub steps: usize,
    pub lr: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for LinearProbe {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 0.1,
            folds: 3,
            seed: 0,
        }
    }
}

/// Mean held-out accuracy with the default probe and `k_folds` folds.
pub fn linear_probe(embeddings: &Tensor, labels: &[usize], k_folds: usize) -> Result<f32, EvalError> {
    LinearProbe {
        folds: k_folds,
        ..LinearProbe::default()
    }
    .run(embeddings, labels)
}

impl LinearProbe {
    pub fn run(&self, embeddings: &Tensor, labels: &[usize]) -> Result<f32, EvalError> {
        let n = embeddings.rows();
        if labels.len() != n {
            return Err(EvalError::ShapeMismatch(format!("{} labels for {n} embeddings", labels.len())));
        }
        if self.folds < 2 {
            return Err(EvalError::SizeMismatch(format!("need at least 2 folds, got {}", self.folds)));
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let need = 10 * classes.len();
        if n < need || n < self.folds {
            return Err(EvalError::TooFewSamples { n, need: need.max(self.folds) });
        }
        let y: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label listed"))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut total = 0.0;
        for fold in 0..self.folds {
            let (mut test, mut train) = (Vec::new(), Vec::new());
            for (pos, &i) in order.iter().enumerate() {
                if pos % self.folds == fold {
                    test.push(i);
                } else {
                    train.push(i);
                }
            }
            total += self.fold_accuracy(embeddings, &y, classes.len(), &train, &test);
        }
        Ok((total / self.folds as f64) as f32)
    }

    fn fold_accuracy(&self, x: &Tensor, y: &[usize], c: usize, train: &[usize], test: &[usize]) -> f64 {
        let d = x.cols();
        let mut mean = vec![0.0f64; d];
        let mut sd = vec![0.0f64; d];
        for &i in train {
            for (k, &v) in x.row(i).iter().enumerate() {
                mean[k] += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= train.len() as f64);
        for &i in train {
            for (k, &v) in x.row(i).iter().enumerate() {
                sd[k] += (v as f64 - mean[k]).powi(2);
            }
        }
        sd.iter_mut().for_each(|s| *s = (*s / train.len() as f64).sqrt().max(1e-8));
        let feat = |i: usize| -> Vec<f64> {
            x.row(i)
                .iter()
                .enumerate()
                .map(|(k, &v)| (v as f64 - mean[k]) / sd[k])
                .collect()
        };
        let xs: Vec<Vec<f64>> = train.iter().map(|&i| feat(i)).collect();

        let mut w = vec![0.0f64; c * d];
        let mut b = vec![0.0f64; c];
        let logits = |w: &[f64], b: &[f64], f: &[f64]| -> Vec<f64> {
            (0..c)
                .map(|k| b[k] + f.iter().zip(&w[k * d..(k + 1) * d]).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        };
        let m = train.len() as f64;
        for _ in 0..self.steps {
            let mut gw = vec![0.0f64; c * d];
            let mut gb = vec![0.0f64; c];
            for (f, &i) in xs.iter().zip(train) {
                let z = logits(&w, &b, f);
                let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
                let s: f64 = e.iter().sum();
                for k in 0..c {
                    let g = e[k] / s - (k == y[i]) as u8 as f64;
                    gb[k] += g;
                    for (gwk, fk) in gw[k * d..(k + 1) * d].iter_mut().zip(f) {
                        *gwk += g * fk;
                    }
                }
            }
            for (wk, g) in w.iter_mut().zip(&gw) {
                *wk -= self.lr * g / m;
            }
            for (bk, g) in b.iter_mut().zip(&gb) {
                *bk -= self.lr * g / m;
            }
        }
        let hits = test
            .iter()
            .filter(|&&i| {
                let z = logits(&w, &b, &feat(i));
                let mut best = 0;
                for k in 1..c {
                    if z[k] > z[best] {
                        best = k;
                    }
                }
                best == y[i]
            })
            .count();
        hits as f64 / test.len() as f64
    }
}
