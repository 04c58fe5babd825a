use super::LossError;
use crate::data::{Dataset, Target};
use crate::Task;

/// Per-class loss weights with mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub w: Vec<f32>,
}

impl ClassWeights {
    pub fn uniform(classes: usize) -> Self {
        Self { w: vec![1.0; classes] }
    }

    /// Scales raw positive weights to mean 1.
    pub fn normalized(raw: &[f64]) -> Self {
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        Self {
            w: raw.iter().map(|&r| (r / mean) as f32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Inverse-frequency weights. FER: `1/max(freq, 1/(10C))`. AUR:
/// `(1−p)/max(p, 1/(10C))` with `p` the positive rate; the numerator shares
/// the floor so an always-on class keeps a positive weight. AUR classes
/// without positives get weight 1 and the rest are normalized on their own.
pub fn class_weights(dataset: &Dataset, task: Task) -> Result<ClassWeights, LossError> {
    if dataset.is_empty() {
        return Err(LossError::EmptyDataset);
    }
    let c = dataset.n_classes;
    let n = dataset.len() as f64;
    let floor = 1.0 / (10.0 * c as f64);
    let mut counts = vec![0usize; c];
    for (i, s) in dataset.samples.iter().enumerate() {
        match (&s.target, task) {
            (Target::Class(y), Task::Fer) if *y < c => counts[*y] += 1,
            (Target::Class(y), Task::Fer) => {
                return Err(LossError::TargetOutOfRange {
                    sample: i,
                    class: *y,
                    classes: c,
                })
            }
            (Target::MultiHot(v), Task::Aur) if v.len() == c => {
                for (k, &b) in v.iter().enumerate() {
                    counts[k] += (b == 1) as usize;
                }
            }
            (Target::MultiHot(v), Task::Aur) => {
                return Err(LossError::LengthMismatch {
                    what: "multi-hot target",
                    expected: c,
                    got: v.len(),
                })
            }
            _ => return Err(LossError::SizeMismatch(format!("sample {i} target does not fit task {task:?}"))),
        }
    }
    let raw: Vec<f64> = counts
        .iter()
        .map(|&k| {
            let p = k as f64 / n;
            match task {
                Task::Fer => 1.0 / p.max(floor),
                Task::Aur => (1.0 - p).max(floor) / p.max(floor),
            }
        })
        .collect();
    if task == Task::Aur && counts.iter().any(|&k| k == 0) {
        // a class with no positives never uses its weight; keep it out of the mean
        let present: Vec<f64> = raw.iter().zip(&counts).filter(|(_, &k)| k > 0).map(|(&r, _)| r).collect();
        if present.is_empty() {
            return Ok(ClassWeights::uniform(c));
        }
        let scaled = ClassWeights::normalized(&present);
        let mut it = scaled.w.into_iter();
        return Ok(ClassWeights {
            w: counts.iter().map(|&k| if k > 0 { it.next().expect("present class") } else { 1.0 }).collect(),
        });
    }
    Ok(ClassWeights::normalized(&raw))
}
