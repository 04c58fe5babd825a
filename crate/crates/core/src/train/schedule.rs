use std::f64::consts::PI;

use super::TrainError;

/// Linear warmup to `base_lr`, then cosine decay to `min_lr` at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub base_lr: f32,
    pub min_lr: f32,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl Schedule {
    pub fn new(base_lr: f32, min_lr: f32, warmup_steps: u64, total_steps: u64) -> Result<Self, TrainError> {
        if warmup_steps > total_steps {
            return Err(TrainError::Config(format!(
                "warmup_steps {warmup_steps} exceeds total_steps {total_steps}"
            )));
        }
        if !(min_lr >= 0.0 && min_lr <= base_lr && base_lr.is_finite()) {
            return Err(TrainError::Config(format!("need 0 <= min_lr ({min_lr}) <= lr ({base_lr})")));
        }
        Ok(Self {
            base_lr,
            min_lr,
            warmup_steps,
            total_steps,
        })
    }

    pub fn lr_at(&self, step: u64) -> Result<f32, TrainError> {
        if step > self.total_steps {
            return Err(TrainError::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let (base, min) = (self.base_lr as f64, self.min_lr as f64);
        if step < self.warmup_steps {
            return Ok((base * step as f64 / self.warmup_steps as f64) as f32);
        }
        let span = self.total_steps - self.warmup_steps;
        if span == 0 {
            return Ok(self.base_lr);
        }
        let progress = (step - self.warmup_steps) as f64 / span as f64;
        Ok((min + 0.5 * (base - min) * (1.0 + (PI * progress).cos())) as f32)
    }
}
