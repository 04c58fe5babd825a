use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::numerics::ParamStore;

/// AdamW hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamW {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moments per parameter, in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub step: u64,
}

impl OptimState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f32>> = store.values().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    /// Extends the state with zero moments for parameters added since.
    pub fn sync(&mut self, store: &ParamStore) {
        for t in &store.values()[self.m.len().min(store.len())..] {
            self.m.push(vec![0.0; t.len()]);
            self.v.push(vec![0.0; t.len()]);
        }
    }
}

/// One decoupled-decay Adam update of every parameter from its accumulated
/// gradient: `θ ← θ·(1 − lr·wd)` then `θ ← θ − lr·m̂/(√v̂ + eps)`.
pub fn adamw_step(store: &mut ParamStore, state: &mut OptimState, lr: f32, hp: &AdamW) -> Result<(), TrainError> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(TrainError::Config(format!("learning rate {lr} must be finite and non-negative")));
    }
    if state.m.len() != store.len() || state.v.len() != store.len() {
        return Err(TrainError::ShapeMismatch(format!(
            "optimizer holds {} moment sets for {} parameters",
            state.m.len(),
            store.len()
        )));
    }
    for (k, t) in store.values().iter().enumerate() {
        if state.m[k].len() != t.len() || state.v[k].len() != t.len() {
            return Err(TrainError::ShapeMismatch(format!(
                "moments of parameter {k} hold {} values, parameter has {}",
                state.m[k].len(),
                t.len()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - (hp.beta1 as f64).powi(t);
    let c2 = 1.0 - (hp.beta2 as f64).powi(t);
    let decay = 1.0 - lr * hp.weight_decay;
    let (b1, b2) = (hp.beta1, hp.beta2);
    for ((values, grads), (m, v)) in store.iter_mut().zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for i in 0..values.len() {
            let g = grads[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] as f64 / c1;
            let v_hat = v[i] as f64 / c2;
            let update = (lr as f64 * m_hat / (v_hat.sqrt() + hp.eps as f64)) as f32;
            values[i] = values[i] * decay - update;
        }
    }
    Ok(())
}
