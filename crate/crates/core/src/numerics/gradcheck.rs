use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bound, NumericsError, ParamId, ParamStore, Tape, Var};
use crate::Error;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f32,
    pub worst_param: Option<ParamId>,
    pub worst_index: usize,
    pub coords_checked: usize,
}

fn eval<F>(f: &F, params: &ParamStore) -> Result<f32, Error>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var, Error>,
{
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = f(&mut tape, &bound)?;
    Ok(tape.value(out).item())
}

/// Compares reverse-mode gradients of `f` against central differences on
/// every coordinate of every parameter.
///
/// Error per coordinate is `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<F>(f: F, params: &ParamStore, step: f32) -> Result<GradCheckReport, Error>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var, Error>,
{
    grad_check_sampled(f, params, step, None, 0)
}

/// As [`grad_check`], but probes at most `max_coords` randomly chosen
/// coordinates per parameter tensor when given.
pub fn grad_check_sampled<F>(
    f: F,
    params: &ParamStore,
    step: f32,
    max_coords: Option<usize>,
    seed: u64,
) -> Result<GradCheckReport, Error>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var, Error>,
{
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = f(&mut tape, &bound)?;
    if !tape.value(loss).item().is_finite() {
        return Err(NumericsError::NonFinite.into());
    }
    tape.backward(loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: None,
        worst_index: 0,
        coords_checked: 0,
    };
    for id in params.ids() {
        let n = params.value(id).len();
        let analytic: Vec<f32> = tape
            .grad(bound.var(id))
            .map(<[f32]>::to_vec)
            .unwrap_or_else(|| vec![0.0; n]);
        let coords: Vec<usize> = match max_coords {
            Some(k) if k < n => (0..k).map(|_| rng.random_range(0..n)).collect(),
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = params.value(id).data()[i];
            probe.value_mut(id).data_mut()[i] = orig + step;
            let plus = eval(&f, &probe)?;
            probe.value_mut(id).data_mut()[i] = orig - step;
            let minus = eval(&f, &probe)?;
            probe.value_mut(id).data_mut()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NumericsError::NonFinite.into());
            }
            let numeric = ((plus as f64 - minus as f64) / (2.0 * step as f64)) as f32;
            let a = analytic[i];
            let err = (a - numeric).abs() / 1f32.max(a.abs()).max(numeric.abs());
            report.coords_checked += 1;
            if err > report.max_relative_error || report.worst_param.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                if err >= report.max_relative_error {
                    report.worst_param = Some(id);
                    report.worst_index = i;
                }
            }
        }
    }
    Ok(report)
}
