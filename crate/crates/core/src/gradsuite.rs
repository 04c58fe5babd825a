//! Finite-difference checks of every loss and both encoders at toy sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Image;
use crate::losses::{
    au_image_name_loss, fer_image_name_loss, finetune_loss, name_description_loss, pretrain_loss, supcon_loss,
    ClassWeights, PairMasks, Temperature,
};
use crate::model::{init_params, ArchConfig, TextRole};
use crate::numerics::{grad_check, grad_check_sampled, Bound, GradCheckReport, ParamStore, Tape, Var};
use crate::text::Tokenizer;
use crate::{Error, Tensor};

/// Finite-difference step.
pub const STEP: f32 = 1e-3;
/// Largest accepted relative error.
pub const TOLERANCE: f32 = 1e-3;

/// Names accepted by [`run_check`], losses first.
pub const CHECKS: [&str; 8] = [
    "supcon",
    "pretrain",
    "name_description",
    "fer_image_name",
    "au_image_name",
    "finetune",
    "image_encoder",
    "text_encoder",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub report: GradCheckReport,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.report.max_relative_error < TOLERANCE
    }
}

fn embeddings(seed: u64, shapes: &[(usize, usize)]) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    for (i, &(n, d)) in shapes.iter().enumerate() {
        let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        s.insert(format!("z{i}"), Tensor::matrix(n, d, data));
    }
    s.insert("log_scale", Tensor::new(vec![1], vec![2.0f32.ln()]));
    s
}

fn unit(tape: &mut Tape, bound: &Bound, i: usize) -> Result<Var, Error> {
    Ok(tape.l2_normalize_rows(bound.vars()[i])?)
}

fn scale(bound: &Bound) -> Temperature {
    Temperature::LogScale(*bound.vars().last().expect("log scale"))
}

fn weighted_sum(tape: &mut Tape, z: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.shape(z).to_vec();
    let n = shape.iter().product();
    let w = tape.constant(Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()));
    let p = tape.mul(z, w);
    tape.sum_all(p)
}

fn check_losses<F>(seed: u64, shapes: &[(usize, usize)], f: F) -> Result<GradCheckReport, Error>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var, Error>,
{
    grad_check(f, &embeddings(seed, shapes), STEP)
}

/// Runs one named check.
pub fn run_check(name: &str) -> Result<CheckOutcome, Error> {
    let report = match name {
        "supcon" => check_losses(1, &[(4, 5), (4, 5)], |tape, b| {
            let (a, v) = (unit(tape, b, 0)?, unit(tape, b, 1)?);
            let both = tape.concat_rows(&[a, v]);
            Ok(supcon_loss(tape, a, both, &PairMasks::image_image(&[0, 1, 0, 2]), scale(b))?)
        })?,
        "pretrain" => check_losses(2, &[(3, 6), (3, 6), (3, 6)], |tape, b| {
            let (v1, v2, t) = (unit(tape, b, 0)?, unit(tape, b, 1)?, unit(tape, b, 2)?);
            Ok(pretrain_loss(tape, v1, v2, Some(t), &[0, 1, 0], scale(b), Temperature::Fixed(0.25), false)?.total)
        })?,
        "name_description" => check_losses(3, &[(3, 4), (3, 4)], |tape, b| {
            let (d, n) = (unit(tape, b, 0)?, unit(tape, b, 1)?);
            Ok(name_description_loss(tape, d, n, scale(b))?)
        })?,
        "fer_image_name" => check_losses(4, &[(3, 4), (4, 4)], |tape, b| {
            let (i, n) = (unit(tape, b, 0)?, unit(tape, b, 1)?);
            let w = ClassWeights { w: vec![1.0, 0.5, 1.5, 1.0] };
            Ok(fer_image_name_loss(tape, i, n, &[3, 0, 1], &w, scale(b))?)
        })?,
        "au_image_name" => check_losses(5, &[(2, 5), (3, 5)], |tape, b| {
            let (i, n) = (unit(tape, b, 0)?, unit(tape, b, 1)?);
            let w = ClassWeights { w: vec![0.6, 1.2, 1.2] };
            Ok(au_image_name_loss(tape, i, n, &[vec![1, 0, 1], vec![0, 1, 0]], &w, scale(b))?)
        })?,
        "finetune" => check_losses(6, &[(2, 5), (3, 5), (3, 5)], |tape, b| {
            let (i, n, d) = (unit(tape, b, 0)?, unit(tape, b, 1)?, unit(tape, b, 2)?);
            let l_in = fer_image_name_loss(tape, i, n, &[2, 0], &ClassWeights::uniform(3), scale(b))?;
            let l_dn = name_description_loss(tape, d, n, scale(b))?;
            Ok(finetune_loss(tape, l_in, l_dn, 2.0)?)
        })?,
        "image_encoder" => {
            let p = init_params(&ArchConfig::default(), 1)?;
            let enc = p.image_encoder();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let imgs: Vec<Image> = (0..2)
                .map(|_| Image::new(16, 16, (0..256).map(|_| rng.random_range(0.0..1.0)).collect()))
                .collect();
            grad_check_sampled(
                |tape, bound| {
                    let z = enc.encode(tape, bound, &imgs)?;
                    Ok(weighted_sum(tape, z, 8))
                },
                &p.store,
                STEP,
                Some(6),
                2,
            )?
        }
        "text_encoder" => {
            let p = init_params(&ArchConfig::default(), 1)?;
            let enc = p.text_encoder(TextRole::Name);
            let tok = Tokenizer::default();
            let texts = vec![tok.tokenize("a photo of a person with happiness."), tok.tokenize("the brows are raised")];
            grad_check_sampled(
                |tape, bound| {
                    let z = enc.encode(tape, bound, &texts)?;
                    Ok(weighted_sum(tape, z, 9))
                },
                &p.store,
                STEP,
                Some(6),
                3,
            )?
        }
        other => return Err(crate::numerics::NumericsError::UnknownCheck(other.to_string()).into()),
    };
    let name = CHECKS.iter().find(|&&c| c == name).expect("listed check");
    Ok(CheckOutcome { name, report })
}

/// Runs every check in [`CHECKS`].
pub fn run_all() -> Result<Vec<CheckOutcome>, Error> {
    CHECKS.iter().map(|c| run_check(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for outcome in run_all().unwrap() {
            assert!(outcome.passed(), "{outcome:?}");
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        let err = run_check("hinge").unwrap_err();
        assert!(err.to_string().contains("UnknownCheck"));
    }
}
