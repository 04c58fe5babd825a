use std::f64::consts::LN_2;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{Dataset, Image, Sample};
use crate::numerics::{grad_check, ParamStore};
use crate::{Error, Task};

fn unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
    let mut data: Vec<f32> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    for row in data.chunks_mut(d) {
        let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }
    Tensor::matrix(n, d, data)
}

fn value_of(f: impl FnOnce(&mut Tape) -> Result<Var, LossError>) -> f64 {
    let mut tape = Tape::new();
    let v = f(&mut tape).unwrap();
    tape.value(v).item() as f64
}

fn rows(tape: &mut Tape, t: &Tensor) -> Var {
    tape.constant(t.clone())
}

#[test]
fn image_image_mask_same_activity() {
    let m = PairMasks::image_image(&[5, 5]);
    assert_eq!(m.positive, vec![false, true, true, true, true, false, true, true]);
    assert_eq!(m.positive_count, vec![3, 3]);
    assert!(!m.is_valid(0, 0) && !m.is_valid(1, 1));
}

#[test]
fn image_image_mask_distinct_activities() {
    let m = PairMasks::image_image(&[0, 1, 2]);
    for i in 0..3 {
        let pos: Vec<usize> = (0..6).filter(|&j| m.is_positive(i, j)).collect();
        assert_eq!(pos, vec![i + 3]);
    }
}

#[test]
fn image_text_singleton() {
    let m = PairMasks::image_text(&[4], &[4]);
    assert_eq!(m.positive, vec![false, true]);
    assert_eq!(m.valid, vec![false, true]);
}

#[test]
fn masks_reject_bad_self_map() {
    assert!(matches!(
        build_pair_masks(&[0, 1], &[0, 1], Some(&[0])),
        Err(LossError::LengthMismatch { .. })
    ));
    assert!(matches!(
        build_pair_masks(&[0], &[0, 1], Some(&[2])),
        Err(LossError::LengthMismatch { .. })
    ));
}

#[test]
fn supcon_single_candidate_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let z = unit_rows(&mut rng, 2, 4);
    let a = Tensor::matrix(1, 4, z.row(0).to_vec());
    let masks = PairMasks::image_image(&[0]);
    let v = value_of(|t| {
        let a = rows(t, &a);
        let b = rows(t, &z);
        supcon_loss(t, a, b, &masks, Temperature::Fixed(0.25))
    });
    assert_eq!(v, 0.0);
}

#[test]
fn supcon_identical_embeddings_give_two_log_three() {
    let z = Tensor::matrix(4, 2, vec![0.6, 0.8, 0.6, 0.8, 0.6, 0.8, 0.6, 0.8]);
    let a = Tensor::matrix(2, 2, vec![0.6, 0.8, 0.6, 0.8]);
    let masks = PairMasks::image_image(&[1, 1]);
    let v = value_of(|t| {
        let a = rows(t, &a);
        let b = rows(t, &z);
        supcon_loss(t, a, b, &masks, Temperature::Fixed(0.25))
    });
    assert!((v - 2.0 * 3f64.ln()).abs() < 1e-6, "{v}");
}

#[test]
fn supcon_matches_oracle_on_random_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = unit_rows(&mut rng, 3, 5);
    let b = unit_rows(&mut rng, 3, 5);
    let labels = [0, 1, 0];
    let masks = PairMasks::image_image(&labels);
    let mut cands = a.data().to_vec();
    cands.extend_from_slice(b.data());
    let cands = Tensor::matrix(6, 5, cands);
    let v = value_of(|t| {
        let x = rows(t, &a);
        let c = rows(t, &cands);
        supcon_loss(t, x, c, &masks, Temperature::Fixed(0.25))
    });
    let o = oracle::supcon(&a, &cands, &masks, 0.25);
    assert!((v - o).abs() < 1e-5, "{v} vs {o}");
}

#[test]
fn supcon_rejects_empty_rows_and_bad_temperature() {
    let z = Tensor::matrix(1, 2, vec![1.0, 0.0]);
    let masks = build_pair_masks(&[0], &[0], Some(&[0])).unwrap();
    let mut tape = Tape::new();
    let a = rows(&mut tape, &z);
    assert!(matches!(
        supcon_loss(&mut tape, a, a, &masks, Temperature::Fixed(0.25)),
        Err(LossError::EmptyValidRow { anchor: 0 })
    ));
    let masks = build_pair_masks(&[0], &[0], None).unwrap();
    assert!(matches!(
        supcon_loss(&mut tape, a, a, &masks, Temperature::Fixed(0.0)),
        Err(LossError::BadTemperature(_))
    ));
}

#[test]
fn pretrain_single_sample_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z = unit_rows(&mut rng, 3, 4);
    let pick = |r: usize| Tensor::matrix(1, 4, z.row(r).to_vec());
    let v = value_of(|t| {
        let (a, b, c) = (rows(t, &pick(0)), rows(t, &pick(1)), rows(t, &pick(2)));
        let f = Temperature::Fixed(0.25);
        Ok(pretrain_loss(t, a, b, Some(c), &[3], f, f, false)?.total)
    });
    assert_eq!(v, 0.0);
}

#[test]
fn pretrain_symmetric_batch_closed_form() {
    let same = Tensor::matrix(2, 2, vec![0.6, 0.8, 0.6, 0.8]);
    let mut tape = Tape::new();
    let (a, b, c) = (rows(&mut tape, &same), rows(&mut tape, &same), rows(&mut tape, &same));
    let f = Temperature::Fixed(0.25);
    let parts = pretrain_loss(&mut tape, a, b, Some(c), &[2, 2], f, f, false).unwrap();
    let ln3 = 3f64.ln();
    // image-image: 3 valid, all positive; image-activity: 1 other view-1 row + 2 texts
    assert!((tape.value(parts.image_image).item() as f64 - 2.0 * ln3).abs() < 1e-6);
    assert!((tape.value(parts.image_activity.unwrap()).item() as f64 - 2.0 * ln3).abs() < 1e-6);
    assert!((tape.value(parts.total).item() as f64 - 2.0 * ln3).abs() < 1e-6);
}

#[test]
fn pretrain_without_text_is_image_image_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = (unit_rows(&mut rng, 3, 4), unit_rows(&mut rng, 3, 4));
    let mut tape = Tape::new();
    let (x, y) = (rows(&mut tape, &a), rows(&mut tape, &b));
    let f = Temperature::Fixed(0.25);
    let parts = pretrain_loss(&mut tape, x, y, None, &[0, 0, 1], f, f, false).unwrap();
    assert!(parts.image_activity.is_none());
    assert_eq!(tape.value(parts.total).item(), tape.value(parts.image_image).item());
}

#[test]
fn name_description_degenerate_cases() {
    let one = Tensor::matrix(1, 2, vec![1.0, 0.0]);
    let v = value_of(|t| {
        let (d, n) = (rows(t, &one), rows(t, &one));
        name_description_loss(t, d, n, Temperature::Fixed(0.07))
    });
    assert_eq!(v, 0.0);
    // all four similarities zero
    let d = Tensor::matrix(2, 3, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let n = Tensor::matrix(2, 3, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let v = value_of(|t| {
        let (d, n) = (rows(t, &d), rows(t, &n));
        name_description_loss(t, d, n, Temperature::Fixed(0.07))
    });
    assert!((v - LN_2).abs() < 1e-6, "{v}");
}

#[test]
fn name_description_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (d, n) = (unit_rows(&mut rng, 4, 8), unit_rows(&mut rng, 4, 8));
    let v = value_of(|t| {
        let (a, b) = (rows(t, &d), rows(t, &n));
        name_description_loss(t, a, b, Temperature::Fixed(0.5))
    });
    assert!((v - oracle::name_description(&d, &n, 0.5)).abs() < 1e-6);
}

#[test]
fn name_description_size_mismatch() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (d, n) = (unit_rows(&mut rng, 3, 8), unit_rows(&mut rng, 4, 8));
    let mut tape = Tape::new();
    let (a, b) = (rows(&mut tape, &d), rows(&mut tape, &n));
    assert!(matches!(
        name_description_loss(&mut tape, a, b, Temperature::Fixed(0.5)),
        Err(LossError::SizeMismatch(_))
    ));
}

fn orthogonal_pair(b: usize, c: usize) -> (Tensor, Tensor) {
    let images = Tensor::matrix(b, 2, [1.0, 0.0].repeat(b));
    let names = Tensor::matrix(c, 2, [0.0, 1.0].repeat(c));
    (images, names)
}

#[test]
fn fer_uniform_logits_and_weight_linearity() {
    let (zi, zn) = orthogonal_pair(1, 2);
    let fer = |w: Vec<f32>| {
        value_of(|t| {
            let (a, b) = (rows(t, &zi), rows(t, &zn));
            fer_image_name_loss(t, a, b, &[1], &ClassWeights { w }, Temperature::Fixed(0.07))
        })
    };
    assert!((fer(vec![1.0, 1.0]) - LN_2).abs() < 1e-6);
    assert!((fer(vec![1.0, 2.0]) - 2.0 * LN_2).abs() < 1e-6);
}

#[test]
fn fer_matches_oracle_and_checks_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (zi, zn) = (unit_rows(&mut rng, 3, 6), unit_rows(&mut rng, 4, 6));
    let w = ClassWeights {
        w: vec![0.5, 1.5, 1.0, 1.0],
    };
    let targets = [2, 0, 1];
    let v = value_of(|t| {
        let (a, b) = (rows(t, &zi), rows(t, &zn));
        fer_image_name_loss(t, a, b, &targets, &w, Temperature::Fixed(0.5))
    });
    assert!((v - oracle::fer_image_name(&zi, &zn, &targets, &w.w, 0.5)).abs() < 1e-6);
    let mut tape = Tape::new();
    let (a, b) = (rows(&mut tape, &zi), rows(&mut tape, &zn));
    assert!(matches!(
        fer_image_name_loss(&mut tape, a, b, &[0, 4, 1], &w, Temperature::Fixed(0.5)),
        Err(LossError::TargetOutOfRange { sample: 1, class: 4, .. })
    ));
}

#[test]
fn au_zero_logits_and_positive_only_weight() {
    let (zi, zn) = orthogonal_pair(2, 3);
    let au = |targets: &[Vec<u8>], w: Vec<f32>| {
        value_of(|t| {
            let (a, b) = (rows(t, &zi), rows(t, &zn));
            au_image_name_loss(t, a, b, targets, &ClassWeights { w }, Temperature::Fixed(0.07))
        })
    };
    let y = vec![vec![1, 0, 1], vec![0, 1, 1]];
    assert!((au(&y, vec![1.0; 3]) - 3.0 * LN_2).abs() < 1e-6);
    let zeros = vec![vec![0, 0, 0], vec![0, 0, 0]];
    assert_eq!(au(&zeros, vec![1.0; 3]), au(&zeros, vec![0.2, 2.5, 0.3]));
}

#[test]
fn au_matches_oracle_and_rejects_non_binary() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (zi, zn) = (unit_rows(&mut rng, 2, 4), unit_rows(&mut rng, 3, 4));
    let w = ClassWeights { w: vec![0.6, 1.2, 1.2] };
    let y = vec![vec![1, 0, 1], vec![0, 0, 1]];
    let v = value_of(|t| {
        let (a, b) = (rows(t, &zi), rows(t, &zn));
        au_image_name_loss(t, a, b, &y, &w, Temperature::Fixed(0.5))
    });
    assert!((v - oracle::au_image_name(&zi, &zn, &y, &w.w, 0.5)).abs() < 1e-6);
    let mut tape = Tape::new();
    let (a, b) = (rows(&mut tape, &zi), rows(&mut tape, &zn));
    assert!(matches!(
        au_image_name_loss(&mut tape, a, b, &[vec![1, 2, 0], vec![0, 0, 0]], &w, Temperature::Fixed(0.5)),
        Err(LossError::TargetNotBinary { sample: 0, class: 1, value: 2 })
    ));
}

#[test]
fn finetune_arithmetic() {
    assert_eq!(finetune_total(0.5, 0.7, 2.0).unwrap(), 0.85);
    assert!(matches!(finetune_total(0.5, 0.7, 0.0), Err(LossError::BadLambda(_))));
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::scalar(0.5));
    let b = tape.constant(Tensor::scalar(0.7));
    let l = finetune_loss(&mut tape, a, b, 2.0).unwrap();
    assert_eq!(tape.value(l).item(), 0.85);
    assert!(finetune_loss(&mut tape, a, b, -1.0).is_err());
}

fn fer_dataset(classes: &[usize], c: usize) -> Dataset {
    Dataset {
        height: 1,
        width: 1,
        task: Task::Fer,
        n_classes: c,
        samples: classes
            .iter()
            .enumerate()
            .map(|(i, &y)| Sample {
                id: i.to_string(),
                image: Image::new(1, 1, vec![0.0]),
                identity: 0,
                activity: 0,
                activity_text: String::new(),
                target: crate::data::Target::Class(y),
            })
            .collect(),
    }
}

#[test]
fn class_weight_examples() {
    let w = class_weights(&fer_dataset(&[0, 1, 2, 0, 1, 2], 3), Task::Fer).unwrap();
    assert!(w.w.iter().all(|&x| (x - 1.0).abs() < 1e-6));
    let w = class_weights(&fer_dataset(&[0, 0, 1, 2], 3), Task::Fer).unwrap();
    for (got, want) in w.w.iter().zip([0.6, 1.2, 1.2]) {
        assert!((got - want).abs() < 1e-6, "{:?}", w.w);
    }
    let w = class_weights(&fer_dataset(&[0, 0, 1], 3), Task::Fer).unwrap();
    assert!(w.w.iter().all(|x| x.is_finite() && *x > 0.0));
    let mean = w.w.iter().sum::<f32>() / 3.0;
    assert!((mean - 1.0).abs() < 1e-6);
    assert!(matches!(
        class_weights(&fer_dataset(&[], 3), Task::Fer),
        Err(LossError::EmptyDataset)
    ));
}

#[test]
fn aur_class_weights_stay_positive() {
    let mut ds = fer_dataset(&[0, 0, 0, 0], 2);
    ds.task = Task::Aur;
    for (i, s) in ds.samples.iter_mut().enumerate() {
        s.target = crate::data::Target::MultiHot(vec![1, (i == 0) as u8]);
    }
    let w = class_weights(&ds, Task::Aur).unwrap();
    assert!(w.w.iter().all(|&x| x > 0.0 && x.is_finite()));
    assert!(w.w[1] > w.w[0]);
}

fn embedding_store(rng: &mut ChaCha8Rng, shapes: &[(usize, usize)]) -> ParamStore {
    let mut s = ParamStore::new();
    for (i, &(n, d)) in shapes.iter().enumerate() {
        s.insert(
            format!("z{i}"),
            Tensor::matrix(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()),
        );
    }
    s.insert("log_scale", Tensor::new(vec![1], vec![(1.0f32 / 0.5).ln()]));
    s
}

fn unit(tape: &mut Tape, v: Var) -> Result<Var, Error> {
    Ok(tape.l2_normalize_rows(v)?)
}

#[test]
fn pretrain_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = embedding_store(&mut rng, &[(3, 6), (3, 6), (3, 6)]);
    let report = grad_check(
        |tape, bound| {
            let v = bound.vars();
            let (a, b, c) = (unit(tape, v[0])?, unit(tape, v[1])?, unit(tape, v[2])?);
            let t = Temperature::LogScale(v[3]);
            Ok(pretrain_loss(tape, a, b, Some(c), &[0, 1, 0], t, Temperature::Fixed(0.25), false)?.total)
        },
        &params,
        1e-3,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-3, "{report:?}");
}

#[test]
fn finetune_aur_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = embedding_store(&mut rng, &[(2, 5), (3, 5), (3, 5)]);
    let w = ClassWeights { w: vec![0.6, 1.2, 1.2] };
    let report = grad_check(
        |tape, bound| {
            let v = bound.vars();
            let (zi, zn, zd) = (unit(tape, v[0])?, unit(tape, v[1])?, unit(tape, v[2])?);
            let t = Temperature::LogScale(v[3]);
            let l_in = au_image_name_loss(tape, zi, zn, &[vec![1, 0, 1], vec![0, 1, 0]], &w, t)?;
            let l_dn = name_description_loss(tape, zd, zn, t)?;
            Ok(finetune_loss(tape, l_in, l_dn, 2.0)?)
        },
        &params,
        1e-3,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-3, "{report:?}");
}

#[test]
fn finetune_fer_and_symmetric_supcon_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = embedding_store(&mut rng, &[(3, 4), (4, 4), (4, 4)]);
    let w = ClassWeights {
        w: vec![1.0, 0.5, 1.5, 1.0],
    };
    let report = grad_check(
        |tape, bound| {
            let v = bound.vars();
            let (zi, zn, zd) = (unit(tape, v[0])?, unit(tape, v[1])?, unit(tape, v[2])?);
            let t = Temperature::LogScale(v[3]);
            let l_in = fer_image_name_loss(tape, zi, zn, &[3, 0, 1], &w, t)?;
            let l_dn = name_description_loss(tape, zd, zn, t)?;
            let sym = pretrain_loss(tape, zn, zd, None, &[0, 0, 1, 1], t, t, true)?.total;
            let f = finetune_loss(tape, l_in, l_dn, 2.0)?;
            Ok(tape.add(f, sym))
        },
        &params,
        1e-3,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-3, "{report:?}");
}

#[test]
fn supcon_sharpens_as_temperature_drops_when_positives_dominate() {
    // two activities on opposite poles of the circle
    let a = Tensor::matrix(2, 2, vec![1.0, 0.0, -1.0, 0.0]);
    let v2 = Tensor::matrix(2, 2, vec![0.96, 0.28, -0.96, 0.28]);
    let mut cands = a.data().to_vec();
    cands.extend_from_slice(v2.data());
    let cands = Tensor::matrix(4, 2, cands);
    let masks = PairMasks::image_image(&[0, 1]);
    let mut prev = f64::INFINITY;
    for t in [2.0, 1.0, 0.5, 0.25, 0.1, 0.05] {
        let v = value_of(|tape| {
            let (x, c) = (rows(tape, &a), rows(tape, &cands));
            supcon_loss(tape, x, c, &masks, Temperature::Fixed(t))
        });
        assert!(v < prev, "t={t}: {v} !< {prev}");
        prev = v;
    }
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn vectorized_losses_equal_oracles(seed in any::<u64>(), n in 1usize..=4, c in 1usize..=6, d in 2usize..=8, t in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let temp = Temperature::Fixed(t as f32);
        let t = t as f32 as f64;

        let (v1, v2) = (unit_rows(&mut rng, n, d), unit_rows(&mut rng, n, d));
        let labels = random_labels(&mut rng, n, 3);
        let masks = PairMasks::image_image(&labels);
        let mut cands = v1.data().to_vec();
        cands.extend_from_slice(v2.data());
        let cands = Tensor::matrix(2 * n, d, cands);
        let got = value_of(|tp| { let (a, b) = (rows(tp, &v1), rows(tp, &cands)); supcon_loss(tp, a, b, &masks, temp) });
        let want = oracle::supcon(&v1, &cands, &masks, t);
        prop_assert!((got - want).abs() < 1e-5 * want.abs().max(1.0), "supcon {got} vs {want}");
        prop_assert!(got >= 0.0);

        let (zd, zn) = (unit_rows(&mut rng, c, d), unit_rows(&mut rng, c, d));
        let got = value_of(|tp| { let (a, b) = (rows(tp, &zd), rows(tp, &zn)); name_description_loss(tp, a, b, temp) });
        let want = oracle::name_description(&zd, &zn, t);
        prop_assert!((got - want).abs() < 1e-5, "dn {got} vs {want}");
        prop_assert!(got >= 0.0);

        let w = ClassWeights::normalized(&(0..c).map(|_| rng.random_range(0.1..2.0)).collect::<Vec<f64>>());
        let targets = random_labels(&mut rng, n, c);
        let got = value_of(|tp| { let (a, b) = (rows(tp, &v1), rows(tp, &zn)); fer_image_name_loss(tp, a, b, &targets, &w, temp) });
        let want = oracle::fer_image_name(&v1, &zn, &targets, &w.w, t);
        prop_assert!((got - want).abs() < 1e-5, "fer {got} vs {want}");
        prop_assert!(got >= 0.0);

        let hot: Vec<Vec<u8>> = (0..n).map(|_| (0..c).map(|_| rng.random_range(0..2u8)).collect()).collect();
        let got = value_of(|tp| { let (a, b) = (rows(tp, &v1), rows(tp, &zn)); au_image_name_loss(tp, a, b, &hot, &w, temp) });
        let want = oracle::au_image_name(&v1, &zn, &hot, &w.w, t);
        prop_assert!((got - want).abs() < 1e-5, "au {got} vs {want}");
        prop_assert!(got >= 0.0);
    }

    #[test]
    fn row_shift_leaves_softmax_losses_unchanged(seed in any::<u64>(), shift in -20i32..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, c) = (3, 5);
        // logits on a 1/1024 grid so the shifted inputs are exact in f32
        let logits: Vec<f32> = (0..b * c).map(|_| rng.random_range(-5120i32..5120) as f32 / 1024.0).collect();
        let offsets: Vec<f32> = (0..b).map(|i| (shift * (i as i32 + 1)) as f32).collect();
        let shifted: Vec<f32> = logits.iter().enumerate().map(|(k, &x)| x + offsets[k / c]).collect();
        let targets = random_labels(&mut rng, b, c);
        let w = ClassWeights::uniform(c);
        let ce = |data: Vec<f32>| value_of(|tp| { let x = tp.constant(Tensor::matrix(b, c, data)); weighted_cross_entropy(tp, x, &targets, &w) });
        prop_assert!((ce(logits.clone()) - ce(shifted.clone())).abs() < 1e-6);

        let valid: Vec<bool> = (0..b * c).map(|k| k % c != 0).collect();
        let masked = |data: Vec<f32>| -> Vec<f32> {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::matrix(b, c, data));
            let l = tape.log_softmax_rows(x, Some(valid.clone()));
            tape.value(l).data().to_vec()
        };
        for (p, q) in masked(logits).iter().zip(masked(shifted)) {
            prop_assert!((p - q).abs() < 1e-6);
        }
    }
}

#[test]
fn aur_absent_classes_do_not_shrink_present_weights() {
    let mut ds = fer_dataset(&[0, 0, 0, 0], 3);
    ds.task = Task::Aur;
    for (i, s) in ds.samples.iter_mut().enumerate() {
        s.target = crate::data::Target::MultiHot(vec![(i % 2) as u8, ((i + 1) % 2) as u8, 0]);
    }
    let w = class_weights(&ds, Task::Aur).unwrap();
    assert_eq!(w.w, vec![1.0, 1.0, 1.0]);
}
