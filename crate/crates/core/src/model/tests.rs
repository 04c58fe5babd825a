use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::grad_check_sampled;
use crate::text::{Tokenizer, PAD_ID};

fn random_images(n: usize, seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Image::new(16, 16, (0..256).map(|_| rng.random_range(0.0..1.0)).collect()))
        .collect()
}

fn texts(items: &[&str]) -> Vec<TokenizedText> {
    let tok = Tokenizer::default();
    items.iter().map(|t| tok.tokenize(t)).collect()
}

fn norms(t: &Tensor) -> Vec<f64> {
    (0..t.rows())
        .map(|r| t.row(r).iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt())
        .collect()
}

#[test]
fn same_seed_same_params() {
    let a = init_params(&ArchConfig::default(), 3).unwrap();
    let b = init_params(&ArchConfig::default(), 3).unwrap();
    assert_eq!(a, b);
    let c = init_params(&ArchConfig::default(), 4).unwrap();
    assert_ne!(a.store.values(), c.store.values());
}

#[test]
fn both_towers_emit_embed_dim_rows() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let zi = p.embed_images(&random_images(3, 1), 8).unwrap();
    let zt = p.embed_texts(TextRole::Name, &texts(&["a smile", "a frown"]), 8).unwrap();
    assert_eq!(zi.shape(), &[3, 16]);
    assert_eq!(zt.shape(), &[2, 16]);
}

#[test]
fn layer_norm_gains_start_at_one() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let mut seen = 0;
    for id in p.store.ids() {
        let name = p.store.name(id);
        if name.contains("ln") && name.ends_with(".g") {
            assert!(p.store.value(id).data().iter().all(|&g| g == 1.0), "{name}");
            seen += 1;
        }
        if name.contains("ln") && name.ends_with(".b") {
            assert!(p.store.value(id).data().iter().all(|&b| b == 0.0), "{name}");
        }
    }
    // 2 per block in each tower plus the final norms
    assert_eq!(seen, 2 * 2 + 1 + 2 * 2 + 1);
}

#[test]
fn weights_are_truncated() {
    let p = init_params(&ArchConfig::default(), 5).unwrap();
    let bound = 2.0 / (32.0f32).sqrt();
    let qkv = p.store.value(p.store.id("image.block0.attn.qkv.w").unwrap()).data();
    assert!(qkv.iter().all(|x| x.abs() <= bound));
    let sd = (qkv.iter().map(|x| x * x).sum::<f32>() / qkv.len() as f32).sqrt();
    assert!(sd > 0.6 * bound / 2.0 && sd < bound / 2.0, "{sd}");
    for name in ["image.cls", "image.pos", "text.token", "text.pos"] {
        let v = p.store.value(p.store.id(name).unwrap()).data();
        assert!(v.iter().all(|x| x.abs() <= 2.0 * INIT_STD), "{name}");
    }
    assert!((p.logit_scale() - 1.0 / 0.07).abs() < 1e-3);

    let fixed = init_params(
        &ArchConfig {
            weight_init: WeightInit::Fixed,
            ..ArchConfig::default()
        },
        5,
    )
    .unwrap();
    for id in fixed.ids_with_prefix("image.block0.attn") {
        assert!(fixed.store.value(id).data().iter().all(|x| x.abs() <= 2.0 * INIT_STD));
    }
}

#[test]
fn single_image_is_unit_norm() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let z = p.embed_images(&random_images(1, 2), 8).unwrap();
    assert_eq!(z.shape(), &[1, 16]);
    assert!((norms(&z)[0] - 1.0).abs() < 1e-6);
}

#[test]
fn identical_images_identical_rows() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let img = random_images(1, 9).remove(0);
    let z = p.embed_images(&[img.clone(), img], 8).unwrap();
    assert_eq!(z.row(0), z.row(1));
}

#[test]
fn pixel_perturbation_moves_output_boundedly() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let img = random_images(1, 11).remove(0);
    let mut bumped = img.clone();
    bumped.pixels[37] += 1e-3;
    let z = p.embed_images(&[img, bumped], 8).unwrap();
    let diff: f64 = z
        .row(0)
        .iter()
        .zip(z.row(1))
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(diff.is_finite() && diff < 1.0, "{diff}");
}

#[test]
fn wrong_image_size_is_shape_mismatch() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let bad = Image::new(8, 8, vec![0.5; 64]);
    assert!(matches!(
        p.embed_images(&[bad], 8),
        Err(Error::Model(ModelError::ShapeMismatch { .. }))
    ));
}

#[test]
fn text_outputs_are_pure_and_unit() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let z = p
        .embed_texts(TextRole::Name, &texts(&["raised brows", "raised brows", "the jaw drops"]), 8)
        .unwrap();
    assert_eq!(z.row(0), z.row(1));
    assert_ne!(z.row(0), z.row(2));
    for n in norms(&z) {
        assert!((n - 1.0).abs() < 1e-6);
    }
}

#[test]
fn padding_tail_does_not_leak() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let short = texts(&["a smile"]).remove(0);
    let mut noisy = short.clone();
    for id in noisy.ids.iter_mut().skip(short.true_len) {
        *id = 700;
    }
    assert!(short.ids[short.true_len..].iter().all(|&i| i == PAD_ID));
    let alone = p.embed_texts(TextRole::Name, &[short.clone()], 8).unwrap();
    let tail = p.embed_texts(TextRole::Name, &[noisy], 8).unwrap();
    let long = texts(&["a much longer sentence about the cheeks and the jaw of a person"]).remove(0);
    let batched = p.embed_texts(TextRole::Name, &[short, long], 8).unwrap();
    assert_eq!(alone.row(0), tail.row(0));
    assert_eq!(alone.row(0), batched.row(0));
}

#[test]
fn out_of_range_token_rejected() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let mut t = texts(&["a smile"]).remove(0);
    t.ids[1] = 5000;
    assert!(matches!(
        p.embed_texts(TextRole::Name, &[t], 8),
        Err(Error::Model(ModelError::TokenOutOfRange { id: 5000, vocab: 1024 }))
    ));
}

#[test]
fn shared_text_encoder_treats_roles_alike() {
    let p = init_params(&ArchConfig::default(), 0).unwrap();
    let t = texts(&["a photo of a person with happiness."]);
    let n = p.embed_texts(TextRole::Name, &t, 8).unwrap();
    let d = p.embed_texts(TextRole::Description, &t, 8).unwrap();
    assert_eq!(n, d);
    assert!(p.ids_with_prefix("desc_text").is_empty());
}

#[test]
fn unshared_text_encoders_are_disjoint() {
    let arch = ArchConfig {
        share_text_encoder: false,
        ..ArchConfig::default()
    };
    let p = init_params(&arch, 0).unwrap();
    let shared = init_params(&ArchConfig::default(), 0).unwrap();
    let text_scalars = |prefix: &str| -> usize {
        p.ids_with_prefix(prefix)
            .iter()
            .map(|&id| p.store.value(id).len())
            .sum()
    };
    assert_eq!(text_scalars("text."), text_scalars("desc_text."));
    assert_eq!(p.store.num_scalars(), shared.store.num_scalars() + text_scalars("desc_text."));
    let t = texts(&["a photo of a person with happiness."]);
    let n = p.embed_texts(TextRole::Name, &t, 8).unwrap();
    let d = p.embed_texts(TextRole::Description, &t, 8).unwrap();
    assert_ne!(n, d);
}

#[test]
fn invalid_arch_rejected() {
    let bad = ArchConfig {
        patch: 5,
        ..ArchConfig::default()
    };
    assert!(matches!(init_params(&bad, 0), Err(ModelError::Config(_))));
    let bad = ArchConfig {
        heads: 3,
        ..ArchConfig::default()
    };
    assert!(matches!(init_params(&bad, 0), Err(ModelError::Config(_))));
}

fn weighted_sum(tape: &mut Tape, z: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.shape(z).to_vec();
    let w = Tensor::new(shape.clone(), (0..shape.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect());
    let w = tape.constant(w);
    let p = tape.mul(z, w);
    tape.sum_all(p)
}

#[test]
fn image_encoder_gradients_match_finite_differences() {
    let p = init_params(&ArchConfig::default(), 1).unwrap();
    let enc = p.image_encoder();
    let imgs = random_images(2, 4);
    let report = grad_check_sampled(
        |tape, bound| {
            let z = enc.encode(tape, bound, &imgs)?;
            Ok(weighted_sum(tape, z, 8))
        },
        &p.store,
        1e-3,
        Some(6),
        2,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-3, "{report:?}");
}

#[test]
fn text_encoder_gradients_match_finite_differences() {
    let p = init_params(&ArchConfig::default(), 1).unwrap();
    let enc = p.text_encoder(TextRole::Name);
    let t = texts(&["a photo of a person with happiness.", "the brows are raised"]);
    let report = grad_check_sampled(
        |tape, bound| {
            let z = enc.encode(tape, bound, &t)?;
            Ok(weighted_sum(tape, z, 9))
        },
        &p.store,
        1e-3,
        Some(6),
        3,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-3, "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn embeddings_unit_norm_for_any_weight_scale(scale in 0.05f32..50.0, seed in 0u64..1000) {
        let mut p = init_params(&ArchConfig::default(), seed).unwrap();
        for id in p.store.ids().collect::<Vec<_>>() {
            p.store.value_mut(id).data_mut().iter_mut().for_each(|x| *x *= scale);
        }
        let zi = p.embed_images(&random_images(2, seed), 8).unwrap();
        let zt = p.embed_texts(TextRole::Name, &texts(&["brows and smile"]), 8).unwrap();
        for n in norms(&zi).into_iter().chain(norms(&zt)) {
            prop_assert!((n - 1.0).abs() < 1e-5);
        }
    }
}
