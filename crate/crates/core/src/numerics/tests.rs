use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::Error;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn store(tensors: Vec<Tensor>) -> ParamStore {
    let mut s = ParamStore::new();
    for (i, t) in tensors.into_iter().enumerate() {
        s.insert(format!("p{i}"), t);
    }
    s
}

/// Reduces any output to a scalar through a fixed random projection so
/// every output coordinate contributes to the checked gradient.
fn project(tape: &mut Tape, v: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_tensor(&mut rng, tape.shape(v));
    let w = tape.constant(w);
    let p = tape.mul(v, w);
    tape.sum_all(p)
}

fn check(shapes: &[&[usize]], seed: u64, f: impl Fn(&mut Tape, &[Var]) -> Var) -> f32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = store(shapes.iter().map(|s| random_tensor(&mut rng, s)).collect());
    let report = grad_check(
        |tape, bound| {
            let out = f(tape, bound.vars());
            Ok::<_, Error>(project(tape, out, seed ^ 0xabcd))
        },
        &params,
        1e-3,
    )
    .unwrap();
    report.max_relative_error
}

#[test]
fn elementary_adjoints_match_central_differences() {
    type OpFn = fn(&mut Tape, &[Var]) -> Var;
    let cases: Vec<(&str, Vec<&[usize]>, OpFn)> = vec![
        ("add", vec![&[3, 4], &[3, 4]], |t, v| t.add(v[0], v[1])),
        ("sub", vec![&[3, 4], &[3, 4]], |t, v| t.sub(v[0], v[1])),
        ("mul", vec![&[3, 4], &[3, 4]], |t, v| t.mul(v[0], v[1])),
        ("scale", vec![&[3, 4]], |t, v| t.scale(v[0], -2.5)),
        ("scale_by", vec![&[3, 4], &[]], |t, v| t.scale_by(v[0], v[1])),
        ("add_row", vec![&[3, 4], &[4]], |t, v| t.add_row(v[0], v[1])),
        ("mul_row", vec![&[3, 4], &[4]], |t, v| t.mul_row(v[0], v[1])),
        ("matmul", vec![&[3, 4], &[4, 5]], |t, v| t.matmul(v[0], v[1])),
        ("matmul_t", vec![&[3, 4], &[5, 4]], |t, v| t.matmul_t(v[0], v[1])),
        ("transpose", vec![&[3, 4]], |t, v| t.transpose(v[0])),
        ("concat_rows", vec![&[2, 4], &[3, 4]], |t, v| t.concat_rows(&[v[0], v[1]])),
        ("gather_rows", vec![&[4, 3]], |t, v| t.gather_rows(v[0], &[2, 0, 2, 3])),
        ("exp", vec![&[3, 4]], |t, v| t.exp(v[0])),
        ("log", vec![&[3, 4]], |t, v| {
            let e = t.exp(v[0]);
            t.log(e)
        }),
        ("sigmoid", vec![&[3, 4]], |t, v| t.sigmoid(v[0])),
        ("log_sigmoid", vec![&[3, 4]], |t, v| t.log_sigmoid(v[0])),
        ("quick_gelu", vec![&[3, 4]], |t, v| t.quick_gelu(v[0])),
        ("sum_rows", vec![&[3, 4]], |t, v| t.sum(v[0], Axis::Rows)),
        ("sum_cols", vec![&[3, 4]], |t, v| t.sum(v[0], Axis::Cols)),
        ("mean_rows", vec![&[3, 4]], |t, v| t.mean(v[0], Axis::Rows)),
        ("mean_cols", vec![&[3, 4]], |t, v| t.mean(v[0], Axis::Cols)),
        ("layer_norm", vec![&[3, 6], &[6], &[6]], |t, v| t.layer_norm(v[0], v[1], v[2])),
        ("l2_normalize_rows", vec![&[3, 4]], |t, v| t.l2_normalize_rows(v[0]).unwrap()),
        ("log_softmax_rows", vec![&[3, 4]], |t, v| t.log_softmax_rows(v[0], None)),
        ("masked_log_softmax_rows", vec![&[2, 3]], |t, v| {
            t.log_softmax_rows(v[0], Some(vec![true, false, true, true, true, false]))
        }),
        ("attention", vec![&[2 * 3, 12]], |t, v| t.attention(v[0], 2, 3, 2, None)),
        ("masked_attention", vec![&[2 * 3, 12]], |t, v| {
            t.attention(v[0], 2, 3, 2, Some(&[true, true, false, true, false, false]))
        }),
    ];
    for (name, shapes, f) in cases {
        let mut worst = 0.0f32;
        for seed in 0..50 {
            worst = worst.max(check(&shapes, seed, f));
        }
        assert!(worst < 1e-3, "{name}: max relative error {worst}");
    }
}

#[test]
fn relu_adjoint_away_from_kink() {
    let params = store(vec![Tensor::new(vec![2, 3], vec![0.5, -0.7, 1.2, -0.1, 0.3, -2.0])]);
    let report = grad_check(
        |t, b| {
            let r = t.relu(b.vars()[0]);
            Ok(project(t, r, 9))
        },
        &params,
        1e-3,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-3);
}

#[test]
fn normalize_examples() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::from_rows(&[vec![3.0, 4.0]]));
    let y = t.l2_normalize_rows(x).unwrap();
    assert_eq!(t.value(y).data(), &[0.6, 0.8]);

    let x = t.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, -2.0]]));
    let y = t.l2_normalize_rows(x).unwrap();
    assert_eq!(t.value(y).data(), &[1.0, 0.0, 0.0, -1.0]);
}

#[test]
fn normalize_rejects_zero_rows() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]));
    assert_eq!(t.l2_normalize_rows(x), Err(NumericsError::ZeroRow { row: 1 }));
}

#[test]
fn normalized_rows_have_unit_norm_by_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut t = Tape::new();
    let x = t.constant(random_tensor(&mut rng, &[4, 8]));
    let y = t.l2_normalize_rows(x).unwrap();
    let v = t.value(y);
    for r in 0..4 {
        let mut s = 0.0f64;
        for c in 0..8 {
            s += (v.row(r)[c] as f64).powi(2);
        }
        assert!((s.sqrt() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn backward_linear_sum_gives_ones() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]));
    let s = t.sum_all(x);
    t.backward(s).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[1.0; 6]);
}

#[test]
fn backward_mean_of_squares() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]));
    let sq = t.mul(x, x);
    let m = t.mean_all(sq);
    t.backward(m).unwrap();
    let g = t.grad(x).unwrap();
    for (a, b) in g.iter().zip([2.0 / 3.0, 4.0 / 3.0, 2.0]) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn backward_accumulates_until_cleared() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]));
    let s = t.sum_all(x);
    t.backward(s).unwrap();
    t.backward(s).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[2.0, 2.0]);
    t.zero_grads();
    assert!(t.grad(x).is_none());
}

#[test]
fn backward_rejects_non_scalar() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]));
    assert_eq!(t.backward(x), Err(NumericsError::NotScalar { len: 2 }));
}

#[test]
fn constants_receive_no_gradient() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::new(vec![2], vec![1.0, 2.0]));
    let c = t.constant(Tensor::new(vec![2], vec![3.0, 4.0]));
    let p = t.mul(x, c);
    let s = t.sum_all(p);
    t.backward(s).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[3.0, 4.0]);
    assert!(t.grad(c).is_none());
}

#[test]
fn grad_check_quadratic() {
    let params = store(vec![Tensor::scalar(2.0)]);
    let report = grad_check(
        |t, b| {
            let x = b.vars()[0];
            Ok(t.mul(x, x))
        },
        &params,
        1e-3,
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn grad_check_reports_non_finite() {
    let params = store(vec![Tensor::scalar(0.0)]);
    let err = grad_check(
        |t, b| {
            let x = b.vars()[0];
            Ok(t.log(x))
        },
        &params,
        1e-3,
    );
    assert!(matches!(err, Err(Error::Numerics(NumericsError::NonFinite))));
}

#[test]
fn masked_attention_ignores_masked_keys() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = random_tensor(&mut rng, &[3, 6]);
    let mut altered = base.clone();
    // change key and value of the masked third position
    for c in 2..6 {
        altered.data_mut()[2 * 6 + c] += 5.0;
    }
    let mask = [true, true, false];
    let mut t = Tape::new();
    let a = t.constant(base);
    let b = t.constant(altered);
    let oa = t.attention(a, 1, 3, 1, Some(&mask));
    let ob = t.attention(b, 1, 3, 1, Some(&mask));
    assert_eq!(t.value(oa).row(0), t.value(ob).row(0));
    assert_eq!(t.value(oa).row(1), t.value(ob).row(1));
}

#[test]
fn forward_is_bit_identical_across_runs() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut t = Tape::new();
        let a = t.constant(random_tensor(&mut rng, &[7, 9]));
        let b = t.constant(random_tensor(&mut rng, &[9, 5]));
        let m = t.matmul(a, b);
        let s = t.log_softmax_rows(m, None);
        t.value(s).clone()
    };
    assert_eq!(run(), run());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn normalize_is_idempotent(rows in 1usize..5, cols in 1usize..8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_tensor(&mut rng, &[rows, cols]);
            prop_assume!(x.to_rows().iter().all(|r| r.iter().map(|v| v * v).sum::<f32>() > 1e-6));
            let mut t = Tape::new();
            let x = t.constant(x);
            let y = t.l2_normalize_rows(x).unwrap();
            let z = t.l2_normalize_rows(y).unwrap();
            for (a, b) in t.value(y).data().iter().zip(t.value(z).data()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
