//! Dense kernels shared by forward and adjoint passes.
//!
//! Every reduction runs in a fixed order, so results are reproducible
//! bit-for-bit. Matrix products accumulate in f32 along rows; dot products
//! and row statistics accumulate in f64 and round once.

/// `C[m×n] = A[m×k] · B[k×n]`
pub fn gemm_nn(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0f32; m * n];
    for (a_row, out_row) in a.chunks_exact(k.max(1)).zip(out.chunks_exact_mut(n.max(1))) {
        for (&a_ip, b_row) in a_row.iter().zip(b.chunks_exact(n.max(1))) {
            if a_ip == 0.0 {
                continue;
            }
            for (o, &b_pj) in out_row.iter_mut().zip(b_row) {
                *o += a_ip * b_pj;
            }
        }
    }
    out
}

/// `C[m×n] = A[m×k] · B[n×k]ᵀ`
pub fn gemm_nt(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    gemm_nn(a, &transpose(b, n, k), m, k, n)
}

/// `C[m×n] = A[k×m]ᵀ · B[k×n]`
pub fn gemm_tn(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0f32; m * n];
    if m == 0 || n == 0 {
        return out;
    }
    for (a_row, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
        for (&a_pi, out_row) in a_row.iter().zip(out.chunks_exact_mut(n)) {
            if a_pi == 0.0 {
                continue;
            }
            for (o, &b_pj) in out_row.iter_mut().zip(b_row) {
                *o += a_pi * b_pj;
            }
        }
    }
    out
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    dot64(a, b) as f32
}

pub fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn transpose(a: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Numerically stable `log(sigmoid(x))`.
pub fn log_sigmoid(x: f32) -> f32 {
    let x = x as f64;
    (x.min(0.0) - (-x.abs()).exp().ln_1p()) as f32
}

pub fn sigmoid(x: f32) -> f32 {
    let x = x as f64;
    if x >= 0.0 {
        (1.0 / (1.0 + (-x).exp())) as f32
    } else {
        let e = x.exp();
        (e / (1.0 + e)) as f32
    }
}

pub fn add_into(dst: &mut [f32], src: &[f32]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
