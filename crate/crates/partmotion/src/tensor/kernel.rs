//! Scalar f32 inner loops shared by forward and backward passes.
//!
//! The ikj matmul ordering keeps the inner loop contiguous in both operands
//! so the compiler can vectorize it; everything here is single-threaded.

/// out = a (m x k) * b (k x n), row-major. `out` is overwritten.
pub fn matmul(a: &[f32], b: &[f32], out: &mut [f32], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// out = transpose of x (rows x cols).
pub fn transpose(x: &[f32], out: &mut [f32], rows: usize, cols: usize) {
    debug_assert_eq!(x.len(), rows * cols);
    debug_assert_eq!(out.len(), rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
}

/// Cross-correlation of x (c_in x n) with kernels (c_out x c_in x kw),
/// zero padding `pad` on both sides, given stride. `out` is c_out x n_out.
pub fn conv1d(
    x: &[f32],
    w: &[f32],
    out: &mut [f32],
    c_in: usize,
    n: usize,
    c_out: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) {
    let n_out = (n + 2 * pad - kw) / stride + 1;
    debug_assert_eq!(out.len(), c_out * n_out);
    out.fill(0.0);
    for o in 0..c_out {
        for ci in 0..c_in {
            let w_tap = &w[(o * c_in + ci) * kw..(o * c_in + ci + 1) * kw];
            let x_ch = &x[ci * n..(ci + 1) * n];
            for t_out in 0..n_out {
                let base = t_out * stride;
                let mut acc = 0.0f32;
                for (j, &wv) in w_tap.iter().enumerate() {
                    let src = base + j;
                    if src >= pad && src - pad < n {
                        acc += x_ch[src - pad] * wv;
                    }
                }
                out[o * n_out + t_out] += acc;
            }
        }
    }
}

/// Gradient of conv1d w.r.t. its input. Accumulates into `dx`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward_input(
    d_out: &[f32],
    w: &[f32],
    dx: &mut [f32],
    c_in: usize,
    n: usize,
    c_out: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) {
    let n_out = (n + 2 * pad - kw) / stride + 1;
    for o in 0..c_out {
        for ci in 0..c_in {
            let w_tap = &w[(o * c_in + ci) * kw..(o * c_in + ci + 1) * kw];
            let dx_ch = &mut dx[ci * n..(ci + 1) * n];
            for t_out in 0..n_out {
                let g = d_out[o * n_out + t_out];
                let base = t_out * stride;
                for (j, &wv) in w_tap.iter().enumerate() {
                    let src = base + j;
                    if src >= pad && src - pad < n {
                        dx_ch[src - pad] += g * wv;
                    }
                }
            }
        }
    }
}

/// Gradient of conv1d w.r.t. its kernels. Accumulates into `dw`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward_kernel(
    d_out: &[f32],
    x: &[f32],
    dw: &mut [f32],
    c_in: usize,
    n: usize,
    c_out: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) {
    let n_out = (n + 2 * pad - kw) / stride + 1;
    for o in 0..c_out {
        for ci in 0..c_in {
            let x_ch = &x[ci * n..(ci + 1) * n];
            let dw_tap = &mut dw[(o * c_in + ci) * kw..(o * c_in + ci + 1) * kw];
            for t_out in 0..n_out {
                let g = d_out[o * n_out + t_out];
                let base = t_out * stride;
                for (j, dwv) in dw_tap.iter_mut().enumerate() {
                    let src = base + j;
                    if src >= pad && src - pad < n {
                        *dwv += g * x_ch[src - pad];
                    }
                }
            }
        }
    }
}

/// Row-wise softmax of x (rows x cols), written to `out`.
pub fn softmax_rows(x: &[f32], out: &mut [f32], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let o_row = &mut out[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for (o, &v) in o_row.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum += e;
        }
        let inv = 1.0 / sum;
        for o in o_row.iter_mut() {
            *o *= inv;
        }
    }
}
