//! 3x3, stride 2, padding 1 convolution lowered to matrix products.

use super::params::Tensor;

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

pub fn out_side(in_side: usize) -> usize {
    (in_side + 2 - KERNEL) / 2 + 1
}

/// `c = a * b + beta * c` where `a` is `m x k` and `b` is `k x n`, each
/// optionally read transposed from row-major storage.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Patch matrix of shape `[cin * 9, out_side^2]`.
fn im2col(input: &[f64], cin: usize, side: usize) -> Vec<f64> {
    let os = out_side(side);
    let n = os * os;
    let mut col = vec![0.0; cin * TAPS * n];
    for ci in 0..cin {
        let plane = &input[ci * side * side..(ci + 1) * side * side];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut col[((ci * TAPS) + ky * KERNEL + kx) * n..][..n];
                for oy in 0..os {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * side..(iy as usize + 1) * side];
                    let dst = &mut row[oy * os..(oy + 1) * os];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

fn col2im(dcol: &[f64], cin: usize, side: usize) -> Vec<f64> {
    let os = out_side(side);
    let n = os * os;
    let mut out = vec![0.0; cin * side * side];
    for ci in 0..cin {
        let plane = &mut out[ci * side * side..(ci + 1) * side * side];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &dcol[((ci * TAPS) + ky * KERNEL + kx) * n..][..n];
                for oy in 0..os {
                    let iy = (2 * oy + ky) as isize - 1;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * side..(iy as usize + 1) * side];
                    for (ox, &g) in row[oy * os..(oy + 1) * os].iter().enumerate() {
                        let ix = (2 * ox + kx) as isize - 1;
                        if ix >= 0 && ix < side as isize {
                            dst[ix as usize] += g;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Forward activations of one conv + ReLU layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    pub col: Vec<f64>,
    /// Post-ReLU output, `[cout, out_side^2]`.
    pub out: Vec<f64>,
    pub in_side: usize,
}

/// Convolution followed by ReLU.
pub fn conv_relu_forward(input: &[f64], in_side: usize, w: &Tensor, b: &Tensor) -> ConvCache {
    let (cout, cin) = (w.shape[0], w.shape[1]);
    let os = out_side(in_side);
    let n = os * os;
    let col = im2col(input, cin, in_side);
    let mut out = vec![0.0; cout * n];
    for (o, row) in out.chunks_exact_mut(n).enumerate() {
        row.fill(b.data[o]);
    }
    gemm(cout, cin * TAPS, n, &w.data, false, &col, false, 1.0, &mut out);
    for v in out.iter_mut() {
        *v = v.max(0.0);
    }
    ConvCache { col, out, in_side }
}

/// Backward through ReLU and the convolution. `d_out` is the gradient with
/// respect to the post-ReLU output and is masked in place. Weight and bias
/// gradients are accumulated; the input gradient is returned when asked for.
pub fn conv_relu_backward(
    cache: &ConvCache,
    d_out: &mut [f64],
    w: &Tensor,
    dw: &mut Tensor,
    db: &mut Tensor,
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let (cout, cin) = (w.shape[0], w.shape[1]);
    let os = out_side(cache.in_side);
    let n = os * os;
    for (g, &a) in d_out.iter_mut().zip(&cache.out) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
    for (o, row) in d_out.chunks_exact(n).enumerate() {
        db.data[o] += row.iter().sum::<f64>();
    }
    gemm(cout, n, cin * TAPS, d_out, false, &cache.col, true, 1.0, &mut dw.data);
    if !want_input_grad {
        return None;
    }
    let mut dcol = vec![0.0; cin * TAPS * n];
    gemm(cin * TAPS, cout, n, &w.data, true, d_out, false, 0.0, &mut dcol);
    Some(col2im(&dcol, cin, cache.in_side))
}
