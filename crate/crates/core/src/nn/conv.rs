//! Valid (unpadded) 1-D convolution over a `[L, D]` sequence with ReLU.
//!
//! Filters are laid out `[K, D, F]`: for each kernel offset `k`, a `[D, F]`
//! matrix applied to input row `t + k`.

use super::linalg::{gemm_acc, gemm_at_acc, gemm_bt_acc};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn check_shapes<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    if x.shape().len() != 2 || w.shape().len() != 3 {
        return Err(Error::shape(format!(
            "conv1d expects x [L, D] and w [K, D, F], got {:?} and {:?}",
            x.shape(),
            w.shape()
        )));
    }
    let (len, dim) = (x.shape()[0], x.shape()[1]);
    let (k, wd, f) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if wd != dim || b.shape() != [f] {
        return Err(Error::shape(format!(
            "conv1d filter {:?} / bias {:?} incompatible with input width {dim}",
            w.shape(),
            b.shape()
        )));
    }
    if len < k {
        return Err(Error::shape(format!(
            "sequence length {len} shorter than kernel size {k}"
        )));
    }
    Ok((len, dim, k, f))
}

/// Pre-activation `b[f] + Σ_{k,d} x[t+k,d]·w[k,d,f]`, shape `[L-K+1, F]`.
pub fn conv1d_linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (len, dim, k, f) = check_shapes(x, w, b)?;
    let out_len = len - k + 1;
    let mut out = Tensor::zeros(&[out_len, f]);
    for t in 0..out_len {
        out.row_mut(t).copy_from_slice(b.data());
    }
    for kk in 0..k {
        let xs = &x.data()[kk * dim..(kk + out_len) * dim];
        let wk = &w.data()[kk * dim * f..(kk + 1) * dim * f];
        gemm_acc(xs, wk, out.data_mut(), out_len, dim, f);
    }
    Ok(out)
}

/// Convolution followed by ReLU.
pub fn conv1d_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let mut out = conv1d_linear(x, w, b)?;
    for v in out.data_mut() {
        *v = v.max(T::zero());
    }
    Ok(out)
}

/// Backward through ReLU and the convolution. `out` is the forward (post-ReLU)
/// output. Filter and bias gradients accumulate; `dx`, when given, accumulates
/// the input gradient.
pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    out: &Tensor<T>,
    dout: &Tensor<T>,
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
    dx: Option<&mut Tensor<T>>,
) {
    let (out_len, f) = (out.shape()[0], out.shape()[1]);
    let (k, dim) = (w.shape()[0], w.shape()[1]);
    let mut dpre = dout.clone();
    for (g, &o) in dpre.data_mut().iter_mut().zip(out.data()) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
    for t in 0..out_len {
        for (acc, &g) in db.data_mut().iter_mut().zip(dpre.row(t)) {
            *acc = *acc + g;
        }
    }
    for kk in 0..k {
        let xs = &x.data()[kk * dim..(kk + out_len) * dim];
        let dwk = &mut dw.data_mut()[kk * dim * f..(kk + 1) * dim * f];
        gemm_at_acc(xs, dpre.data(), dwk, out_len, dim, f);
    }
    if let Some(dx) = dx {
        for kk in 0..k {
            let wk = &w.data()[kk * dim * f..(kk + 1) * dim * f];
            let dxs = &mut dx.data_mut()[kk * dim..(kk + out_len) * dim];
            gemm_bt_acc(dpre.data(), wk, dxs, out_len, f, dim);
        }
    }
}
