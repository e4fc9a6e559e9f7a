//! Dense output layer, softmax and cross-entropy.

use super::linalg::{axpy, gemm_acc, gemm_bt_acc};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// `x·W + b` with `W` shaped `[D, C]`.
pub fn dense_logits<T: Scalar>(x: &[T], w: &Tensor<T>, b: &Tensor<T>) -> Result<Vec<T>> {
    if w.shape().len() != 2 || w.shape()[0] != x.len() || b.shape() != [w.shape()[1]] {
        return Err(Error::shape(format!(
            "dense weights {:?}/{:?} incompatible with input width {}",
            w.shape(),
            b.shape(),
            x.len()
        )));
    }
    let mut out = b.data().to_vec();
    let classes = out.len();
    gemm_acc(x, w.data(), &mut out, 1, x.len(), classes);
    Ok(out)
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub fn dense_softmax<T: Scalar>(x: &[T], w: &Tensor<T>, b: &Tensor<T>) -> Result<Vec<T>> {
    if w.shape().len() == 2 && w.shape()[1] < 2 {
        return Err(Error::InvalidConfig("softmax needs at least two classes".into()));
    }
    softmax(&dense_logits(x, w, b)?)
}

/// `-ln(probs[label])`
pub fn cross_entropy<T: Scalar>(probs: &[T], label: usize) -> Result<T> {
    let p = probs.get(label).ok_or(Error::OutOfRange {
        index: label,
        size: probs.len(),
    })?;
    Ok(-p.ln())
}

/// Cross-entropy computed from logits via log-sum-exp; stays finite where
/// the probability would underflow.
pub fn cross_entropy_from_logits<T: Scalar>(logits: &[T], label: usize) -> Result<T> {
    if label >= logits.len() {
        return Err(Error::OutOfRange {
            index: label,
            size: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    Ok(lse - logits[label])
}

/// Gradient of softmax + cross-entropy at the logits: `probs - one_hot(label)`.
pub fn softmax_cross_entropy_grad<T: Scalar>(probs: &[T], label: usize) -> Vec<T> {
    let mut g = probs.to_vec();
    g[label] = g[label] - T::one();
    g
}

/// Accumulates weight/bias gradients; `dx`, when given, accumulates `dlogits·Wᵀ`.
pub fn dense_backward<T: Scalar>(
    x: &[T],
    w: &Tensor<T>,
    dlogits: &[T],
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
    dx: Option<&mut [T]>,
) {
    let c = dlogits.len();
    for (row, &xi) in dw.data_mut().chunks_exact_mut(c).zip(x) {
        axpy(xi, dlogits, row);
    }
    axpy(T::one(), dlogits, db.data_mut());
    if let Some(dx) = dx {
        gemm_bt_acc(dlogits, w.data(), dx, 1, c, x.len());
    }
}
