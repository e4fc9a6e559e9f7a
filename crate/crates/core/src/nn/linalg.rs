//! Row-major matrix kernels shared by the layers.
//!
//! All routines accumulate into `out`; callers zero it when they want a plain product.

use super::Scalar;

const LANES: usize = 8;

/// Inner product with independent lane accumulators so the loop vectorizes.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    let mut s = T::zero();
    for v in acc {
        s = s + v;
    }
    s + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// `y += a0·x0 + a1·x1 + a2·x2 + a3·x3`, one pass over `y`.
#[inline]
fn axpy4<T: Scalar>(a: [T; 4], x: [&[T]; 4], y: &mut [T]) {
    let n = y.len();
    let (x0, x1, x2, x3) = (&x[0][..n], &x[1][..n], &x[2][..n], &x[3][..n]);
    for j in 0..n {
        y[j] = y[j] + a[0] * x0[j] + a[1] * x1[j] + a[2] * x2[j] + a[3] * x3[j];
    }
}

/// `out[m,n] += a[m,k] · b[k,n]`
pub fn gemm_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let b_row = |p: usize| &b[p * n..(p + 1) * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        let mut p = 0;
        while p + 4 <= k {
            let av = [a_row[p], a_row[p + 1], a_row[p + 2], a_row[p + 3]];
            if av.iter().any(|&v| v != T::zero()) {
                axpy4(av, [b_row(p), b_row(p + 1), b_row(p + 2), b_row(p + 3)], o_row);
            }
            p += 4;
        }
        for q in p..k {
            if a_row[q] != T::zero() {
                axpy(a_row[q], b_row(q), o_row);
            }
        }
    }
}

/// `out[m,k] += a[m,n] · b[k,n]ᵀ`
pub fn gemm_bt_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        let o_row = &mut out[i * k..(i + 1) * k];
        for (p, o) in o_row.iter_mut().enumerate() {
            *o = *o + dot(a_row, &b[p * n..(p + 1) * n]);
        }
    }
}

/// `out[k,n] += a[m,k]ᵀ · b[m,n]`
pub fn gemm_at_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    let b_row = |i: usize| &b[i * n..(i + 1) * n];
    let mut i = 0;
    while i + 4 <= m {
        for p in 0..k {
            let av = [a[i * k + p], a[(i + 1) * k + p], a[(i + 2) * k + p], a[(i + 3) * k + p]];
            if av.iter().any(|&v| v != T::zero()) {
                axpy4(av, [b_row(i), b_row(i + 1), b_row(i + 2), b_row(i + 3)], &mut out[p * n..(p + 1) * n]);
            }
        }
        i += 4;
    }
    for i in i..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(av, b_row(i), &mut out[p * n..(p + 1) * n]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        out
    }

    fn transpose(x: &[f64], r: usize, c: usize) -> Vec<f64> {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = x[i * c + j];
            }
        }
        t
    }

    #[test]
    fn kernels_agree_with_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, k, n) in [(5, 11, 7), (1, 4, 9), (8, 3, 2), (4, 8, 1)] {
            check_shape(&mut rng, m, k, n);
        }
    }

    fn check_shape(rng: &mut ChaCha8Rng, m: usize, k: usize, n: usize) {
        // some exact zeros exercise the skip paths
        let a: Vec<f64> = (0..m * k)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let expect = naive(&a, &b, m, k, n);

        let mut out = vec![0.0; m * n];
        gemm_acc(&a, &b, &mut out, m, k, n);
        for (x, y) in out.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }

        let bt = transpose(&b, k, n);
        let mut out = vec![0.0; m * n];
        gemm_bt_acc(&a, &bt, &mut out, m, k, n);
        for (x, y) in out.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }

        let at = transpose(&a, m, k);
        let mut out = vec![0.0; m * n];
        gemm_at_acc(&at, &b, &mut out, k, m, n);
        for (x, y) in out.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
