use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Max-pool output plus, for every output element, the input row it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<T> {
    pub out: Tensor<T>,
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling along the time axis of `[L, F]`; stride equals
/// the window and a trailing remainder shorter than the window is dropped.
pub fn maxpool1d<T: Scalar>(x: &Tensor<T>, pool: usize) -> Result<Pooled<T>> {
    if x.shape().len() != 2 {
        return Err(Error::shape(format!("maxpool1d expects [L, F], got {:?}", x.shape())));
    }
    let (len, f) = (x.shape()[0], x.shape()[1]);
    if pool == 0 || len < pool {
        return Err(Error::shape(format!(
            "sequence length {len} shorter than pool size {pool}"
        )));
    }
    let out_len = len / pool;
    let mut out = Tensor::zeros(&[out_len, f]);
    let mut argmax = vec![0usize; out_len * f];
    for w in 0..out_len {
        let start = w * pool;
        let dst = &mut out.data_mut()[w * f..(w + 1) * f];
        let arg = &mut argmax[w * f..(w + 1) * f];
        dst.copy_from_slice(x.row(start));
        arg.iter_mut().for_each(|a| *a = start);
        for t in start + 1..start + pool {
            for ((d, a), &v) in dst.iter_mut().zip(arg.iter_mut()).zip(x.row(t)) {
                // strict comparison keeps the first maximal position on ties
                if v > *d {
                    *d = v;
                    *a = t;
                }
            }
        }
    }
    Ok(Pooled { out, argmax })
}

/// Routes each upstream gradient to the row that produced the maximum.
pub fn maxpool1d_backward<T: Scalar>(pooled: &Pooled<T>, dout: &Tensor<T>, input_len: usize) -> Tensor<T> {
    let f = pooled.out.shape()[1];
    let mut dx = Tensor::zeros(&[input_len, f]);
    for (i, (&src, &g)) in pooled.argmax.iter().zip(dout.data()).enumerate() {
        let col = i % f;
        let v = &mut dx.data_mut()[src * f + col];
        *v = *v + g;
    }
    dx
}
