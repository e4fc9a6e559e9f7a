//! LSTM cell, single-direction sequence scan with BPTT, and the bidirectional wrapper.
//!
//! Gate pre-activations are laid out `[i, f, g, o]`, each `H` wide:
//!
//! ```text
//! z   = x·W_in + h_prev·W_rec + b
//! i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
//! c   = f⊙c_prev + i⊙g
//! h   = o⊙tanh(c)
//! ```

use super::linalg::{gemm_acc, gemm_at_acc, gemm_bt_acc};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a, T> {
    /// `[D, 4H]`
    pub w_in: &'a Tensor<T>,
    /// `[H, 4H]`
    pub w_rec: &'a Tensor<T>,
    /// `[4H]`
    pub bias: &'a Tensor<T>,
}

pub struct LstmGrads<'a, T> {
    pub w_in: &'a mut Tensor<T>,
    pub w_rec: &'a mut Tensor<T>,
    pub bias: &'a mut Tensor<T>,
}

impl<T: Scalar> LstmWeights<'_, T> {
    pub fn units(&self) -> usize {
        self.w_rec.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.shape()[0]
    }

    fn validate(&self, input_dim: usize) -> Result<()> {
        let h = self.units();
        let ok = self.w_in.shape() == [input_dim, 4 * h]
            && self.w_rec.shape() == [h, 4 * h]
            && self.bias.shape() == [4 * h];
        if ok {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "lstm weights {:?}/{:?}/{:?} incompatible with input width {input_dim}",
                self.w_in.shape(),
                self.w_rec.shape(),
                self.bias.shape()
            )))
        }
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Activates the pre-activations in `z` in place and writes the new cell
/// state, its tanh, and the hidden state.
#[inline]
fn activate<T: Scalar>(z: &mut [T], c_prev: &[T], c: &mut [T], c_tanh: &mut [T], h: &mut [T]) {
    let units = c.len();
    for j in 0..units {
        let i = sigmoid(z[j]);
        let f = sigmoid(z[units + j]);
        let g = z[2 * units + j].tanh();
        let o = sigmoid(z[3 * units + j]);
        z[j] = i;
        z[units + j] = f;
        z[2 * units + j] = g;
        z[3 * units + j] = o;
        c[j] = f * c_prev[j] + i * g;
        c_tanh[j] = c[j].tanh();
        h[j] = o * c_tanh[j];
    }
}

/// One recurrence step. Returns `(h_t, c_t)`.
pub fn lstm_cell_step<T: Scalar>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    weights: &LstmWeights<'_, T>,
) -> Result<(Vec<T>, Vec<T>)> {
    weights.validate(x.len())?;
    let units = weights.units();
    if h_prev.len() != units || c_prev.len() != units {
        return Err(Error::shape(format!(
            "state widths {}/{} do not match {units} units",
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut z = weights.bias.data().to_vec();
    gemm_acc(x, weights.w_in.data(), &mut z, 1, x.len(), 4 * units);
    gemm_acc(h_prev, weights.w_rec.data(), &mut z, 1, units, 4 * units);
    let (mut c, mut c_tanh, mut h) = (vec![T::zero(); units], vec![T::zero(); units], vec![T::zero(); units]);
    activate(&mut z, c_prev, &mut c, &mut c_tanh, &mut h);
    Ok((h, c))
}

/// Per-step activations kept for the backward pass, all in scan order.
#[derive(Debug, Clone)]
pub struct LstmTrace<T> {
    /// `[L, 4H]` activated gates
    pub gates: Vec<T>,
    /// `[L, H]`
    pub cells: Vec<T>,
    /// `[L, H]`
    pub cell_tanh: Vec<T>,
    /// `[L, H]`
    pub hidden: Vec<T>,
    pub len: usize,
    pub units: usize,
}

impl<T: Scalar> LstmTrace<T> {
    pub fn hidden_at(&self, t: usize) -> &[T] {
        &self.hidden[t * self.units..(t + 1) * self.units]
    }
}

/// Scans `xs` (`[L, D]` flat) from the first row to the last, starting from zero state.
pub fn lstm_sequence<T: Scalar>(xs: &[T], len: usize, weights: &LstmWeights<'_, T>) -> Result<LstmTrace<T>> {
    if len == 0 || xs.len() % len != 0 {
        return Err(Error::shape("lstm input must be a non-empty [L, D] sequence"));
    }
    let dim = xs.len() / len;
    weights.validate(dim)?;
    let units = weights.units();
    let width = 4 * units;

    let mut gates = Vec::with_capacity(len * width);
    for _ in 0..len {
        gates.extend_from_slice(weights.bias.data());
    }
    gemm_acc(xs, weights.w_in.data(), &mut gates, len, dim, width);

    let mut cells = vec![T::zero(); len * units];
    let mut cell_tanh = vec![T::zero(); len * units];
    let mut hidden = vec![T::zero(); len * units];
    let zeros = vec![T::zero(); units];
    for t in 0..len {
        let (h_done, h_rest) = hidden.split_at_mut(t * units);
        let (c_done, c_rest) = cells.split_at_mut(t * units);
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&h_done[(t - 1) * units..], &c_done[(t - 1) * units..])
        };
        let z = &mut gates[t * width..(t + 1) * width];
        if t > 0 {
            gemm_acc(h_prev, weights.w_rec.data(), z, 1, units, width);
        }
        activate(
            z,
            c_prev,
            &mut c_rest[..units],
            &mut cell_tanh[t * units..(t + 1) * units],
            &mut h_rest[..units],
        );
    }
    Ok(LstmTrace {
        gates,
        cells,
        cell_tanh,
        hidden,
        len,
        units,
    })
}

/// Backpropagation through time. `dh` holds upstream gradients on every hidden
/// state (`[L, H]`, scan order). Weight gradients accumulate into `grads`; the
/// input gradient accumulates into `dx` (`[L, D]`, scan order).
pub fn lstm_sequence_backward<T: Scalar>(
    xs: &[T],
    weights: &LstmWeights<'_, T>,
    trace: &LstmTrace<T>,
    dh: &[T],
    grads: LstmGrads<'_, T>,
    dx: Option<&mut [T]>,
) {
    let (len, units) = (trace.len, trace.units);
    let width = 4 * units;
    let dim = xs.len() / len;

    let mut dz = vec![T::zero(); len * width];
    let mut dh_next = vec![T::zero(); units];
    let mut dc_next = vec![T::zero(); units];
    let one = T::one();
    for t in (0..len).rev() {
        let g = &trace.gates[t * width..(t + 1) * width];
        let c_tanh = &trace.cell_tanh[t * units..(t + 1) * units];
        let dz_t = &mut dz[t * width..(t + 1) * width];
        for j in 0..units {
            let (i, f, gg, o) = (g[j], g[units + j], g[2 * units + j], g[3 * units + j]);
            let c_prev = if t > 0 { trace.cells[(t - 1) * units + j] } else { T::zero() };
            let dhj = dh[t * units + j] + dh_next[j];
            let tc = c_tanh[j];
            let dc = dc_next[j] + dhj * o * (one - tc * tc);
            dz_t[j] = dc * gg * i * (one - i);
            dz_t[units + j] = dc * c_prev * f * (one - f);
            dz_t[2 * units + j] = dc * i * (one - gg * gg);
            dz_t[3 * units + j] = dhj * tc * o * (one - o);
            dc_next[j] = dc * f;
        }
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        if t > 0 {
            gemm_bt_acc(dz_t, weights.w_rec.data(), &mut dh_next, 1, width, units);
        }
    }

    for t in 0..len {
        for (b, &d) in grads.bias.data_mut().iter_mut().zip(&dz[t * width..(t + 1) * width]) {
            *b = *b + d;
        }
    }
    gemm_at_acc(xs, &dz, grads.w_in.data_mut(), len, dim, width);
    if len > 1 {
        gemm_at_acc(
            &trace.hidden[..(len - 1) * units],
            &dz[width..],
            grads.w_rec.data_mut(),
            len - 1,
            units,
            width,
        );
    }
    if let Some(dx) = dx {
        gemm_bt_acc(&dz, weights.w_in.data(), dx, len, width, dim);
    }
}

fn reverse_rows<T: Copy>(data: &[T], len: usize) -> Vec<T> {
    let w = data.len() / len;
    let mut out = Vec::with_capacity(data.len());
    for t in (0..len).rev() {
        out.extend_from_slice(&data[t * w..(t + 1) * w]);
    }
    out
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<T> {
    forward: LstmTrace<T>,
    backward: LstmTrace<T>,
    reversed_input: Vec<T>,
}

/// Runs one LSTM over `x` and another over the reversed `x`.
///
/// With `return_sequences`, row `t` of the `[L, 2H]` output is
/// `[h_fwd(t) ; h_bwd(t)]` in original time order. Otherwise the `[2H]` output
/// is the forward direction's last state next to the backward direction's
/// state at `t = 0`.
pub fn bilstm_forward<T: Scalar>(
    x: &Tensor<T>,
    fwd: &LstmWeights<'_, T>,
    bwd: &LstmWeights<'_, T>,
    return_sequences: bool,
) -> Result<(Tensor<T>, BiLstmCache<T>)> {
    if x.shape().len() != 2 {
        return Err(Error::shape(format!("bilstm expects [L, D], got {:?}", x.shape())));
    }
    let len = x.shape()[0];
    if fwd.units() != bwd.units() {
        return Err(Error::shape("bilstm directions must have the same width"));
    }
    let units = fwd.units();
    let forward = lstm_sequence(x.data(), len, fwd)?;
    let reversed_input = reverse_rows(x.data(), len);
    let backward = lstm_sequence(&reversed_input, len, bwd)?;

    let out = if return_sequences {
        let mut out = Tensor::zeros(&[len, 2 * units]);
        for t in 0..len {
            let row = out.row_mut(t);
            row[..units].copy_from_slice(forward.hidden_at(t));
            row[units..].copy_from_slice(backward.hidden_at(len - 1 - t));
        }
        out
    } else {
        let mut data = forward.hidden_at(len - 1).to_vec();
        data.extend_from_slice(backward.hidden_at(len - 1));
        Tensor::new(vec![2 * units], data)?
    };
    Ok((
        out,
        BiLstmCache {
            forward,
            backward,
            reversed_input,
        },
    ))
}

/// Gradient of [`bilstm_forward`]; returns the `[L, D]` input gradient.
pub fn bilstm_backward<T: Scalar>(
    x: &Tensor<T>,
    fwd: &LstmWeights<'_, T>,
    bwd: &LstmWeights<'_, T>,
    cache: &BiLstmCache<T>,
    dout: &Tensor<T>,
    return_sequences: bool,
    fwd_grads: LstmGrads<'_, T>,
    bwd_grads: LstmGrads<'_, T>,
) -> Tensor<T> {
    let (len, dim) = (x.shape()[0], x.shape()[1]);
    let units = fwd.units();
    let mut dh_f = vec![T::zero(); len * units];
    let mut dh_b = vec![T::zero(); len * units];
    if return_sequences {
        for t in 0..len {
            let row = dout.row(t);
            dh_f[t * units..(t + 1) * units].copy_from_slice(&row[..units]);
            let s = len - 1 - t;
            dh_b[s * units..(s + 1) * units].copy_from_slice(&row[units..]);
        }
    } else {
        let last = (len - 1) * units;
        dh_f[last..].copy_from_slice(&dout.data()[..units]);
        dh_b[last..].copy_from_slice(&dout.data()[units..]);
    }

    let mut dx = Tensor::zeros(&[len, dim]);
    lstm_sequence_backward(x.data(), fwd, &cache.forward, &dh_f, fwd_grads, Some(dx.data_mut()));
    let mut dx_rev = vec![T::zero(); len * dim];
    lstm_sequence_backward(&cache.reversed_input, bwd, &cache.backward, &dh_b, bwd_grads, Some(&mut dx_rev));
    for (t, src) in dx_rev.chunks_exact(dim).enumerate() {
        for (d, &s) in dx.row_mut(len - 1 - t).iter_mut().zip(src) {
            *d = *d + s;
        }
    }
    dx
}
