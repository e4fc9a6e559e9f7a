//! Parameterized layer blocks shared by the architectures. Each block owns
//! the ids of its tensors inside the model's `ParamSet`.

use rand::Rng;

use super::Mode;
use crate::error::{Error, Result};
use crate::nn::{
    bilstm_backward, bilstm_forward, conv1d_backward, conv1d_forward, dense_backward, dense_logits, dropout,
    dropout_backward, embedding_backward, embedding_forward, init, maxpool1d, maxpool1d_backward, BiLstmCache,
    Dropped, Gradients, LstmGrads, LstmWeights, ParamId, ParamSet, Pooled, Scalar, Tensor,
};
use crate::preprocess::TokenId;

pub(crate) struct Embedding {
    table: ParamId,
}

impl Embedding {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, vocab: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            table: ps.push("embedding", init::uniform(&[vocab, dim], 0.05, rng)),
        }
    }

    pub fn forward<T: Scalar>(&self, ps: &ParamSet<T>, ids: &[TokenId]) -> Result<Tensor<T>> {
        embedding_forward(ids, ps.get(self.table))
    }

    pub fn backward<T: Scalar>(&self, ids: &[TokenId], dout: &Tensor<T>, grads: &mut Gradients<T>) {
        embedding_backward(ids, dout, grads.get_mut(self.table));
    }
}

/// Conv1D + ReLU followed by max pooling.
pub(crate) struct ConvPool {
    weight: ParamId,
    bias: ParamId,
    pool: usize,
}

pub(crate) struct ConvPoolCache<T> {
    input: Tensor<T>,
    conv: Tensor<T>,
    pooled: Pooled<T>,
}

impl<T> ConvPoolCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.pooled.out
    }

    pub fn conv_output(&self) -> &Tensor<T> {
        &self.conv
    }
}

impl ConvPool {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng>(
        ps: &mut ParamSet<T>,
        name: &str,
        input_dim: usize,
        filters: usize,
        kernel: usize,
        pool: usize,
        rng: &mut R,
    ) -> Self {
        let weight = ps.push(
            format!("{name}.weight"),
            init::glorot_uniform(&[kernel, input_dim, filters], kernel * input_dim, kernel * filters, rng),
        );
        let bias = ps.push(format!("{name}.bias"), Tensor::zeros(&[filters]));
        Self { weight, bias, pool }
    }

    pub fn forward<T: Scalar>(&self, ps: &ParamSet<T>, input: Tensor<T>) -> Result<ConvPoolCache<T>> {
        let conv = conv1d_forward(&input, ps.get(self.weight), ps.get(self.bias))?;
        let pooled = maxpool1d(&conv, self.pool)?;
        Ok(ConvPoolCache { input, conv, pooled })
    }

    /// Returns the gradient with respect to the block input.
    pub fn backward<T: Scalar>(
        &self,
        ps: &ParamSet<T>,
        cache: &ConvPoolCache<T>,
        dout: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Tensor<T> {
        let dconv = maxpool1d_backward(&cache.pooled, dout, cache.conv.shape()[0]);
        let mut dx = Tensor::zeros(cache.input.shape());
        let [dw, db] = grads.many_mut([self.weight, self.bias]);
        conv1d_backward(&cache.input, ps.get(self.weight), &cache.conv, &dconv, dw, db, Some(&mut dx));
        dx
    }
}

struct LstmIds {
    w_in: ParamId,
    w_rec: ParamId,
    bias: ParamId,
}

impl LstmIds {
    fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, prefix: &str, input_dim: usize, units: usize, rng: &mut R) -> Self {
        let gates = 4 * units;
        let w_in = ps.push(
            format!("{prefix}.w_in"),
            init::glorot_uniform(&[input_dim, gates], input_dim, gates, rng),
        );
        let w_rec = ps.push(
            format!("{prefix}.w_rec"),
            init::glorot_uniform(&[units, gates], units, gates, rng),
        );
        // forget-gate bias starts at 1
        let bias = Tensor::from_fn(&[gates], |i| {
            if (units..2 * units).contains(&i) {
                T::one()
            } else {
                T::zero()
            }
        });
        let bias = ps.push(format!("{prefix}.bias"), bias);
        Self { w_in, w_rec, bias }
    }

    fn weights<'a, T: Scalar>(&self, ps: &'a ParamSet<T>) -> LstmWeights<'a, T> {
        LstmWeights {
            w_in: ps.get(self.w_in),
            w_rec: ps.get(self.w_rec),
            bias: ps.get(self.bias),
        }
    }

    fn ids(&self) -> [ParamId; 3] {
        [self.w_in, self.w_rec, self.bias]
    }
}

pub(crate) struct BiLstm {
    fwd: LstmIds,
    bwd: LstmIds,
    return_sequences: bool,
}

pub(crate) struct BiLstmBlockCache<T> {
    input: Tensor<T>,
    inner: BiLstmCache<T>,
}

impl BiLstm {
    pub fn new<T: Scalar, R: Rng>(
        ps: &mut ParamSet<T>,
        name: &str,
        input_dim: usize,
        units: usize,
        return_sequences: bool,
        rng: &mut R,
    ) -> Self {
        let fwd = LstmIds::new(ps, &format!("{name}.fwd"), input_dim, units, rng);
        let bwd = LstmIds::new(ps, &format!("{name}.bwd"), input_dim, units, rng);
        Self {
            fwd,
            bwd,
            return_sequences,
        }
    }

    pub fn forward<T: Scalar>(&self, ps: &ParamSet<T>, input: Tensor<T>) -> Result<(Tensor<T>, BiLstmBlockCache<T>)> {
        let (out, inner) = bilstm_forward(
            &input,
            &self.fwd.weights(ps),
            &self.bwd.weights(ps),
            self.return_sequences,
        )?;
        Ok((out, BiLstmBlockCache { input, inner }))
    }

    pub fn backward<T: Scalar>(
        &self,
        ps: &ParamSet<T>,
        cache: &BiLstmBlockCache<T>,
        dout: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Tensor<T> {
        let (f, b) = (self.fwd.ids(), self.bwd.ids());
        let [fi, fr, fb, bi, br, bb] = grads.many_mut([f[0], f[1], f[2], b[0], b[1], b[2]]);
        bilstm_backward(
            &cache.input,
            &self.fwd.weights(ps),
            &self.bwd.weights(ps),
            &cache.inner,
            dout,
            self.return_sequences,
            LstmGrads {
                w_in: fi,
                w_rec: fr,
                bias: fb,
            },
            LstmGrads {
                w_in: bi,
                w_rec: br,
                bias: bb,
            },
        )
    }
}

pub(crate) struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn forward<T: Scalar>(&self, x: &Tensor<T>, mode: &mut Mode<'_>) -> Result<Dropped<T>> {
        match mode {
            Mode::Inference => Ok(Dropped {
                out: x.clone(),
                mask: None,
            }),
            Mode::Training(rng) => dropout(x, self.rate, true, &mut **rng),
        }
    }

    pub fn backward<T: Scalar>(&self, dropped: &Dropped<T>, dout: &Tensor<T>) -> Tensor<T> {
        dropout_backward(dropped, dout)
    }
}

pub(crate) struct Dense {
    weight: ParamId,
    bias: ParamId,
}

impl Dense {
    pub fn new<T: Scalar, R: Rng>(ps: &mut ParamSet<T>, input_dim: usize, classes: usize, rng: &mut R) -> Self {
        let weight = ps.push(
            "dense.weight",
            init::glorot_uniform(&[input_dim, classes], input_dim, classes, rng),
        );
        let bias = ps.push("dense.bias", Tensor::zeros(&[classes]));
        Self { weight, bias }
    }

    pub fn forward<T: Scalar>(&self, ps: &ParamSet<T>, x: &Tensor<T>) -> Result<Vec<T>> {
        dense_logits(x.data(), ps.get(self.weight), ps.get(self.bias))
    }

    pub fn backward<T: Scalar>(
        &self,
        ps: &ParamSet<T>,
        x: &Tensor<T>,
        dlogits: &[T],
        grads: &mut Gradients<T>,
    ) -> Tensor<T> {
        let mut dx = Tensor::zeros(x.shape());
        let [dw, db] = grads.many_mut([self.weight, self.bias]);
        dense_backward(x.data(), ps.get(self.weight), dlogits, dw, db, Some(dx.data_mut()));
        dx
    }
}

pub(crate) fn check_sequence(ids: &[TokenId], seq_len: usize) -> Result<()> {
    if ids.len() != seq_len {
        return Err(Error::shape(format!(
            "expected {seq_len} token ids, got {}",
            ids.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_architecture(found: &str, expected: &str) -> Result<()> {
    if super::canonical_name(found) != expected {
        return Err(Error::InvalidConfig(format!(
            "config architecture `{found}` cannot build a `{expected}` model"
        )));
    }
    Ok(())
}
