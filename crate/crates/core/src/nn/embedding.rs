use super::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::preprocess::TokenId;

/// Row lookup: output row `t` is `table[ids[t]]`. Shape `[L, D]`.
pub fn embedding_forward<T: Scalar>(ids: &[TokenId], table: &Tensor<T>) -> Result<Tensor<T>> {
    let (vocab, dim) = (table.rows(), table.row_len());
    if ids.is_empty() {
        return Err(Error::shape("empty id sequence"));
    }
    let mut out = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        let id = id as usize;
        if id >= vocab {
            return Err(Error::OutOfRange { index: id, size: vocab });
        }
        out.extend_from_slice(table.row(id));
    }
    Tensor::new(vec![ids.len(), dim], out)
}

/// Scatter-adds upstream rows into the table gradient (pad row included).
pub fn embedding_backward<T: Scalar>(ids: &[TokenId], dout: &Tensor<T>, dtable: &mut Tensor<T>) {
    for (t, &id) in ids.iter().enumerate() {
        let src = dout.row(t);
        for (d, s) in dtable.row_mut(id as usize).iter_mut().zip(src) {
            *d = *d + *s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_gradients, DEFAULT_EPS};
    use crate::nn::{ParamId, ParamSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lookup_rows() {
        let table = Tensor::<f32>::from_fn(&[4, 3], |i| i as f32);
        let out = embedding_forward(&[0, 0], &table).unwrap();
        assert_eq!(out.shape(), &[2, 3]);
        assert_eq!(out.row(0), table.row(0));
        assert_eq!(out.row(1), table.row(0));

        let eye = Tensor::<f32>::from_fn(&[4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
        let out = embedding_forward(&[2], &eye).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 1.0, 0.0]);

        assert!(matches!(
            embedding_forward(&[4], &table),
            Err(Error::OutOfRange { index: 4, size: 4 })
        ));
    }

    #[test]
    fn gradient_of_sum_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ps = ParamSet::new();
            let e = ps.push("table", Tensor::from_fn(&[6, 4], |_| rng.gen_range(-1.0..1.0)));
            let ids: Vec<TokenId> = vec![0, 3, 3, 5, 1];
            let weights: Vec<f64> = (0..ids.len() * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = |ps: &ParamSet<f64>| {
                let out = embedding_forward(&ids, ps.get(ParamId(0))).unwrap();
                out.data().iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
            };
            let mut g = ps.zero_grads();
            let dout = Tensor::new(vec![ids.len(), 4], weights.clone()).unwrap();
            embedding_backward(&ids, &dout, g.get_mut(e));
            let r = check_gradients(&mut ps, &g, loss, DEFAULT_EPS);
            assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
        }
    }
}
