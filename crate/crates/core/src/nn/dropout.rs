use rand::Rng;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Output of [`dropout`]; `mask` holds the per-element scale (0 or 1/(1-rate))
/// applied in training mode.
#[derive(Debug, Clone)]
pub struct Dropped<T> {
    pub out: Tensor<T>,
    pub mask: Option<Vec<T>>,
}

/// Inverted dropout. Identity in inference mode or when `rate == 0`.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(x: &Tensor<T>, rate: f64, training: bool, rng: &mut R) -> Result<Dropped<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(Dropped { out: x.clone(), mask: None });
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let mut out = x.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
        *v = *v * m;
    }
    Ok(Dropped { out, mask: Some(mask) })
}

pub fn dropout_backward<T: Scalar>(dropped: &Dropped<T>, dout: &Tensor<T>) -> Tensor<T> {
    let mut dx = dout.clone();
    if let Some(mask) = &dropped.mask {
        for (g, &m) in dx.data_mut().iter_mut().zip(mask) {
            *g = *g * m;
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inference_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::from_fn(&[3, 4], |i| i as f32 * 0.37 - 1.0);
        let d = dropout(&x, 0.2, false, &mut rng).unwrap();
        assert_eq!(d.out, x);
        for training in [true, false] {
            assert_eq!(dropout(&x, 0.0, training, &mut rng).unwrap().out, x);
        }
    }

    #[test]
    fn invalid_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::<f32>::zeros(&[2]);
        assert!(dropout(&x, 1.0, true, &mut rng).is_err());
        assert!(dropout(&x, -0.1, true, &mut rng).is_err());
    }

    #[test]
    fn expectation_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ones = Tensor::from_fn(&[100_000], |_| 1.0f64);
        let d = dropout(&ones, 0.2, true, &mut rng).unwrap();
        let mean = d.out.data().iter().sum::<f64>() / 100_000.0;
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        let zeros = d.out.data().iter().filter(|&&v| v == 0.0).count() as f64 / 100_000.0;
        assert!((zeros - 0.2).abs() < 0.01);
        // gradient flows only through survivors, with the same scale
        let g = dropout_backward(&d, &ones);
        assert_eq!(g.data(), d.out.data());
    }
}
