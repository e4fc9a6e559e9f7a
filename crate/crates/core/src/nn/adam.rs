//! Adam with bias correction.

use super::{Gradients, ParamSet, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    /// One update. Gradients are validated first; a non-finite entry aborts
    /// the step without touching parameters or moments.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.0.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::shape("gradient/parameter count mismatch"));
        }
        for (p, g) in params.iter().zip(grads.iter()) {
            if p.value.shape() != g.shape() {
                return Err(Error::shape(format!("gradient shape for `{}`", p.name)));
            }
            if let Some(i) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of `{}` at index {i} ({:?})",
                    p.name,
                    g.data()[i]
                )));
            }
        }

        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        let (inv_bc1, inv_bc2) = (T::from_f64(1.0 / bc1), T::from_f64(1.0 / bc2));
        let (lr, eps) = (T::from_f64(c.lr), T::from_f64(c.epsilon));

        for (k, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for (((theta, &gi), mi), vi) in p.value.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = b1 * *mi + one_b1 * gi;
                *vi = b2 * *vi + one_b2 * gi * gi;
                let m_hat = *mi * inv_bc1;
                let v_hat = *vi * inv_bc2;
                *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn adam_update<T: Scalar>(params: &mut ParamSet<T>, grads: &Gradients<T>, state: &mut AdamState<T>) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(values: Vec<f64>) -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        let n = values.len();
        ps.push("theta", Tensor::new(vec![n], values).unwrap());
        ps
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let mut ps = single(vec![0.5, -0.25, 2.0]);
        let before = ps.clone();
        let mut state = AdamState::new(&ps, AdamConfig::default());
        let g = Gradients(vec![Tensor::new(vec![3], vec![0.3, -4.0, 1e-3]).unwrap()]);
        state.step(&mut ps, &g).unwrap();
        for i in 0..3 {
            let gi = g.0[0].data()[i];
            let delta = (ps.iter().next().unwrap().value.data()[i] - before.iter().next().unwrap().value.data()[i]).abs();
            let expect = 0.001 * gi.abs() / (gi.abs() + 1e-8);
            assert!((delta - expect).abs() < 1e-12, "{delta} vs {expect}");
            assert!((delta - 0.001).abs() < 1e-7);
        }
        assert_eq!(state.t, 1);
    }

    /// Plain scalar loop, written independently of `AdamState::step`.
    fn reference_adam(theta: &mut [f64], grads: &[Vec<f64>]) {
        let (lr, b1, b2, eps) = (0.001, 0.9, 0.999, 1e-8);
        let mut m = vec![0.0; theta.len()];
        let mut v = vec![0.0; theta.len()];
        for (step, g) in grads.iter().enumerate() {
            let t = (step + 1) as i32;
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let mh = m[i] / (1.0 - b1.powi(t));
                let vh = v[i] / (1.0 - b2.powi(t));
                theta[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }

    #[test]
    fn agrees_with_scalar_reference_over_ten_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let init: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grads: Vec<Vec<f64>> = (0..10).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();

        let mut expect = init.clone();
        reference_adam(&mut expect, &grads);

        let mut ps = single(init);
        let mut state = AdamState::new(&ps, AdamConfig::default());
        for g in &grads {
            adam_update(&mut ps, &Gradients(vec![Tensor::new(vec![5], g.clone()).unwrap()]), &mut state).unwrap();
        }
        for (a, e) in ps.iter().next().unwrap().value.data().iter().zip(&expect) {
            assert!((a - e).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut ps = single(vec![1.0, 2.0]);
        let before = ps.clone();
        let mut state = AdamState::new(&ps, AdamConfig::default());
        let g = Gradients(vec![Tensor::new(vec![2], vec![0.1, f64::NAN]).unwrap()]);
        let err = state.step(&mut ps, &g).unwrap_err();
        assert!(err.to_string().contains("theta"));
        assert_eq!(ps, before);
        assert_eq!(state.t, 0);
    }

    proptest! {
        #[test]
        fn zero_gradient_is_identity(values in prop::collection::vec(-10.0f64..10.0, 1..8), warmup in 0usize..5) {
            let mut ps = single(values.clone());
            let mut state = AdamState::new(&ps, AdamConfig::default());
            let n = values.len();
            let zero = Gradients(vec![Tensor::zeros(&[n])]);
            for _ in 0..warmup + 1 {
                state.step(&mut ps, &zero).unwrap();
            }
            prop_assert_eq!(ps.iter().next().unwrap().value.data(), values.as_slice());
        }
    }
}
