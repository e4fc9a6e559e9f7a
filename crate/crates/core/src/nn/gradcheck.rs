//! Central finite-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, ParamSet};

pub const DEFAULT_EPS: f64 = 1e-5;
const ROUNDOFF_REL: f64 = 1e-4;
const ROUNDOFF_ABS: f64 = 1e-9;

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
    /// Largest `|a - n|` over all coordinates.
    pub max_abs_error: f64,
    /// Coordinates whose gap exceeds both `1e-4·max(|a|, |n|)` and `1e-9`.
    pub noisy_misses: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }

    /// Relative agreement to `1e-4`, except where the gap is below the
    /// `1e-9` absolute level that f64 roundoff in `(f(θ+ε) − f(θ−ε)) / 2ε`
    /// reaches for O(1) losses at `ε = 1e-5`.
    pub fn passes_above_roundoff(&self) -> bool {
        self.noisy_misses == 0
    }
}

/// Which coordinates of each parameter tensor to probe.
#[derive(Debug, Clone, Copy)]
pub enum Coverage {
    All,
    /// At most this many coordinates per tensor, drawn with the given seed.
    Sample { per_param: usize, seed: u64 },
}

/// Compares `analytic` against central differences of `loss` at every
/// coordinate of `params`. Parameters are restored before returning.
pub fn check_gradients<F>(
    params: &mut ParamSet<f64>,
    analytic: &Gradients<f64>,
    loss: F,
    eps: f64,
) -> GradCheckReport
where
    F: FnMut(&ParamSet<f64>) -> f64,
{
    check_gradients_with(params, analytic, loss, eps, Coverage::All)
}

pub fn check_gradients_with<F>(
    params: &mut ParamSet<f64>,
    analytic: &Gradients<f64>,
    mut loss: F,
    eps: f64,
    coverage: Coverage,
) -> GradCheckReport
where
    F: FnMut(&ParamSet<f64>) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: 0,
        max_abs_error: 0.0,
        noisy_misses: 0,
    };
    let mut rng = match coverage {
        Coverage::Sample { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Coverage::All => None,
    };
    for p in 0..params.len() {
        let id = super::ParamId(p);
        let n = params.get(id).len();
        let coords: Vec<usize> = match (coverage, rng.as_mut()) {
            (Coverage::Sample { per_param, .. }, Some(rng)) if per_param < n => {
                let mut v = sample(rng, n, per_param).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = params.get(id).data()[i];
            params.get_mut(id).data_mut()[i] = orig + eps;
            let plus = loss(params);
            params.get_mut(id).data_mut()[i] = orig - eps;
            let minus = loss(params);
            params.get_mut(id).data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id).data()[i];
            let err = relative_error(a, numeric);
            report.checked += 1;
            let gap = (a - numeric).abs();
            report.max_abs_error = report.max_abs_error.max(gap);
            if gap > ROUNDOFF_REL * a.abs().max(numeric.abs()) && gap > ROUNDOFF_ABS {
                report.noisy_misses += 1;
            }
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((params.iter().nth(p).unwrap().name.clone(), i));
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{linalg, Tensor};
    use rand::Rng;

    /// 0.5·‖W·x + b‖² with W [3,4], x fixed.
    fn quadratic_setup() -> (ParamSet<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::from_fn(&[4, 3], |_| rng.gen_range(-1.0..1.0)));
        ps.push("b", Tensor::from_fn(&[3], |_| rng.gen_range(-1.0..1.0)));
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (ps, x)
    }

    fn quad_loss(ps: &ParamSet<f64>, x: &[f64]) -> (f64, Vec<f64>) {
        let mut y = ps.get(super::super::ParamId(1)).data().to_vec();
        linalg::gemm_acc(x, ps.get(super::super::ParamId(0)).data(), &mut y, 1, 4, 3);
        (0.5 * y.iter().map(|v| v * v).sum::<f64>(), y)
    }

    fn quad_grads(ps: &ParamSet<f64>, x: &[f64]) -> Gradients<f64> {
        let (_, y) = quad_loss(ps, x);
        let mut g = ps.zero_grads();
        linalg::gemm_at_acc(x, &y, g.0[0].data_mut(), 1, 4, 3);
        g.0[1].data_mut().copy_from_slice(&y);
        g
    }

    #[test]
    fn linear_layer_is_exact() {
        let (mut ps, x) = quadratic_setup();
        let g = quad_grads(&ps, &x);
        let before = ps.clone();
        let r = check_gradients(&mut ps, &g, |p| quad_loss(p, &x).0, DEFAULT_EPS);
        assert_eq!(r.checked, 15);
        assert!(r.max_rel_error < 1e-7, "{r:?}");
        assert!(r.passes_above_roundoff());
        assert_eq!(ps, before, "parameters restored");
    }

    #[test]
    fn detects_corrupted_gradient() {
        let (mut ps, x) = quadratic_setup();
        let mut g = quad_grads(&ps, &x);
        g.0[0].data_mut()[5] *= 1.1;
        let r = check_gradients(&mut ps, &g, |p| quad_loss(p, &x).0, DEFAULT_EPS);
        assert!(r.max_rel_error > 1e-2, "{r:?}");
        assert_eq!(r.worst, Some(("w".to_string(), 5)));
        assert!(!r.passes_above_roundoff());
        assert_eq!(r.noisy_misses, 1);
    }

    #[test]
    fn sampled_coverage_limits_probes() {
        let (mut ps, x) = quadratic_setup();
        let g = quad_grads(&ps, &x);
        let r = check_gradients_with(
            &mut ps,
            &g,
            |p| quad_loss(p, &x).0,
            DEFAULT_EPS,
            Coverage::Sample { per_param: 2, seed: 1 },
        );
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }
}
