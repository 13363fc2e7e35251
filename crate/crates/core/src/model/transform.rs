//! Scalar link functions and the zero-sum isometry.

use crate::ModelError;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - p)` for probabilities.
pub fn log1m(p: f64) -> f64 {
    (-p).ln_1p()
}

pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Maps `raw` (length `N-1`) onto the zero-sum hyperplane in `R^N`.
///
/// The map is linear with orthonormal columns (an isometric log-ratio
/// style basis), so `‖out‖ = ‖raw‖` and the output sums to zero.
pub fn sum_to_zero_transform(raw: &[f64]) -> Result<Vec<f64>, ModelError> {
    if raw.is_empty() {
        return Err(ModelError::Contract(
            "sum-to-zero vectors need at least 2 elements".into(),
        ));
    }
    let mut out = vec![0.0; raw.len() + 1];
    sum_to_zero_into(raw, &mut out);
    Ok(out)
}

/// `out.len() == raw.len() + 1`; an empty `raw` yields `[0.0]`.
pub(crate) fn sum_to_zero_into(raw: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), raw.len() + 1);
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut sum_w = 0.0;
    for i in (1..=raw.len()).rev() {
        let n = i as f64;
        let w = raw[i - 1] / (n * (n + 1.0)).sqrt();
        sum_w += w;
        out[i - 1] += sum_w;
        out[i] -= w * n;
    }
}

/// Adds `Hᵀ · adj` to `out`, where `H` is the matrix of [`sum_to_zero_into`].
pub(crate) fn sum_to_zero_transpose_add(adj: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len() + 1, adj.len());
    let mut prefix = 0.0;
    for m in 1..adj.len() {
        prefix += adj[m - 1];
        let mf = m as f64;
        out[m - 1] += (prefix - mf * adj[m]) / (mf * (mf + 1.0)).sqrt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(sum_to_zero_transform(&[0.0; 4]).unwrap(), vec![0.0; 5]);
        assert!(sum_to_zero_transform(&[]).is_err());
    }

    proptest! {
        #[test]
        fn sums_to_zero_and_isometric(raw in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let out = sum_to_zero_transform(&raw).unwrap();
            prop_assert!(out.iter().sum::<f64>().abs() <= 1e-12);
            let n_in: f64 = raw.iter().map(|v| v * v).sum();
            let n_out: f64 = out.iter().map(|v| v * v).sum();
            prop_assert!((n_in - n_out).abs() <= 1e-10 * (1.0 + n_in));
        }

        #[test]
        fn transpose_is_adjoint(raw in prop::collection::vec(-3.0f64..3.0, 1..20), seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let adj: Vec<f64> = (0..=raw.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let out = sum_to_zero_transform(&raw).unwrap();
            let lhs: f64 = out.iter().zip(&adj).map(|(a, b)| a * b).sum();
            let mut back = vec![0.0; raw.len()];
            sum_to_zero_transpose_add(&adj, &mut back);
            let rhs: f64 = raw.iter().zip(&back).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_base_gives_unit_marginal_variance() {
        let n = 10usize;
        let scale = (n as f64 / (n as f64 - 1.0)).sqrt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut sum = vec![0.0; n];
        let mut sum2 = vec![0.0; n];
        let mut raw = vec![0.0; n - 1];
        let mut out = vec![0.0; n];
        for _ in 0..draws {
            for r in raw.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *r = scale * z;
            }
            sum_to_zero_into(&raw, &mut out);
            for i in 0..n {
                sum[i] += out[i];
                sum2[i] += out[i] * out[i];
            }
        }
        for i in 0..n {
            let mean = sum[i] / draws as f64;
            let sd = (sum2[i] / draws as f64 - mean * mean).sqrt();
            assert!((0.98..=1.02).contains(&sd), "component {i}: sd {sd}");
        }
    }

    #[test]
    fn stable_links() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) == 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
        assert!((log_sum_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(f64::NEG_INFINITY, -3.0), -3.0);
        assert!((logit(logistic(1.3)) - 1.3).abs() < 1e-12);
    }
}
