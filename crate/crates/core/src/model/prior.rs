//! Prior densities on the unconstrained scale, Jacobians included.

use std::f64::consts::{LN_2, PI};

use super::transform::{logistic, softplus};

pub const COEF_SD: f64 = 3.0;
pub const SCALE_SD: f64 = 3.0;
pub const LENGTH_SHAPE: f64 = 5.0;
pub const LENGTH_RATE: f64 = 5.0;

fn ln_sqrt_2pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}

/// `log N(x; 0, sd)` and its derivative.
pub fn normal(x: f64, sd: f64) -> (f64, f64) {
    (-0.5 * (x / sd).powi(2) - sd.ln() - ln_sqrt_2pi(), -x / (sd * sd))
}

/// Half-normal on `σ = exp(u)`, plus `log |dσ/du| = u`.
pub fn half_normal_log(u: f64, sd: f64) -> (f64, f64) {
    let sigma = u.exp();
    let (lp, _) = normal(sigma, sd);
    (LN_2 + lp + u, 1.0 - sigma * sigma / (sd * sd))
}

/// Inverse-gamma on `ℓ = exp(u)`, plus the log Jacobian.
pub fn inv_gamma_log(u: f64, shape: f64, rate: f64) -> (f64, f64) {
    let c = shape * rate.ln() - statrs::function::gamma::ln_gamma(shape);
    let inv = (-u).exp();
    (c - shape * u - rate * inv, -shape + rate * inv)
}

/// Uniform(0, 1) on `p = logistic(u)`: only the Jacobian remains.
pub fn uniform_logit(u: f64) -> (f64, f64) {
    (-softplus(-u) - softplus(u), 1.0 - 2.0 * logistic(u))
}

/// Standard deviation of each free coordinate of a zero-sum block of size `n`.
pub fn zero_sum_sd(n: usize) -> f64 {
    (n as f64 / (n as f64 - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives() {
        for &u in &[-1.3, 0.0, 0.4, 2.0] {
            assert!((half_normal_log(u, 3.0).1 - fd(|v| half_normal_log(v, 3.0).0, u)).abs() < 1e-7);
            assert!((inv_gamma_log(u, 5.0, 5.0).1 - fd(|v| inv_gamma_log(v, 5.0, 5.0).0, u)).abs() < 1e-6);
            assert!((uniform_logit(u).1 - fd(|v| uniform_logit(v).0, u)).abs() < 1e-7);
            assert!((normal(u, 3.0).1 - fd(|v| normal(v, 3.0).0, u)).abs() < 1e-8);
        }
    }

    #[test]
    fn closed_forms() {
        // doubling from 0 to 3 under N(0, 3)
        assert!((normal(3.0, 3.0).0 - normal(0.0, 3.0).0 + 0.5).abs() < 1e-15);
        // InvGamma(5,5) density at 1: 5^5/24 · e^-5
        let direct = (5f64.powi(5) / 24.0 * (-5f64).exp()).ln();
        assert!((inv_gamma_log(0.0, 5.0, 5.0).0 - direct).abs() < 1e-12);
        assert!((uniform_logit(0.0).0 - 0.25f64.ln()).abs() < 1e-15);
        let hn = (2.0 / (3.0 * (2.0 * PI).sqrt())).ln();
        assert!((half_normal_log(0.0, 3.0).0 - (hn - 1.0 / 18.0)).abs() < 1e-15);
        // the Jacobian makes the transformed density integrate to 1
        let mut total = 0.0;
        let step = 1e-3;
        let mut u = -12.0;
        while u < 12.0 {
            total += uniform_logit(u).0.exp() * step;
            u += step;
        }
        assert!((total - 1.0).abs() < 1e-4);
    }
}
