use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::GpError;

/// Number of distinct weeks in a year; the phenology period.
pub const PHENOLOGY_PERIOD: f64 = 53.0;

fn check(sigma: f64, length_scale: f64) -> Result<(), GpError> {
    if sigma > 0.0 && length_scale > 0.0 && sigma.is_finite() && length_scale.is_finite() {
        Ok(())
    } else {
        Err(GpError::InvalidKernel { sigma, length_scale })
    }
}

/// `σ² exp(-2 sin²(π|w - w'| / 53) / ℓ²)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicKernel {
    pub sigma: f64,
    pub length_scale: f64,
}

impl PeriodicKernel {
    pub fn new(sigma: f64, length_scale: f64) -> Result<Self, GpError> {
        check(sigma, length_scale)?;
        Ok(Self { sigma, length_scale })
    }

    pub fn eval(&self, w: f64, w_prime: f64) -> f64 {
        self.sigma * self.sigma * periodic_unit(w - w_prime, self.length_scale)
    }

    pub fn gram(&self, inputs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(inputs.len(), inputs.len(), |i, j| self.eval(inputs[i], inputs[j]))
    }
}

/// Unit-variance periodic correlation at lag `d`.
pub(crate) fn periodic_unit(d: f64, length_scale: f64) -> f64 {
    let s = (PI * d.abs() / PHENOLOGY_PERIOD).sin();
    (-2.0 * s * s / (length_scale * length_scale)).exp()
}

/// Derivative of [`periodic_unit`] with respect to `log ℓ`.
pub(crate) fn periodic_unit_dlog_ell(d: f64, length_scale: f64) -> f64 {
    let s = (PI * d.abs() / PHENOLOGY_PERIOD).sin();
    let r = 2.0 * s * s / (length_scale * length_scale);
    (-r).exp() * 2.0 * r
}

/// Exponentiated quadratic, `σ² exp(-d² / (2ℓ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqExpKernel {
    pub sigma: f64,
    pub length_scale: f64,
}

impl SqExpKernel {
    pub fn new(sigma: f64, length_scale: f64) -> Result<Self, GpError> {
        check(sigma, length_scale)?;
        Ok(Self { sigma, length_scale })
    }

    pub fn eval_sq_dist(&self, d2: f64) -> f64 {
        self.sigma * self.sigma * sqexp_unit(d2, self.length_scale)
    }

    /// Works for scalars (`&[t]`) and for 2-D basis indices (`&[g, h]`).
    pub fn eval(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        self.eval_sq_dist(sq_dist(x, x_prime))
    }

    pub fn gram(&self, inputs: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(inputs.len(), inputs.len(), |i, j| self.eval(&inputs[i], &inputs[j]))
    }
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn sqexp_unit(d2: f64, length_scale: f64) -> f64 {
    (-d2 / (2.0 * length_scale * length_scale)).exp()
}

pub(crate) fn sqexp_unit_dlog_ell(d2: f64, length_scale: f64) -> f64 {
    let r = d2 / (length_scale * length_scale);
    (-0.5 * r).exp() * r
}
