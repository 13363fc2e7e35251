use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::transform::{logistic, logit};
use crate::gp::PHENOLOGY_PERIOD;
use crate::ModelError;

pub const N_WEEKS: usize = PHENOLOGY_PERIOD as usize;

/// Sizes of every variable-length block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_sites: usize,
    pub n_years: usize,
    pub n_observers: usize,
    pub n_covariates: usize,
    /// Retained spline weights per surface.
    pub n_weights: usize,
}

/// Unconstrained length of a zero-sum block with `n` constrained elements.
pub(crate) fn zero_sum_len(n: usize) -> usize {
    n.saturating_sub(1)
}

/// Positions of every parameter block in the flat unconstrained vector.
///
/// Scales and length scales are stored as logs and the spatial signal as a
/// logit. Zero-sum blocks hold `N - 1` free coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub dims: ModelDims,
    pub zero_sum_gp: bool,
    pub beta0_p: usize,
    pub beta_p: Range<usize>,
    pub log_sigma_obs: usize,
    pub b_obs_raw: Range<usize>,
    pub log_sigma_phen: usize,
    pub log_ell_phen: usize,
    pub z_phen_raw: Range<usize>,
    pub beta0_psi: usize,
    pub beta_psi: Range<usize>,
    pub beta_delta: usize,
    pub log_sigma_delta_gp: usize,
    pub log_ell_delta: usize,
    pub z_delta_raw: Range<usize>,
    pub log_sigma_delta_iid: usize,
    pub delta_iid_raw: Range<usize>,
    pub logit_p_mix: usize,
    pub log_sigma_space: usize,
    pub z_unstr_raw: Range<usize>,
    pub log_sigma_w: usize,
    pub log_ell_w: usize,
    pub z_w_raw: Range<usize>,
    pub log_sigma_v: usize,
    pub log_ell_v: usize,
    pub z_v_raw: Range<usize>,
    pub dim: usize,
}

struct Cursor(usize);

impl Cursor {
    fn one(&mut self) -> usize {
        self.0 += 1;
        self.0 - 1
    }

    fn many(&mut self, n: usize) -> Range<usize> {
        self.0 += n;
        self.0 - n..self.0
    }
}

impl ParamLayout {
    pub fn new(dims: ModelDims, zero_sum_gp: bool) -> Self {
        let gp_len = |n: usize| if zero_sum_gp { zero_sum_len(n) } else { n };
        let mut c = Cursor(0);
        Self {
            dims,
            zero_sum_gp,
            beta0_p: c.one(),
            beta_p: c.many(2),
            log_sigma_obs: c.one(),
            b_obs_raw: c.many(zero_sum_len(dims.n_observers)),
            log_sigma_phen: c.one(),
            log_ell_phen: c.one(),
            z_phen_raw: c.many(gp_len(N_WEEKS)),
            beta0_psi: c.one(),
            beta_psi: c.many(dims.n_covariates),
            beta_delta: c.one(),
            log_sigma_delta_gp: c.one(),
            log_ell_delta: c.one(),
            z_delta_raw: c.many(gp_len(dims.n_years)),
            log_sigma_delta_iid: c.one(),
            delta_iid_raw: c.many(zero_sum_len(dims.n_years)),
            logit_p_mix: c.one(),
            log_sigma_space: c.one(),
            z_unstr_raw: c.many(zero_sum_len(dims.n_sites)),
            log_sigma_w: c.one(),
            log_ell_w: c.one(),
            z_w_raw: c.many(gp_len(dims.n_weights)),
            log_sigma_v: c.one(),
            log_ell_v: c.one(),
            z_v_raw: c.many(gp_len(dims.n_weights)),
            dim: c.0,
        }
    }

    /// Column names of the unconstrained vector (1-based block indices).
    pub fn names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.dim];
        let mut one = |i: usize, n: &str| names[i] = n.to_string();
        one(self.beta0_p, "beta0_p");
        one(self.beta_p.start, "beta_p[L2_3]");
        one(self.beta_p.start + 1, "beta_p[L4plus]");
        one(self.log_sigma_obs, "log_sigma_obs");
        one(self.log_sigma_phen, "log_sigma_phen");
        one(self.log_ell_phen, "log_ell_phen");
        one(self.beta0_psi, "beta0_psi");
        one(self.beta_delta, "beta_delta");
        one(self.log_sigma_delta_gp, "log_sigma_delta_gp");
        one(self.log_ell_delta, "log_ell_delta");
        one(self.log_sigma_delta_iid, "log_sigma_delta_iid");
        one(self.logit_p_mix, "logit_p_mix");
        one(self.log_sigma_space, "log_sigma_space");
        one(self.log_sigma_w, "log_sigma_w");
        one(self.log_ell_w, "log_ell_w");
        one(self.log_sigma_v, "log_sigma_v");
        one(self.log_ell_v, "log_ell_v");
        for (range, base) in [
            (&self.b_obs_raw, "b_obs_raw"),
            (&self.z_phen_raw, "z_phen_raw"),
            (&self.beta_psi, "beta_psi"),
            (&self.z_delta_raw, "z_delta_raw"),
            (&self.delta_iid_raw, "delta_iid_raw"),
            (&self.z_unstr_raw, "z_unstr_raw"),
            (&self.z_w_raw, "z_w_raw"),
            (&self.z_v_raw, "z_v_raw"),
        ] {
            for (k, i) in range.clone().enumerate() {
                names[i] = format!("{base}[{}]", k + 1);
            }
        }
        names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| n == name)
    }
}

/// All model parameters on their natural (constrained) scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub beta0_p: f64,
    /// `[L2_3, L4plus]` relative to single-species lists.
    pub beta_p: [f64; 2],
    pub sigma_obs: f64,
    pub b_obs_raw: Vec<f64>,
    pub sigma_phen: f64,
    pub ell_phen: f64,
    pub z_phen_raw: Vec<f64>,
    pub beta0_psi: f64,
    pub beta_psi: Vec<f64>,
    pub beta_delta: f64,
    pub sigma_delta_gp: f64,
    pub ell_delta: f64,
    pub z_delta_raw: Vec<f64>,
    pub sigma_delta_iid: f64,
    pub delta_iid_raw: Vec<f64>,
    pub p_mix: f64,
    pub sigma_space: f64,
    pub z_unstr_raw: Vec<f64>,
    pub sigma_w: f64,
    pub ell_w: f64,
    pub z_w_raw: Vec<f64>,
    pub sigma_v: f64,
    pub ell_v: f64,
    pub z_v_raw: Vec<f64>,
}

impl ModelState {
    /// Every coefficient and raw block at zero, unit scales and length
    /// scales, `p_mix = 0.5`.
    pub fn neutral(layout: &ParamLayout) -> Self {
        Self::from_unconstrained(layout, &vec![0.0; layout.dim]).expect("dimension matches")
    }

    pub fn from_unconstrained(layout: &ParamLayout, x: &[f64]) -> Result<Self, ModelError> {
        if x.len() != layout.dim {
            return Err(ModelError::Dimension {
                expected: layout.dim,
                got: x.len(),
            });
        }
        let v = |r: &Range<usize>| x[r.clone()].to_vec();
        Ok(Self {
            beta0_p: x[layout.beta0_p],
            beta_p: [x[layout.beta_p.start], x[layout.beta_p.start + 1]],
            sigma_obs: x[layout.log_sigma_obs].exp(),
            b_obs_raw: v(&layout.b_obs_raw),
            sigma_phen: x[layout.log_sigma_phen].exp(),
            ell_phen: x[layout.log_ell_phen].exp(),
            z_phen_raw: v(&layout.z_phen_raw),
            beta0_psi: x[layout.beta0_psi],
            beta_psi: v(&layout.beta_psi),
            beta_delta: x[layout.beta_delta],
            sigma_delta_gp: x[layout.log_sigma_delta_gp].exp(),
            ell_delta: x[layout.log_ell_delta].exp(),
            z_delta_raw: v(&layout.z_delta_raw),
            sigma_delta_iid: x[layout.log_sigma_delta_iid].exp(),
            delta_iid_raw: v(&layout.delta_iid_raw),
            p_mix: logistic(x[layout.logit_p_mix]),
            sigma_space: x[layout.log_sigma_space].exp(),
            z_unstr_raw: v(&layout.z_unstr_raw),
            sigma_w: x[layout.log_sigma_w].exp(),
            ell_w: x[layout.log_ell_w].exp(),
            z_w_raw: v(&layout.z_w_raw),
            sigma_v: x[layout.log_sigma_v].exp(),
            ell_v: x[layout.log_ell_v].exp(),
            z_v_raw: v(&layout.z_v_raw),
        })
    }

    pub fn to_unconstrained(&self, layout: &ParamLayout) -> Result<Vec<f64>, ModelError> {
        let mut x = vec![0.0; layout.dim];
        let blocks: [(&Range<usize>, &[f64], &str); 8] = [
            (&layout.b_obs_raw, &self.b_obs_raw, "b_obs_raw"),
            (&layout.z_phen_raw, &self.z_phen_raw, "z_phen_raw"),
            (&layout.beta_psi, &self.beta_psi, "beta_psi"),
            (&layout.z_delta_raw, &self.z_delta_raw, "z_delta_raw"),
            (&layout.delta_iid_raw, &self.delta_iid_raw, "delta_iid_raw"),
            (&layout.z_unstr_raw, &self.z_unstr_raw, "z_unstr_raw"),
            (&layout.z_w_raw, &self.z_w_raw, "z_w_raw"),
            (&layout.z_v_raw, &self.z_v_raw, "z_v_raw"),
        ];
        for (range, values, name) in blocks {
            if range.len() != values.len() {
                return Err(ModelError::Contract(format!(
                    "{name} has {} values, layout expects {}",
                    values.len(),
                    range.len()
                )));
            }
            x[range.clone()].copy_from_slice(values);
        }
        let positive = [
            (layout.log_sigma_obs, self.sigma_obs),
            (layout.log_sigma_phen, self.sigma_phen),
            (layout.log_ell_phen, self.ell_phen),
            (layout.log_sigma_delta_gp, self.sigma_delta_gp),
            (layout.log_ell_delta, self.ell_delta),
            (layout.log_sigma_delta_iid, self.sigma_delta_iid),
            (layout.log_sigma_space, self.sigma_space),
            (layout.log_sigma_w, self.sigma_w),
            (layout.log_ell_w, self.ell_w),
            (layout.log_sigma_v, self.sigma_v),
            (layout.log_ell_v, self.ell_v),
        ];
        for (i, v) in positive {
            if !(v > 0.0) {
                return Err(ModelError::Contract(format!(
                    "scale parameter at index {i} must be positive, got {v}"
                )));
            }
            x[i] = v.ln();
        }
        if !(self.p_mix > 0.0 && self.p_mix < 1.0) {
            return Err(ModelError::Contract(format!(
                "p_mix must lie in (0, 1), got {}",
                self.p_mix
            )));
        }
        x[layout.beta0_p] = self.beta0_p;
        x[layout.beta_p.start] = self.beta_p[0];
        x[layout.beta_p.start + 1] = self.beta_p[1];
        x[layout.beta0_psi] = self.beta0_psi;
        x[layout.beta_delta] = self.beta_delta;
        x[layout.logit_p_mix] = logit(self.p_mix);
        Ok(x)
    }
}
