use std::io::Write;

use serde::{Deserialize, Serialize};

use super::gp_block::{GpFactor, GpGeometry};
use super::layout::{ModelDims, ModelState, ParamLayout, N_WEEKS};
use super::likelihood::{cell_loglik_logit, LikelihoodIndex};
use super::prior::{
    half_normal_log, inv_gamma_log, normal, uniform_logit, zero_sum_sd, COEF_SD, LENGTH_RATE,
    LENGTH_SHAPE, SCALE_SD,
};
use super::transform::{logistic, sum_to_zero_into, sum_to_zero_transpose_add};
use crate::gp::{build_spline_surface, SplineSurface, DEFAULT_PRUNE_EPS};
use crate::ingest::{ConfirmedPresence, SiteTable, Visit};
use crate::sampler::LogDensity;
use crate::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    /// Basis functions per axis of the spline surfaces.
    pub spline_n: usize,
    pub prune_eps: f64,
    /// Also constrain the GP raw blocks to sum to zero.
    pub zero_sum_gp: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            spline_n: 20,
            prune_eps: DEFAULT_PRUNE_EPS,
            zero_sum_gp: false,
        }
    }
}

/// The joint posterior of the spatiotemporal occupancy model.
#[derive(Debug, Clone)]
pub struct OccupancyModel {
    layout: ParamLayout,
    options: ModelOptions,
    index: LikelihoodIndex,
    /// Row-major `S × K`.
    x_psi: Vec<f64>,
    t_star: Vec<f64>,
    first_year: i32,
    surface: SplineSurface,
    phen: GpGeometry,
    years: GpGeometry,
    basis: GpGeometry,
}

/// Every latent field of the linear predictors at one parameter value.
#[derive(Debug, Clone)]
pub struct Components {
    pub state: ModelState,
    /// Observer effects `σ_obs · b`, one per observer token.
    pub b_obs: Vec<f64>,
    /// Phenology effect for weeks 1..=53.
    pub f_phen: Vec<f64>,
    /// `X_s · β^ψ`
    pub x_beta: Vec<f64>,
    /// `δ_t` per year of the window.
    pub delta: Vec<f64>,
    pub u_unstr: Vec<f64>,
    pub u_str: Vec<f64>,
    /// `(1 - p) υ^unstr + p υ^str`
    pub upsilon: Vec<f64>,
    /// Site-level trend slopes `ς_s`.
    pub varsigma: Vec<f64>,
    pub t_star: Vec<f64>,
    w_field: Vec<f64>,
    v_field: Vec<f64>,
    z_phen: Vec<f64>,
    z_delta: Vec<f64>,
    z_w: Vec<f64>,
    z_v: Vec<f64>,
    delta_gp: Vec<f64>,
    delta_iid: Vec<f64>,
}

impl Components {
    /// `η` for one visit; `week` in 1..=53 and `class` is the list-length index.
    pub fn detection_logit(&self, observer: usize, week: usize, class: usize) -> f64 {
        let s = &self.state;
        let mut eta = s.beta0_p + self.b_obs[observer] + self.f_phen[week - 1];
        if class > 0 {
            eta += s.beta_p[class - 1];
        }
        eta
    }

    pub fn occupancy_logit(&self, site: usize, year: usize) -> f64 {
        self.state.beta0_psi
            + self.x_beta[site]
            + self.delta[year]
            + self.upsilon[site]
            + self.varsigma[site] * self.t_star[year]
    }
}

fn zero_sum(raw: &[f64], n: usize, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n > 0 {
        sum_to_zero_into(raw, &mut out);
        out.iter_mut().for_each(|v| *v *= scale);
    }
    out
}

fn zero_sum_back(adj: &[f64], scale: f64, g_raw: &mut [f64]) {
    if adj.len() > 1 {
        let mut tmp = vec![0.0; g_raw.len()];
        sum_to_zero_transpose_add(adj, &mut tmp);
        for (g, t) in g_raw.iter_mut().zip(tmp) {
            *g += scale * t;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Factors {
    phen: GpFactor,
    delta: GpFactor,
    w: GpFactor,
    v: GpFactor,
}

impl OccupancyModel {
    pub fn new(
        sites: &SiteTable,
        visits: &[Visit],
        presence: &ConfirmedPresence,
        options: ModelOptions,
    ) -> Result<Self, ModelError> {
        if sites.n_sites() != presence.n_sites {
            return Err(ModelError::Data(format!(
                "site table has {} sites, presence matrix {}",
                sites.n_sites(),
                presence.n_sites
            )));
        }
        if presence.n_years == 0 {
            return Err(ModelError::Data("study window has no years".into()));
        }
        let index = LikelihoodIndex::build(visits, presence)?;
        let surface = build_spline_surface(&sites.lon, &sites.lat, options.spline_n, options.prune_eps)?;
        let n_years = presence.n_years;
        let t_star: Vec<f64> = (0..n_years)
            .map(|t| {
                if n_years > 1 {
                    t as f64 / (n_years - 1) as f64 - 0.5
                } else {
                    0.0
                }
            })
            .collect();
        let year_inputs: Vec<Vec<f64>> = t_star.iter().map(|&t| vec![2.0 * t]).collect();
        let weeks: Vec<f64> = (1..=N_WEEKS).map(|w| w as f64).collect();
        let dims = ModelDims {
            n_sites: sites.n_sites(),
            n_years,
            n_observers: index.observers.len(),
            n_covariates: sites.n_covariates(),
            n_weights: surface.n_weights(),
        };
        Ok(Self {
            layout: ParamLayout::new(dims, options.zero_sum_gp),
            basis: GpGeometry::sqexp(&surface.index_coords()),
            phen: GpGeometry::periodic(&weeks),
            years: GpGeometry::sqexp(&year_inputs),
            x_psi: sites.covariates.clone(),
            t_star,
            first_year: presence.first_year,
            surface,
            index,
            options,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn dims(&self) -> ModelDims {
        self.layout.dims
    }

    pub fn options(&self) -> &ModelOptions {
        &self.options
    }

    pub fn index(&self) -> &LikelihoodIndex {
        &self.index
    }

    pub fn surface(&self) -> &SplineSurface {
        &self.surface
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn t_star(&self) -> &[f64] {
        &self.t_star
    }

    /// Observer tokens in effect order.
    pub fn observers(&self) -> &[String] {
        &self.index.observers
    }

    pub fn site_covariates(&self, site: usize) -> &[f64] {
        let k = self.layout.dims.n_covariates;
        &self.x_psi[site * k..(site + 1) * k]
    }

    fn gp_raw(&self, raw: &[f64], n: usize) -> Vec<f64> {
        if self.options.zero_sum_gp {
            zero_sum(raw, n, 1.0)
        } else {
            raw.to_vec()
        }
    }

    fn fields(&self, x: &[f64]) -> Result<(Components, Factors), ModelError> {
        let st = ModelState::from_unconstrained(&self.layout, x)?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(format!(
                "parameter `{}`",
                self.layout.names()[i]
            )));
        }
        let d = self.layout.dims;
        let b_obs = zero_sum(&st.b_obs_raw, d.n_observers, st.sigma_obs);
        let z_phen = self.gp_raw(&st.z_phen_raw, N_WEEKS);
        let phen = self.phen.factor(st.ell_phen, "phenology GP")?;
        let f_phen = self.phen.forward(&phen, st.sigma_phen, &z_phen);

        let k = d.n_covariates;
        let x_beta: Vec<f64> = (0..d.n_sites)
            .map(|s| dot(&self.x_psi[s * k..(s + 1) * k], &st.beta_psi))
            .collect();
        let z_delta = self.gp_raw(&st.z_delta_raw, d.n_years);
        let delta_f = self.years.factor(st.ell_delta, "temporal GP")?;
        let delta_gp = self.years.forward(&delta_f, st.sigma_delta_gp, &z_delta);
        let delta_iid = zero_sum(&st.delta_iid_raw, d.n_years, st.sigma_delta_iid);
        let delta: Vec<f64> = (0..d.n_years)
            .map(|t| st.beta_delta * self.t_star[t] + delta_gp[t] + delta_iid[t])
            .collect();

        let u_unstr = zero_sum(&st.z_unstr_raw, d.n_sites, st.sigma_space);
        let z_w = self.gp_raw(&st.z_w_raw, d.n_weights);
        let w = self.basis.factor(st.ell_w, "structured spatial surface")?;
        let w_field = self.basis.forward(&w, st.sigma_w, &z_w);
        let u_str = self.surface.apply(&w_field);
        let z_v = self.gp_raw(&st.z_v_raw, d.n_weights);
        let v = self.basis.factor(st.ell_v, "trend surface")?;
        let v_field = self.basis.forward(&v, st.sigma_v, &z_v);
        let varsigma = self.surface.apply(&v_field);
        let p = st.p_mix;
        let upsilon = u_unstr
            .iter()
            .zip(&u_str)
            .map(|(a, b)| (1.0 - p) * a + p * b)
            .collect();
        Ok((
            Components {
                state: st,
                b_obs,
                f_phen,
                x_beta,
                delta,
                u_unstr,
                u_str,
                upsilon,
                varsigma,
                t_star: self.t_star.clone(),
                w_field,
                v_field,
                z_phen,
                z_delta,
                z_w,
                z_v,
                delta_gp,
                delta_iid,
            },
            Factors {
                phen,
                delta: delta_f,
                w,
                v,
            },
        ))
    }

    /// Latent fields at unconstrained position `x`.
    pub fn components(&self, x: &[f64]) -> Result<Components, ModelError> {
        Ok(self.fields(x)?.0)
    }

    /// Per-cell marginal log-likelihood `(site, calendar year, value)`.
    pub fn cell_logliks(&self, x: &[f64]) -> Result<Vec<(usize, i32, f64)>, ModelError> {
        let c = self.components(x)?;
        let mut out = Vec::with_capacity(self.index.cells.len());
        let mut eta = Vec::new();
        let mut g = Vec::new();
        for cell in &self.index.cells {
            self.fill_visit_logits(&c, cell.visits.clone(), &mut eta);
            g.resize(eta.len(), 0.0);
            let (ll, _) = cell_loglik_logit(
                cell.a,
                &self.index.y[cell.visits.clone()],
                &eta,
                c.occupancy_logit(cell.site, cell.year),
                &mut g,
            );
            out.push((cell.site, self.first_year + cell.year as i32, ll));
        }
        Ok(out)
    }

    /// Debug dump of [`Self::cell_logliks`] as `site,year,loglik` CSV.
    pub fn write_cell_logliks<W: Write>(&self, x: &[f64], mut w: W) -> Result<(), ModelError> {
        let io = |e: std::io::Error| ModelError::Contract(format!("writing cell dump: {e}"));
        writeln!(w, "site,year,loglik").map_err(io)?;
        for (s, t, ll) in self.cell_logliks(x)? {
            writeln!(w, "{s},{t},{ll}").map_err(io)?;
        }
        Ok(())
    }

    fn fill_visit_logits(&self, c: &Components, visits: std::ops::Range<usize>, eta: &mut Vec<f64>) {
        eta.clear();
        for v in visits {
            eta.push(c.detection_logit(
                self.index.observer[v] as usize,
                self.index.week[v] as usize + 1,
                self.index.class[v] as usize,
            ));
        }
    }

    pub fn log_posterior(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.evaluate(x, None)
    }

    /// Log density and its gradient, written into `grad`.
    pub fn log_posterior_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, ModelError> {
        if grad.len() != self.layout.dim {
            return Err(ModelError::Dimension {
                expected: self.layout.dim,
                got: grad.len(),
            });
        }
        self.evaluate(x, Some(grad))
    }

    /// Prior plus Jacobian terms only.
    pub fn log_prior(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.layout.dim {
            return Err(ModelError::Dimension {
                expected: self.layout.dim,
                got: x.len(),
            });
        }
        Ok(log_prior(&self.layout, x, None))
    }

    fn evaluate(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> Result<f64, ModelError> {
        let (c, fac) = self.fields(x)?;
        let d = self.layout.dims;
        let l = &self.layout;
        let want = grad.is_some();

        let mut g_b = vec![0.0; d.n_observers];
        let mut g_f = vec![0.0; N_WEEKS];
        let mut g_beta0p = 0.0;
        let mut g_betap = [0.0; 2];
        let mut g_site = vec![0.0; d.n_sites];
        let mut g_slope = vec![0.0; d.n_sites];
        let mut g_delta = vec![0.0; d.n_years];

        let mut total = 0.0;
        let mut eta = Vec::new();
        let mut g_eta = Vec::new();
        for cell in &self.index.cells {
            self.fill_visit_logits(&c, cell.visits.clone(), &mut eta);
            g_eta.resize(eta.len(), 0.0);
            let eta_psi = c.occupancy_logit(cell.site, cell.year);
            let ys = &self.index.y[cell.visits.clone()];
            let (ll, g_psi) = cell_loglik_logit(cell.a, ys, &eta, eta_psi, &mut g_eta);
            if !ll.is_finite() {
                return Err(ModelError::NonFinite(format!(
                    "likelihood of site {} year {}",
                    cell.site,
                    self.first_year + cell.year as i32
                )));
            }
            total += ll;
            if !want {
                continue;
            }
            for (k, v) in cell.visits.clone().enumerate() {
                let g = g_eta[k];
                g_beta0p += g;
                let class = self.index.class[v] as usize;
                if class > 0 {
                    g_betap[class - 1] += g;
                }
                g_b[self.index.observer[v] as usize] += g;
                g_f[self.index.week[v] as usize] += g;
            }
            g_site[cell.site] += g_psi;
            g_slope[cell.site] += g_psi * self.t_star[cell.year];
            g_delta[cell.year] += g_psi;
        }

        let prior = log_prior(l, x, grad.as_deref_mut());
        if !prior.is_finite() {
            return Err(ModelError::NonFinite("prior".into()));
        }
        total += prior;

        let Some(grad) = grad else {
            return Ok(total);
        };
        let st = &c.state;

        // detection
        grad[l.beta0_p] += g_beta0p;
        grad[l.beta_p.start] += g_betap[0];
        grad[l.beta_p.start + 1] += g_betap[1];
        grad[l.log_sigma_obs] += dot(&g_b, &c.b_obs);
        zero_sum_back(&g_b, st.sigma_obs, &mut grad[l.b_obs_raw.clone()]);
        self.gp_back(
            &self.phen,
            &fac.phen,
            st.sigma_phen,
            &c.z_phen,
            &c.f_phen,
            &g_f,
            (l.log_sigma_phen, l.log_ell_phen, l.z_phen_raw.clone()),
            grad,
        );

        // occupancy: fixed effects and time
        grad[l.beta0_psi] += g_site.iter().sum::<f64>();
        let k = d.n_covariates;
        for (s, &g) in g_site.iter().enumerate() {
            for j in 0..k {
                grad[l.beta_psi.start + j] += g * self.x_psi[s * k + j];
            }
        }
        grad[l.beta_delta] += dot(&g_delta, &self.t_star);
        self.gp_back(
            &self.years,
            &fac.delta,
            st.sigma_delta_gp,
            &c.z_delta,
            &c.delta_gp,
            &g_delta,
            (l.log_sigma_delta_gp, l.log_ell_delta, l.z_delta_raw.clone()),
            grad,
        );
        grad[l.log_sigma_delta_iid] += dot(&g_delta, &c.delta_iid);
        zero_sum_back(&g_delta, st.sigma_delta_iid, &mut grad[l.delta_iid_raw.clone()]);

        // space
        let p = st.p_mix;
        let g_p: f64 = g_site
            .iter()
            .zip(c.u_str.iter().zip(&c.u_unstr))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        grad[l.logit_p_mix] += p * (1.0 - p) * g_p;
        let g_unstr: Vec<f64> = g_site.iter().map(|g| (1.0 - p) * g).collect();
        grad[l.log_sigma_space] += dot(&g_unstr, &c.u_unstr);
        zero_sum_back(&g_unstr, st.sigma_space, &mut grad[l.z_unstr_raw.clone()]);
        let g_str: Vec<f64> = g_site.iter().map(|g| p * g).collect();
        let mut g_w = vec![0.0; d.n_weights];
        self.surface.apply_transpose_into(&g_str, &mut g_w);
        self.gp_back(
            &self.basis,
            &fac.w,
            st.sigma_w,
            &c.z_w,
            &c.w_field,
            &g_w,
            (l.log_sigma_w, l.log_ell_w, l.z_w_raw.clone()),
            grad,
        );
        let mut g_v = vec![0.0; d.n_weights];
        self.surface.apply_transpose_into(&g_slope, &mut g_v);
        self.gp_back(
            &self.basis,
            &fac.v,
            st.sigma_v,
            &c.z_v,
            &c.v_field,
            &g_v,
            (l.log_sigma_v, l.log_ell_v, l.z_v_raw.clone()),
            grad,
        );
        Ok(total)
    }

    #[allow(clippy::too_many_arguments)]
    fn gp_back(
        &self,
        geom: &GpGeometry,
        fac: &GpFactor,
        sigma: f64,
        z: &[f64],
        field: &[f64],
        fbar: &[f64],
        slots: (usize, usize, std::ops::Range<usize>),
        grad: &mut [f64],
    ) {
        let mut gz = vec![0.0; z.len()];
        let (gs, gl) = geom.backward(fac, sigma, z, field, fbar, &mut gz);
        grad[slots.0] += gs;
        grad[slots.1] += gl;
        if self.options.zero_sum_gp {
            zero_sum_back(&gz, 1.0, &mut grad[slots.2]);
        } else {
            for (g, v) in grad[slots.2].iter_mut().zip(gz) {
                *g += v;
            }
        }
    }
}

/// Sum of all prior log densities and unconstraining Jacobians at `x`,
/// adding the gradient into `grad` when given.
pub fn log_prior(l: &ParamLayout, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
    let mut total = 0.0;
    let mut add = |i: usize, (lp, g): (f64, f64), grad: &mut Option<&mut [f64]>| {
        total += lp;
        if let Some(gr) = grad.as_deref_mut() {
            gr[i] += g;
        }
    };
    let mut coefs = vec![l.beta0_p, l.beta0_psi, l.beta_delta];
    coefs.extend(l.beta_p.clone());
    coefs.extend(l.beta_psi.clone());
    for i in coefs {
        add(i, normal(x[i], COEF_SD), &mut grad);
    }
    for i in [
        l.log_sigma_obs,
        l.log_sigma_phen,
        l.log_sigma_delta_gp,
        l.log_sigma_delta_iid,
        l.log_sigma_space,
        l.log_sigma_w,
        l.log_sigma_v,
    ] {
        add(i, half_normal_log(x[i], SCALE_SD), &mut grad);
    }
    for i in [l.log_ell_phen, l.log_ell_delta, l.log_ell_w, l.log_ell_v] {
        add(i, inv_gamma_log(x[i], LENGTH_SHAPE, LENGTH_RATE), &mut grad);
    }
    add(l.logit_p_mix, uniform_logit(x[l.logit_p_mix]), &mut grad);
    let d = l.dims;
    let gp_sd = |n: usize| if l.zero_sum_gp { zero_sum_sd(n) } else { 1.0 };
    let blocks = [
        (l.b_obs_raw.clone(), zero_sum_sd(d.n_observers)),
        (l.delta_iid_raw.clone(), zero_sum_sd(d.n_years)),
        (l.z_unstr_raw.clone(), zero_sum_sd(d.n_sites)),
        (l.z_phen_raw.clone(), gp_sd(N_WEEKS)),
        (l.z_delta_raw.clone(), gp_sd(d.n_years)),
        (l.z_w_raw.clone(), gp_sd(d.n_weights)),
        (l.z_v_raw.clone(), gp_sd(d.n_weights)),
    ];
    for (range, sd) in blocks {
        for i in range {
            add(i, normal(x[i], sd), &mut grad);
        }
    }
    total
}

impl LogDensity for OccupancyModel {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, ModelError> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.log_posterior_grad(x, grad)
    }

    fn param_names(&self) -> Vec<String> {
        self.layout.names()
    }
}

/// `logistic` of every detection and occupancy predictor, for tests and
/// summaries that want the probability scale.
pub fn probabilities(model: &OccupancyModel, c: &Components) -> (Vec<f64>, Vec<f64>) {
    let idx = model.index();
    let p: Vec<f64> = (0..idx.n_visits())
        .map(|v| {
            logistic(c.detection_logit(
                idx.observer[v] as usize,
                idx.week[v] as usize + 1,
                idx.class[v] as usize,
            ))
        })
        .collect();
    let psi = idx
        .cells
        .iter()
        .map(|cell| logistic(c.occupancy_logit(cell.site, cell.year)))
        .collect();
    (p, psi)
}
