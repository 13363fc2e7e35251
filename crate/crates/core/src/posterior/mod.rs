//! Biological summaries of a fitted model: occupancy maps, distributional
//! trends, phenology, observer heterogeneity and covariate effects.
//!
//! A [`Posterior`] evaluates the latent fields once per draw and every summary
//! reads from that cache.

pub mod output;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{CovariateKind, ListLengthClass, SiteTable};
use crate::model::{logistic, ModelState, OccupancyModel, N_WEEKS};
use crate::sampler::{quantile_sorted, PosteriorDraws};
use crate::PosteriorError;

/// Quantiles reported for occupancy maps.
pub const MAP_PROBS: [f64; 7] = [0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975];
pub const MAP_LABELS: [&str; 7] = ["q025", "q10", "q25", "q50", "q75", "q90", "q975"];

/// Quantiles bounding the 99, 95, 80 and 50% central intervals plus the median.
pub const INTERVAL_PROBS: [f64; 9] = [0.005, 0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975, 0.995];
pub const INTERVAL_LABELS: [&str; 9] = [
    "q005", "q025", "q10", "q25", "q50", "q75", "q90", "q975", "q995",
];

/// Number of points in the default covariate sweep.
pub const EFFECT_GRID_POINTS: usize = 25;

/// Mean, sd and quantiles of one scalar across draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<f64>,
}

impl Summary {
    /// True when the quantiles are non-decreasing, which is what makes the
    /// central intervals nested.
    pub fn is_nested(&self) -> bool {
        self.quantiles.windows(2).all(|w| w[0] <= w[1])
    }

    /// Every reported value lies in `[0, 1]`.
    pub fn is_probability(&self) -> bool {
        std::iter::once(self.mean)
            .chain(self.quantiles.iter().copied())
            .all(|v| (0.0..=1.0).contains(&v))
    }
}

/// Type-7 summary of `values` at the given probabilities.
pub fn summarize(values: &[f64], probs: &[f64]) -> Summary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        mean,
        sd,
        quantiles: probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect(),
    }
}

/// Fraction of values strictly above zero.
pub fn positive_fraction(values: &[f64]) -> f64 {
    values.iter().filter(|&&v| v > 0.0).count() as f64 / values.len() as f64
}

/// The average cell's covariates after setting class `k` to `v`.
///
/// Compositional classes other than `k` are scaled by `(1 - v) / (1 - x̄_k)`
/// so the land-cover fractions keep their total; continuous covariates stay
/// at their means. A continuous `k` is a plain sweep.
pub fn rescale_composition(
    means: &[f64],
    kinds: &[CovariateKind],
    names: &[String],
    k: usize,
    v: f64,
) -> Result<Vec<f64>, PosteriorError> {
    if k >= means.len() {
        return Err(PosteriorError::Contract(format!(
            "covariate index {k} out of range ({} covariates)",
            means.len()
        )));
    }
    let mut x = means.to_vec();
    x[k] = v;
    if kinds[k] == CovariateKind::Compositional {
        let rest = 1.0 - means[k];
        if rest.abs() < 1e-12 {
            return Err(PosteriorError::DegenerateComposition(names[k].clone()));
        }
        let factor = (1.0 - v) / rest;
        for j in 0..x.len() {
            if j != k && kinds[j] == CovariateKind::Compositional {
                x[j] = means[j] * factor;
            }
        }
    }
    Ok(x)
}

/// `n` evenly spaced values on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// How the fraction of occupied cells is computed per draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum TrendMode {
    /// Mean of `ψ` over the subset.
    Expected,
    /// Mean of `z` drawn from its posterior given the data: `z = 1` where
    /// presence is confirmed, otherwise Bernoulli with `ψ` updated by the
    /// non-detections of the cell.
    Realized { seed: u64 },
}

impl Default for TrendMode {
    fn default() -> Self {
        Self::Expected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSummary {
    pub site: usize,
    pub summary: Summary,
}

/// Fraction of occupied cells over a site subset, per year.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendSeries {
    pub region: String,
    pub years: Vec<i32>,
    /// Summaries at [`INTERVAL_PROBS`].
    pub summaries: Vec<Summary>,
    /// Per year, the value of every draw.
    pub draws: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhenologyCurve {
    /// Weeks 1..=53, summaries at [`INTERVAL_PROBS`].
    pub weeks: Vec<Summary>,
    /// Argmax of the posterior-mean curve, earliest on ties.
    pub peak_week: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDetection {
    pub observer: String,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDetection {
    pub class: ListLengthClass,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectPoint {
    /// Scaled covariate value in `[0, 1]`.
    pub value: f64,
    pub original_value: f64,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateEffect {
    pub covariate: String,
    pub kind: CovariateKind,
    pub points: Vec<EffectPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub site: usize,
    pub mean: f64,
    pub sd: f64,
    /// `P(ς_s > 0)`
    pub p_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSupport {
    pub covariate: String,
    /// Posterior probability of a positive coefficient.
    pub p_positive: f64,
}

/// Latent fields of one draw that the summaries need.
#[derive(Debug, Clone)]
struct DrawFields {
    state: ModelState,
    b_obs: Vec<f64>,
    f_phen: Vec<f64>,
    /// `X_s β + υ_s`
    site_base: Vec<f64>,
    delta: Vec<f64>,
    varsigma: Vec<f64>,
}

impl DrawFields {
    fn occupancy_logit(&self, t_star: &[f64], site: usize, year: usize) -> f64 {
        self.state.beta0_psi + self.site_base[site] + self.delta[year] + self.varsigma[site] * t_star[year]
    }

    fn detection_logit(&self, observer: usize, week: usize, class: usize) -> f64 {
        let mut eta = self.state.beta0_p + self.b_obs[observer] + self.f_phen[week - 1];
        if class > 0 {
            eta += self.state.beta_p[class - 1];
        }
        eta
    }
}

/// Posterior draws paired with the model and site data they came from.
pub struct Posterior<'a> {
    model: &'a OccupancyModel,
    sites: &'a SiteTable,
    fields: Vec<DrawFields>,
}

impl<'a> Posterior<'a> {
    /// Evaluates the latent fields of every draw, chain-major.
    pub fn from_draws(
        model: &'a OccupancyModel,
        sites: &'a SiteTable,
        draws: &PosteriorDraws,
    ) -> Result<Self, PosteriorError> {
        if draws.dim() != model.layout().dim {
            return Err(PosteriorError::Contract(format!(
                "draws have {} parameters, model expects {}",
                draws.dim(),
                model.layout().dim
            )));
        }
        let positions: Vec<&[f64]> = draws.iter_draws().collect();
        Self::build(model, sites, &positions)
    }

    /// From unconstrained positions.
    pub fn from_positions(
        model: &'a OccupancyModel,
        sites: &'a SiteTable,
        positions: &[Vec<f64>],
    ) -> Result<Self, PosteriorError> {
        let refs: Vec<&[f64]> = positions.iter().map(|p| p.as_slice()).collect();
        Self::build(model, sites, &refs)
    }

    /// From constrained states, mainly for hand-built fixtures.
    pub fn from_states(
        model: &'a OccupancyModel,
        sites: &'a SiteTable,
        states: &[ModelState],
    ) -> Result<Self, PosteriorError> {
        let positions = states
            .iter()
            .map(|s| s.to_unconstrained(model.layout()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_positions(model, sites, &positions)
    }

    fn build(
        model: &'a OccupancyModel,
        sites: &'a SiteTable,
        positions: &[&[f64]],
    ) -> Result<Self, PosteriorError> {
        let dims = model.dims();
        if sites.n_sites() != dims.n_sites || sites.n_covariates() != dims.n_covariates {
            return Err(PosteriorError::Contract(
                "site table does not match the model".into(),
            ));
        }
        if positions.is_empty() {
            return Err(PosteriorError::Contract("no draws".into()));
        }
        let eval = |x: &[f64]| -> Result<DrawFields, PosteriorError> {
            let c = model.components(x)?;
            Ok(DrawFields {
                site_base: c.x_beta.iter().zip(&c.upsilon).map(|(a, b)| a + b).collect(),
                state: c.state,
                b_obs: c.b_obs,
                f_phen: c.f_phen,
                delta: c.delta,
                varsigma: c.varsigma,
            })
        };
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let chunk = positions.len().div_ceil(threads);
        let fields = std::thread::scope(|scope| {
            let handles: Vec<_> = positions
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|x| eval(x)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("posterior worker panicked"))
                .collect::<Result<Vec<_>, _>>()
        })?;
        Ok(Self { model, sites, fields })
    }

    pub fn n_draws(&self) -> usize {
        self.fields.len()
    }

    pub fn model(&self) -> &OccupancyModel {
        self.model
    }

    pub fn sites(&self) -> &SiteTable {
        self.sites
    }

    pub fn years(&self) -> Vec<i32> {
        let first = self.model.first_year();
        (0..self.model.dims().n_years).map(|t| first + t as i32).collect()
    }

    fn year_index(&self, year: i32) -> Result<usize, PosteriorError> {
        let t = year - self.model.first_year();
        if t < 0 || t as usize >= self.model.dims().n_years {
            return Err(PosteriorError::Contract(format!("year {year} outside the study window")));
        }
        Ok(t as usize)
    }

    /// `ψ_{s,t}` summarised per site at [`MAP_PROBS`].
    pub fn occupancy_map(&self, year: i32) -> Result<Vec<SiteSummary>, PosteriorError> {
        let t = self.year_index(year)?;
        let ts = self.model.t_star();
        let mut vals = vec![0.0; self.n_draws()];
        Ok((0..self.model.dims().n_sites)
            .map(|s| {
                for (v, f) in vals.iter_mut().zip(&self.fields) {
                    *v = logistic(f.occupancy_logit(ts, s, t));
                }
                SiteSummary {
                    site: s,
                    summary: summarize(&vals, &MAP_PROBS),
                }
            })
            .collect())
    }

    /// Per-draw probability that each cell is occupied, row-major `S × T`.
    fn cell_probabilities(&self, f: &DrawFields, conditional: bool) -> Vec<f64> {
        let d = self.model.dims();
        let ts = self.model.t_star();
        let mut prob = vec![0.0; d.n_sites * d.n_years];
        for s in 0..d.n_sites {
            for t in 0..d.n_years {
                prob[s * d.n_years + t] = logistic(f.occupancy_logit(ts, s, t));
            }
        }
        if conditional {
            let idx = self.model.index();
            for cell in &idx.cells {
                let slot = cell.site * d.n_years + cell.year;
                if cell.a {
                    prob[slot] = 1.0;
                    continue;
                }
                let eta_psi = f.occupancy_logit(ts, cell.site, cell.year);
                // log odds of z = 1 given only non-detections
                let mut log_odds = eta_psi;
                for v in cell.visits.clone() {
                    let eta = f.detection_logit(
                        idx.observer[v] as usize,
                        idx.week[v] as usize + 1,
                        idx.class[v] as usize,
                    );
                    log_odds -= crate::model::softplus(eta);
                }
                prob[slot] = logistic(log_odds);
            }
        }
        prob
    }

    /// Fraction of occupied cells in `subset`, per year.
    pub fn fraction_occupied_trend(
        &self,
        region: &str,
        subset: &[usize],
        mode: TrendMode,
    ) -> Result<TrendSeries, PosteriorError> {
        let d = self.model.dims();
        if subset.is_empty() {
            return Err(PosteriorError::Contract(format!("region `{region}` has no sites")));
        }
        if let Some(&s) = subset.iter().find(|&&s| s >= d.n_sites) {
            return Err(PosteriorError::Contract(format!("site {s} out of range")));
        }
        let n = subset.len() as f64;
        let mut draws = vec![vec![0.0; self.n_draws()]; d.n_years];
        for (i, f) in self.fields.iter().enumerate() {
            let occupied: Vec<f64> = match mode {
                TrendMode::Expected => self.cell_probabilities(f, false),
                TrendMode::Realized { seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    self.cell_probabilities(f, true)
                        .into_iter()
                        .map(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                        .collect()
                }
            };
            for (t, row) in draws.iter_mut().enumerate() {
                row[i] = subset.iter().map(|&s| occupied[s * d.n_years + t]).sum::<f64>() / n;
            }
        }
        Ok(TrendSeries {
            region: region.to_string(),
            years: self.years(),
            summaries: draws.iter().map(|v| summarize(v, &INTERVAL_PROBS)).collect(),
            draws,
        })
    }

    fn detection_curve_draws(&self, week: usize, class: usize, observer_effect: bool, observer: usize) -> Vec<f64> {
        self.fields
            .iter()
            .map(|f| {
                let mut eta = f.state.beta0_p + f.f_phen[week - 1];
                if class > 0 {
                    eta += f.state.beta_p[class - 1];
                }
                if observer_effect {
                    eta += f.b_obs[observer];
                }
                logistic(eta)
            })
            .collect()
    }

    /// Weekly detection probability for a list of 4+ species and an average
    /// observer.
    pub fn phenology_curve(&self) -> PhenologyCurve {
        let class = ListLengthClass::L4Plus.index();
        let weeks: Vec<Summary> = (1..=N_WEEKS)
            .map(|w| summarize(&self.detection_curve_draws(w, class, false, 0), &INTERVAL_PROBS))
            .collect();
        let mut peak = 0;
        for (i, s) in weeks.iter().enumerate() {
            if s.mean > weeks[peak].mean {
                peak = i;
            }
        }
        PhenologyCurve {
            weeks,
            peak_week: peak + 1,
        }
    }

    /// Posterior-mean detection probability of each observer at the peak
    /// week for a list of 4+ species.
    pub fn observer_distribution(&self) -> Vec<ObserverDetection> {
        let peak = self.phenology_curve().peak_week;
        let class = ListLengthClass::L4Plus.index();
        self.model
            .observers()
            .iter()
            .enumerate()
            .map(|(o, name)| {
                let v = self.detection_curve_draws(peak, class, true, o);
                ObserverDetection {
                    observer: name.clone(),
                    mean: v.iter().sum::<f64>() / v.len() as f64,
                }
            })
            .collect()
    }

    /// Detection probability per list-length class at the peak week for an
    /// average observer.
    pub fn list_length_effect(&self) -> Vec<ClassDetection> {
        let peak = self.phenology_curve().peak_week;
        ListLengthClass::ALL
            .iter()
            .map(|&c| ClassDetection {
                class: c,
                summary: summarize(&self.detection_curve_draws(peak, c.index(), false, 0), &INTERVAL_PROBS),
            })
            .collect()
    }

    /// `ψ` of the average cell and year as covariate `k` sweeps `grid`.
    pub fn marginal_covariate_effect(&self, k: usize, grid: &[f64]) -> Result<CovariateEffect, PosteriorError> {
        let info = &self.sites.info;
        let kinds: Vec<CovariateKind> = info.iter().map(|c| c.kind).collect();
        let names: Vec<String> = info.iter().map(|c| c.name.clone()).collect();
        let means = self.sites.means();
        let mut points = Vec::with_capacity(grid.len());
        for &v in grid {
            let x = rescale_composition(&means, &kinds, &names, k, v)?;
            let vals: Vec<f64> = self
                .fields
                .iter()
                .map(|f| {
                    let eta: f64 = f.state.beta0_psi + x.iter().zip(&f.state.beta_psi).map(|(a, b)| a * b).sum::<f64>();
                    logistic(eta)
                })
                .collect();
            points.push(EffectPoint {
                value: v,
                original_value: info[k].back_transform(v),
                summary: summarize(&vals, &INTERVAL_PROBS),
            });
        }
        Ok(CovariateEffect {
            covariate: names[k].clone(),
            kind: kinds[k],
            points,
        })
    }

    /// Effect curves of every covariate on the default grid.
    pub fn all_covariate_effects(&self) -> Result<Vec<CovariateEffect>, PosteriorError> {
        let grid = unit_grid(EFFECT_GRID_POINTS);
        (0..self.sites.n_covariates())
            .map(|k| self.marginal_covariate_effect(k, &grid))
            .collect()
    }

    /// Per-site trend slope `ς_s`.
    pub fn trend_slope_map(&self) -> Vec<SlopeSummary> {
        (0..self.model.dims().n_sites)
            .map(|s| {
                let v: Vec<f64> = self.fields.iter().map(|f| f.varsigma[s]).collect();
                let sm = summarize(&v, &[]);
                SlopeSummary {
                    site: s,
                    mean: sm.mean,
                    sd: sm.sd,
                    p_positive: positive_fraction(&v),
                }
            })
            .collect()
    }

    /// `P(β_k > 0)` per occupancy covariate.
    pub fn covariate_support(&self) -> Vec<CovariateSupport> {
        self.sites
            .info
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let v: Vec<f64> = self.fields.iter().map(|f| f.state.beta_psi[k]).collect();
                CovariateSupport {
                    covariate: c.name.clone(),
                    p_positive: positive_fraction(&v),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests;
