//! Synthetic data from known parameters, a brute-force likelihood oracle and
//! a parameter-recovery harness.
//!
//! Simulated data come out both as model inputs and as a raw sightings
//! table, so a synthetic dataset can go through the whole pipeline.

mod recovery;

pub use recovery::{recovery_experiment, recovery_report, Recovery, RecoveryReport, RecoveryRow};

use std::collections::HashSet;

use chrono::{Datelike, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ingest::{
    observer_token, week_of_year, ConfirmedPresence, CovariateInfo, GridSpec, ListLengthClass, Sighting,
    SiteTable, Visit,
};
use crate::model::{logistic, ModelOptions, ModelState, OccupancyModel};
use crate::SimError;

/// Largest cell the brute-force oracle will enumerate.
pub const BRUTE_FORCE_MAX_VISITS: usize = 20;

/// How visits are spread over sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Allocation {
    /// Every site equally likely.
    Uniform,
    /// Site weights `exp(σ·N(0,1))`, mimicking uneven opportunistic effort.
    LogNormal { sigma: f64 },
}

/// Dimensions and effort of a synthetic study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDesign {
    pub grid: GridSpec,
    pub first_year: i32,
    pub n_years: usize,
    pub n_observers: usize,
    /// Total number of visits.
    pub n_visits: usize,
    /// Uniform(0, 1) site covariates named `cov1`, `cov2`, ...
    pub n_covariates: usize,
    pub allocation: Allocation,
    /// Probabilities of the L1, L2_3 and L4plus list-length classes.
    pub list_length_probs: [f64; 3],
    pub spline_n: usize,
    pub focal_species: String,
    /// Size of the pool of non-focal species used to pad lists.
    pub n_filler_species: usize,
}

impl Default for SimDesign {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                origin_x: 0.0,
                origin_y: 0.0,
                cell_size: 1000.0,
                ncols: 10,
                nrows: 10,
            },
            first_year: 2010,
            n_years: 10,
            n_observers: 50,
            n_visits: 2000,
            n_covariates: 1,
            allocation: Allocation::LogNormal { sigma: 1.0 },
            list_length_probs: [0.3, 0.3, 0.4],
            spline_n: 5,
            focal_species: "focal".into(),
            n_filler_species: 10,
        }
    }
}

impl SimDesign {
    pub fn validate(&self) -> Result<(), SimError> {
        self.grid.validate()?;
        if self.n_years == 0 || self.n_observers == 0 {
            return Err(SimError::Design("need at least one year and one observer".into()));
        }
        if self.n_filler_species < 6 {
            return Err(SimError::Design("need at least 6 filler species".into()));
        }
        if self.list_length_probs.iter().any(|p| !(*p >= 0.0)) || self.list_length_probs.iter().sum::<f64>() <= 0.0 {
            return Err(SimError::Design("list-length probabilities must be non-negative".into()));
        }
        if let Allocation::LogNormal { sigma } = self.allocation {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(SimError::Design(format!("log-normal sigma {sigma}")));
            }
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.grid.n_cells()
    }

    /// Raw observer ids, `obs000`, `obs001`, ...
    pub fn observer_ids(&self) -> Vec<String> {
        (0..self.n_observers).map(|o| format!("obs{o:03}")).collect()
    }

    pub fn model_options(&self) -> ModelOptions {
        ModelOptions {
            spline_n: self.spline_n,
            ..ModelOptions::default()
        }
    }

    fn covariate_info(&self) -> Vec<CovariateInfo> {
        (1..=self.n_covariates).map(|k| CovariateInfo::continuous(format!("cov{k}"))).collect()
    }

    /// A model over every site and observer of the design. Its parameter
    /// layout is the one a truth [`ModelState`] must follow.
    fn template(&self, sites: &SiteTable) -> Result<OccupancyModel, SimError> {
        let visits: Vec<Visit> = self
            .observer_ids()
            .iter()
            .map(|o| Visit {
                site: 0,
                year: self.first_year,
                week: 1,
                observer: observer_token(o),
                list_length: ListLengthClass::L1,
                y: false,
            })
            .collect();
        let presence = ConfirmedPresence::new(self.n_sites(), self.n_years, self.first_year);
        Ok(OccupancyModel::new(sites, &visits, &presence, self.model_options())?)
    }

    /// Every parameter at its neutral value (zero coefficients and raw
    /// effects, unit scales) for this design.
    pub fn neutral_truth(&self) -> Result<ModelState, SimError> {
        self.validate()?;
        let mut sites = SiteTable::from_grid(&self.grid);
        sites.covariates = vec![0.5; self.n_sites() * self.n_covariates];
        sites.info = self.covariate_info();
        Ok(ModelState::neutral(self.template(&sites)?.layout()))
    }
}

/// Fills the raw observer block with standard-normal draws scaled to the
/// zero-sum prior, so `σ_obs` sets the spread of observer effects.
pub fn draw_observer_effects(truth: &mut ModelState, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = truth.b_obs_raw.len() + 1;
    let sd = if n > 1 { (n as f64 / (n - 1) as f64).sqrt() } else { 0.0 };
    for b in truth.b_obs_raw.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *b = sd * z;
    }
}

/// What generated a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub state: ModelState,
    pub first_year: i32,
    pub n_years: usize,
    /// Row-major `S × T` occupancy probabilities.
    pub psi: Vec<f64>,
    /// Row-major `S × T` latent occupancy.
    pub z: Vec<bool>,
    /// Detection probability of each visit, aligned with the visit table.
    pub visit_p: Vec<f64>,
}

impl TruthRecord {
    pub fn z(&self, site: usize, year_idx: usize) -> bool {
        self.z[site * self.n_years + year_idx]
    }

    /// Fraction of `subset` actually occupied, per year.
    pub fn realized_fraction(&self, subset: &[usize]) -> Vec<f64> {
        (0..self.n_years)
            .map(|t| subset.iter().filter(|&&s| self.z(s, t)).count() as f64 / subset.len() as f64)
            .collect()
    }
}

/// A synthetic dataset in every form the pipeline uses.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub sites: SiteTable,
    /// Ordered by site, date and observer token, as ingest produces them.
    pub visits: Vec<Visit>,
    pub presence: ConfirmedPresence,
    pub sightings: Vec<Sighting>,
    pub truth: TruthRecord,
}

struct Draft {
    site: usize,
    date: NaiveDate,
    observer: usize,
    class: ListLengthClass,
    y: bool,
    p: f64,
}

fn days_in_year(year: i32) -> u32 {
    if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    }
}

/// Draws a dataset from `truth`.
///
/// Occupancy is `z ~ Bernoulli(ψ)`, each visit gets a uniform day of its
/// year and a list-length class, and `y ~ Bernoulli(p·z)`. Presence is
/// confirmed exactly where some visit detected the species.
pub fn simulate_dataset(truth: &ModelState, design: &SimDesign, seed: u64) -> Result<SimulatedData, SimError> {
    design.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sites = design.n_sites();
    let n_years = design.n_years;
    let mut sites = SiteTable::from_grid(&design.grid);
    sites.covariates = (0..n_sites * design.n_covariates).map(|_| rng.random::<f64>()).collect();
    sites.info = design.covariate_info();

    let model = design.template(&sites)?;
    let x = truth.to_unconstrained(model.layout())?;
    let c = model.components(&x)?;

    let mut psi = vec![0.0; n_sites * n_years];
    let mut z = vec![false; n_sites * n_years];
    for s in 0..n_sites {
        for t in 0..n_years {
            let i = s * n_years + t;
            psi[i] = logistic(c.occupancy_logit(s, t));
            z[i] = rng.random::<f64>() < psi[i];
        }
    }

    let weights: Vec<f64> = match design.allocation {
        Allocation::Uniform => vec![1.0; n_sites],
        Allocation::LogNormal { sigma } => (0..n_sites)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                (sigma * e).exp()
            })
            .collect(),
    };
    let site_dist = WeightedIndex::new(&weights).map_err(|e| SimError::Design(e.to_string()))?;
    let class_dist = WeightedIndex::new(design.list_length_probs).map_err(|e| SimError::Design(e.to_string()))?;

    let ids = design.observer_ids();
    let tokens: Vec<String> = ids.iter().map(|o| observer_token(o)).collect();
    // effect index of each design observer in the template model
    let obs_index: Vec<usize> = tokens
        .iter()
        .map(|t| model.observers().iter().position(|m| m == t).expect("template has every observer"))
        .collect();

    let mut used: HashSet<(usize, usize, NaiveDate)> = HashSet::new();
    let mut drafts = Vec::with_capacity(design.n_visits);
    for _ in 0..design.n_visits {
        let mut attempts = 0;
        let (site, t, date, observer) = loop {
            let site = site_dist.sample(&mut rng);
            let t = rng.random_range(0..n_years);
            let year = design.first_year + t as i32;
            let day = rng.random_range(1..=days_in_year(year));
            let date = NaiveDate::from_yo_opt(year, day).expect("valid ordinal");
            let observer = rng.random_range(0..design.n_observers);
            if used.insert((observer, site, date)) {
                break (site, t, date, observer);
            }
            attempts += 1;
            if attempts > 10_000 {
                return Err(SimError::Design("cannot place distinct visits; too many for the design".into()));
            }
        };
        let class = ListLengthClass::ALL[class_dist.sample(&mut rng)];
        let p = logistic(c.detection_logit(obs_index[observer], week_of_year(date) as usize, class.index()));
        let y = z[site * n_years + t] && rng.random::<f64>() < p;
        drafts.push(Draft {
            site,
            date,
            observer,
            class,
            y,
            p,
        });
    }
    drafts.sort_by(|a, b| (a.site, a.date, &tokens[a.observer]).cmp(&(b.site, b.date, &tokens[b.observer])));

    let fillers: Vec<String> = (1..=design.n_filler_species).map(|k| format!("sp{k:02}")).collect();
    let mut presence = ConfirmedPresence::new(n_sites, n_years, design.first_year);
    let mut visits = Vec::with_capacity(drafts.len());
    let mut sightings = Vec::new();
    let mut visit_p = Vec::with_capacity(drafts.len());
    for d in &drafts {
        if d.y {
            presence.set(d.site, d.date.year())?;
        }
        let n_species = match d.class {
            ListLengthClass::L1 => 1,
            ListLengthClass::L2To3 => rng.random_range(2..=3),
            ListLengthClass::L4Plus => rng.random_range(4..=6),
        };
        let mut pool = fillers.clone();
        pool.shuffle(&mut rng);
        let mut species: Vec<String> = Vec::with_capacity(n_species);
        if d.y {
            species.push(design.focal_species.clone());
        }
        species.extend(pool.into_iter().take(n_species - species.len()));
        let (row, col) = design.grid.row_col(d.site);
        let size = design.grid.cell_size;
        let px = design.grid.origin_x + (col as f64 + rng.random_range(0.05..0.95)) * size;
        let py = design.grid.origin_y + (row as f64 + rng.random_range(0.05..0.95)) * size;
        for sp in species {
            sightings.push(Sighting {
                observer_id: ids[d.observer].clone(),
                species_id: sp,
                date: d.date,
                x: px,
                y: py,
                validated: false,
                countable: true,
            });
        }
        visits.push(Visit {
            site: d.site,
            year: d.date.year(),
            week: week_of_year(d.date),
            observer: tokens[d.observer].clone(),
            list_length: d.class,
            y: d.y,
        });
        visit_p.push(d.p);
    }

    Ok(SimulatedData {
        sites,
        visits,
        presence,
        sightings,
        truth: TruthRecord {
            state: truth.clone(),
            first_year: design.first_year,
            n_years,
            psi,
            z,
            visit_p,
        },
    })
}

/// Marginal log-likelihood of one cell by summing over the admissible latent
/// states in probability space.
///
/// `z` ranges over `{1}` when presence is confirmed and `{0, 1}` otherwise.
pub fn brute_force_loglik(ys: &[bool], a: bool, p: &[f64], psi: f64) -> Result<f64, SimError> {
    if ys.len() != p.len() {
        return Err(SimError::Design("detections and probabilities differ in length".into()));
    }
    if ys.len() > BRUTE_FORCE_MAX_VISITS {
        return Err(SimError::Design(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_VISITS} visits, got {}",
            ys.len()
        )));
    }
    let states: &[u8] = if a { &[1] } else { &[0, 1] };
    let mut total = 0.0;
    for &z in states {
        let mut term = if z == 1 { psi } else { 1.0 - psi };
        for (&y, &pv) in ys.iter().zip(p) {
            let q = pv * z as f64;
            term *= if y { q } else { 1.0 - q };
        }
        total += term;
    }
    Ok(total.ln())
}
