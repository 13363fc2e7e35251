//! End-to-end orchestration behind the command-line tool.
//!
//! One [`RunConfig`] drives every command. It is read from a TOML or JSON
//! file, then command-line [`Overrides`] are applied on top, so the
//! precedence is flags > file > defaults. Each command writes its outputs
//! below `paths.output_dir` together with a JSON [`Manifest`].
//!
//! Layout of the output directory:
//!
//! ```text
//! simulate_manifest.json, truth.json     cmd_simulate
//! prepared/                              cmd_prepare
//! fit/draws_chain_{k}.csv, fit/...       cmd_fit
//! summary/*.csv                          cmd_summarize
//! diagnostics/diagnostics.csv, ...       cmd_diagnose
//! ```

mod commands;

pub use commands::{
    cmd_diagnose, cmd_fit, cmd_prepare, cmd_simulate, cmd_summarize, draws_path, read_fit_draws, CommandOutcome,
    FitDiagnostics, PrepReport,
};

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{ColumnMap, CovariateOptions, GridSpec, ListLengthCuts, StudyWindow};
use crate::model::{ModelOptions, ModelState};
use crate::posterior::TrendMode;
use crate::sampler::SamplerConfig;
use crate::sim::{draw_observer_effects, Allocation, SimDesign};
use crate::PipelineError;

pub const PREPARED_DIR: &str = "prepared";
pub const FIT_DIR: &str = "fit";
pub const SUMMARY_DIR: &str = "summary";
pub const DIAGNOSTICS_DIR: &str = "diagnostics";

/// R̂ at or above this fails a strict run.
pub const RHAT_LIMIT: f64 = 1.1;
/// Largest tolerated fraction of divergent post-warmup transitions.
pub const DIVERGENCE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub sightings: PathBuf,
    /// Optional; without it the model has no occupancy covariates.
    pub covariates: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            sightings: "sightings.csv".into(),
            covariates: None,
            output_dir: "out".into(),
        }
    }
}

/// Whole calendar years of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            first_year: 2009,
            last_year: 2024,
        }
    }
}

/// A named subset of sites for a regional trend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub sites: Vec<usize>,
}

/// Scalar truth of a simulation. Every block not listed here (phenology,
/// temporal and spatial effects) is left at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthSpec {
    pub beta0_p: f64,
    /// `[L2_3, L4plus]`.
    pub beta_p: [f64; 2],
    pub sigma_obs: f64,
    pub beta0_psi: f64,
    /// One per simulated covariate.
    pub beta_psi: Vec<f64>,
    pub observer_seed: u64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            beta0_p: -0.5,
            beta_p: [0.5, 1.5],
            sigma_obs: 1.0,
            beta0_psi: -0.3,
            beta_psi: vec![1.0],
            observer_seed: 17,
        }
    }
}

/// Effort and truth of `cmd_simulate`. The grid, years, focal species and
/// spline size come from the enclosing [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub seed: u64,
    pub n_observers: usize,
    pub n_visits: usize,
    pub n_covariates: usize,
    pub allocation: Allocation,
    pub list_length_probs: [f64; 3],
    pub n_filler_species: usize,
    pub truth: TruthSpec,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let d = SimDesign::default();
        Self {
            seed: 99,
            n_observers: d.n_observers,
            n_visits: d.n_visits,
            n_covariates: d.n_covariates,
            allocation: d.allocation,
            list_length_probs: d.list_length_probs,
            n_filler_species: d.n_filler_species,
            truth: TruthSpec::default(),
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub columns: ColumnMap,
    pub grid: GridSpec,
    pub window: WindowConfig,
    pub focal_species: String,
    /// Minimum number of sightings for an observer to count as proficient.
    pub proficiency_threshold: usize,
    pub list_length: ListLengthCuts,
    pub covariates: CovariateOptions,
    pub model: ModelOptions,
    pub sampler: SamplerConfig,
    pub trend_mode: TrendMode,
    /// Extra trend regions; a trend over all sites is always produced.
    pub regions: Vec<Region>,
    /// Fail `fit` and `diagnose` on poor convergence.
    pub strict: bool,
    pub simulation: SimulationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            columns: ColumnMap::default(),
            grid: GridSpec {
                origin_x: 0.0,
                origin_y: 0.0,
                cell_size: 1000.0,
                ncols: 10,
                nrows: 10,
            },
            window: WindowConfig::default(),
            focal_species: "focal".into(),
            proficiency_threshold: 500,
            list_length: ListLengthCuts::default(),
            covariates: CovariateOptions::default(),
            model: ModelOptions::default(),
            sampler: SamplerConfig::default(),
            trend_mode: TrendMode::default(),
            regions: Vec::new(),
            strict: true,
            simulation: SimulationConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    /// Sets both the sampler and the simulation seed.
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub warmup: Option<usize>,
    pub no_strict: bool,
    /// Two chains of ten iterations, not strict; explicit flags still win.
    pub smoke: bool,
}

impl RunConfig {
    /// Parses a config file, TOML unless the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if json {
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
        }
    }

    /// File (or defaults) plus overrides, validated.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, PipelineError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.smoke {
            self.sampler.chains = 2;
            self.sampler.iterations = 10;
            self.sampler.warmup = 5;
            self.strict = false;
        }
        if let Some(d) = &o.output_dir {
            self.paths.output_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.sampler.seed = s;
            self.simulation.seed = s;
        }
        if let Some(c) = o.chains {
            self.sampler.chains = c;
        }
        if let Some(i) = o.iterations {
            self.sampler.iterations = i;
        }
        if let Some(w) = o.warmup {
            self.sampler.warmup = w;
        }
        if o.no_strict {
            self.strict = false;
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg = |m: String| PipelineError::Config(m);
        self.grid.validate().map_err(|e| cfg(e.to_string()))?;
        self.study_window()?;
        self.sampler.validate()?;
        if self.proficiency_threshold == 0 {
            return Err(cfg("proficiency_threshold must be at least 1".into()));
        }
        if self.focal_species.trim().is_empty() {
            return Err(cfg("focal_species is empty".into()));
        }
        if self.list_length.single_max == 0 || self.list_length.mid_max <= self.list_length.single_max {
            return Err(cfg(format!(
                "list-length cuts must satisfy 1 <= single_max < mid_max, got {} and {}",
                self.list_length.single_max, self.list_length.mid_max
            )));
        }
        let mut names = BTreeSet::from(["all".to_string()]);
        for r in &self.regions {
            let ok = !r.name.is_empty()
                && r.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return Err(cfg(format!("region name `{}` must be [A-Za-z0-9_-]+", r.name)));
            }
            if !names.insert(r.name.clone()) {
                return Err(cfg(format!("duplicate region `{}`", r.name)));
            }
            if r.sites.is_empty() {
                return Err(cfg(format!("region `{}` has no sites", r.name)));
            }
            if let Some(s) = r.sites.iter().find(|&&s| s >= self.grid.n_cells()) {
                return Err(cfg(format!("region `{}`: site {s} outside the grid", r.name)));
            }
        }
        Ok(())
    }

    pub fn study_window(&self) -> Result<StudyWindow, PipelineError> {
        StudyWindow::years(self.window.first_year, self.window.last_year)
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn prepared_dir(&self) -> PathBuf {
        self.paths.output_dir.join(PREPARED_DIR)
    }

    pub fn fit_dir(&self) -> PathBuf {
        self.paths.output_dir.join(FIT_DIR)
    }

    pub fn summary_dir(&self) -> PathBuf {
        self.paths.output_dir.join(SUMMARY_DIR)
    }

    pub fn diagnostics_dir(&self) -> PathBuf {
        self.paths.output_dir.join(DIAGNOSTICS_DIR)
    }

    /// The simulation design implied by this config.
    pub fn sim_design(&self) -> SimDesign {
        let s = &self.simulation;
        SimDesign {
            grid: self.grid,
            first_year: self.window.first_year,
            n_years: (self.window.last_year - self.window.first_year + 1).max(0) as usize,
            n_observers: s.n_observers,
            n_visits: s.n_visits,
            n_covariates: s.n_covariates,
            allocation: s.allocation,
            list_length_probs: s.list_length_probs,
            spline_n: self.model.spline_n,
            focal_species: self.focal_species.clone(),
            n_filler_species: s.n_filler_species,
        }
    }

    /// The generating parameters of `cmd_simulate`.
    pub fn sim_truth(&self) -> Result<ModelState, PipelineError> {
        let design = self.sim_design();
        let t = &self.simulation.truth;
        if t.beta_psi.len() != design.n_covariates {
            return Err(PipelineError::Config(format!(
                "simulation.truth.beta_psi has {} entries for {} covariates",
                t.beta_psi.len(),
                design.n_covariates
            )));
        }
        let mut truth = design.neutral_truth()?;
        truth.beta0_p = t.beta0_p;
        truth.beta_p = t.beta_p;
        truth.sigma_obs = t.sigma_obs;
        truth.beta0_psi = t.beta0_psi;
        truth.beta_psi = t.beta_psi.clone();
        if t.sigma_obs > 0.0 {
            draw_observer_effects(&mut truth, t.observer_seed);
        }
        Ok(truth)
    }
}

/// Provenance record written next to the outputs of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub wall_time_s: f64,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub details: serde_json::Value,
    pub config: RunConfig,
}
