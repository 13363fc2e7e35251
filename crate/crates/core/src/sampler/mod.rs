//! No-U-Turn Hamiltonian Monte Carlo with Stan-style warmup, plus the
//! convergence diagnostics used to judge a fit.

mod adapt;
mod diagnostics;
pub mod io;
mod nuts;

pub use adapt::{DualAveraging, WindowedVariance};
pub use diagnostics::{ess_bulk, quantile_sorted, rhat, Diagnostic};
pub use nuts::{TransitionStats, MAX_DELTA_H};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ModelError, SamplerError};
use nuts::{Nuts, Point};

/// A differentiable log density over `R^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` (overwriting) and returns `log p(x)`.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, ModelError>;

    fn param_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x[{i}]")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Total iterations per chain, warmup included.
    pub iterations: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub max_depth: usize,
    pub seed: u64,
    /// Run chains on separate threads. Results do not depend on this.
    pub parallel: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 8,
            iterations: 1000,
            warmup: 500,
            target_accept: 0.8,
            max_depth: 10,
            seed: 1,
            parallel: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains == 0 {
            return Err(SamplerError::Config("need at least one chain".into()));
        }
        if self.warmup >= self.iterations {
            return Err(SamplerError::Config(format!(
                "warmup ({}) must be smaller than iterations ({})",
                self.warmup, self.iterations
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(SamplerError::Config(format!(
                "target acceptance {} outside (0, 1)",
                self.target_accept
            )));
        }
        if self.max_depth == 0 {
            return Err(SamplerError::Config("max tree depth must be positive".into()));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        self.iterations - self.warmup
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// Row-major `draws × dim` unconstrained positions.
    pub positions: Vec<f64>,
    pub lp: Vec<f64>,
    pub stats: Vec<TransitionStats>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
}

impl ChainDraws {
    pub fn n_draws(&self) -> usize {
        self.lp.len()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        let dim = self.positions.len() / self.lp.len().max(1);
        &self.positions[i * dim..(i + 1) * dim]
    }

    pub fn divergences(&self) -> usize {
        self.stats.iter().filter(|s| s.divergent).count()
    }
}

/// All chains of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains.first().map(|c| c.n_draws()).unwrap_or(0)
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.n_draws()).sum()
    }

    /// Draws of coordinate `j`, one vector per chain.
    pub fn param(&self, j: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.chains
            .iter()
            .map(|c| (0..c.n_draws()).map(|i| c.positions[i * d + j]).collect())
            .collect()
    }

    /// Every draw across chains, chain-major.
    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> {
        self.chains.iter().flat_map(|c| (0..c.n_draws()).map(move |i| c.draw(i)))
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences()).sum()
    }

    pub fn divergence_fraction(&self) -> f64 {
        self.divergences() as f64 / self.total_draws().max(1) as f64
    }

    pub fn mean_accept_stat(&self) -> f64 {
        let s: f64 = self.chains.iter().flat_map(|c| &c.stats).map(|s| s.accept_stat).sum();
        s / self.total_draws().max(1) as f64
    }

    /// Per-parameter summary and diagnostics.
    pub fn summary(&self) -> Result<Vec<ParamSummary>, SamplerError> {
        (0..self.dim())
            .map(|j| {
                let chains = self.param(j);
                let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
                let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
                pooled.sort_by(f64::total_cmp);
                let n = pooled.len() as f64;
                let mean = pooled.iter().sum::<f64>() / n;
                let sd = (pooled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                let r = rhat(&refs)?;
                let e = ess_bulk(&refs)?;
                Ok(ParamSummary {
                    name: self.names[j].clone(),
                    mean,
                    sd,
                    q025: quantile_sorted(&pooled, 0.025),
                    q50: quantile_sorted(&pooled, 0.5),
                    q975: quantile_sorted(&pooled, 0.975),
                    rhat: r.value,
                    ess_bulk: e.value,
                    degenerate: r.degenerate,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub rhat: f64,
    pub ess_bulk: f64,
    pub degenerate: bool,
}

/// Independent, reproducible stream for chain `chain` under `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

pub const INIT_ATTEMPTS: usize = 100;
pub const INIT_RADIUS: f64 = 2.0;

/// Uniform draw on `[-2, 2]^dim`, repeated until the density and gradient
/// are finite.
pub fn initialize<D: LogDensity + ?Sized>(target: &D, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, SamplerError> {
    let mut reason = String::new();
    for _ in 0..INIT_ATTEMPTS {
        let q: Vec<f64> = (0..target.dim())
            .map(|_| rng.random_range(-INIT_RADIUS..=INIT_RADIUS))
            .collect();
        match Point::new(target, q.clone()) {
            Ok(_) => return Ok(q),
            Err(e) => reason = e,
        }
    }
    Err(SamplerError::Initialization {
        attempts: INIT_ATTEMPTS,
        reason,
    })
}

/// Runs one chain; `init` overrides the random initial point.
pub fn run_chain<D: LogDensity + ?Sized>(
    target: &D,
    config: &SamplerConfig,
    chain: usize,
    init: Option<Vec<f64>>,
) -> Result<ChainDraws, SamplerError> {
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain);
    let q0 = match init {
        Some(q) => q,
        None => initialize(target, &mut rng)?,
    };
    let mut z = Point::new(target, q0).map_err(|reason| SamplerError::Initialization { attempts: 1, reason })?;
    let dim = target.dim();
    let mut nuts = Nuts::new(target, rng, config.max_depth);
    let mut da = DualAveraging::new(config.target_accept);
    let mut windows = WindowedVariance::new(dim, config.warmup);
    nuts.init_step_size(&mut z)?;
    da.restart(nuts.step_size);

    let n_keep = config.draws_per_chain();
    let mut out = ChainDraws {
        positions: Vec::with_capacity(n_keep * dim),
        lp: Vec::with_capacity(n_keep),
        stats: Vec::with_capacity(n_keep),
        step_size: 0.0,
        inv_metric: Vec::new(),
        warmup_divergences: 0,
    };
    let report = (config.iterations / 10).max(1);
    for it in 0..config.iterations {
        let stats = nuts.transition(&mut z);
        if it < config.warmup {
            out.warmup_divergences += stats.divergent as usize;
            nuts.step_size = da.learn(stats.accept_stat);
            if windows.learn(&mut nuts.inv_metric, &z.q) {
                nuts.init_step_size(&mut z)?;
                da.restart(nuts.step_size);
            }
            if it + 1 == config.warmup {
                nuts.step_size = da.final_step_size();
            }
        } else {
            out.positions.extend_from_slice(&z.q);
            out.lp.push(z.logp);
            out.stats.push(stats);
        }
        if (it + 1) % report == 0 {
            log::info!(
                "chain {chain}: iteration {}/{} ({}), step size {:.3e}",
                it + 1,
                config.iterations,
                if it < config.warmup { "warmup" } else { "sampling" },
                nuts.step_size
            );
        }
    }
    out.step_size = nuts.step_size;
    out.inv_metric = nuts.inv_metric.clone();
    Ok(out)
}

/// Runs every chain of `config`; chain `k` uses stream `k` of the seed, so
/// results are identical whether chains run in parallel or not.
pub fn nuts_run<D: LogDensity + ?Sized>(target: &D, config: &SamplerConfig) -> Result<PosteriorDraws, SamplerError> {
    config.validate()?;
    let chains: Vec<Result<ChainDraws, SamplerError>> = if config.parallel && config.chains > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..config.chains)
                .map(|k| s.spawn(move || run_chain(target, config, k, None)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chain thread panicked"))
                .collect()
        })
    } else {
        (0..config.chains).map(|k| run_chain(target, config, k, None)).collect()
    };
    Ok(PosteriorDraws {
        names: target.param_names(),
        chains: chains.into_iter().collect::<Result<_, _>>()?,
    })
}
