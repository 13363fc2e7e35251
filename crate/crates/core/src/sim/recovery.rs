use serde::{Deserialize, Serialize};

use super::{simulate_dataset, SimDesign, SimulatedData};
use crate::model::{ModelState, OccupancyModel};
use crate::sampler::{nuts_run, quantile_sorted, PosteriorDraws, SamplerConfig};
use crate::SimError;

/// Recovery of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
    /// The 95% interval contains the truth.
    pub covers: bool,
    pub rhat: f64,
    pub ess_bulk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
    /// Largest R̂ over every sampled coordinate.
    pub max_rhat: f64,
    /// Name of the coordinate with the largest R̂.
    pub worst_param: String,
    pub min_ess_bulk: f64,
    pub divergences: usize,
    pub total_draws: usize,
}

impl RecoveryReport {
    pub fn row(&self, name: &str) -> Option<&RecoveryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn divergence_fraction(&self) -> f64 {
        self.divergences as f64 / self.total_draws.max(1) as f64
    }
}

/// Simulated data, the model fitted to it, its draws and the report.
pub struct Recovery {
    pub data: SimulatedData,
    pub model: OccupancyModel,
    pub draws: PosteriorDraws,
    pub report: RecoveryReport,
}

/// Summarises the scalar parameters of a fit against a known truth.
///
/// Scales are reported on their natural scale; R̂ and ESS are rank based so
/// they do not change under that transform.
pub fn recovery_report(
    model: &OccupancyModel,
    draws: &PosteriorDraws,
    truth: &ModelState,
) -> Result<RecoveryReport, SimError> {
    let l = model.layout();
    let summary = draws.summary()?;
    let mut scalars: Vec<(String, usize, f64, bool)> = vec![
        ("beta0_p".into(), l.beta0_p, truth.beta0_p, false),
        ("beta_p[L2_3]".into(), l.beta_p.start, truth.beta_p[0], false),
        ("beta_p[L4plus]".into(), l.beta_p.start + 1, truth.beta_p[1], false),
        ("sigma_obs".into(), l.log_sigma_obs, truth.sigma_obs, true),
        ("beta0_psi".into(), l.beta0_psi, truth.beta0_psi, false),
    ];
    for (k, j) in l.beta_psi.clone().enumerate() {
        scalars.push((format!("beta_psi[{}]", k + 1), j, truth.beta_psi[k], false));
    }
    let rows = scalars
        .into_iter()
        .map(|(name, j, t, log_scale)| {
            let mut v: Vec<f64> = draws.param(j).concat();
            if log_scale {
                v.iter_mut().for_each(|x| *x = x.exp());
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(f64::total_cmp);
            let (q025, q975) = (quantile_sorted(&v, 0.025), quantile_sorted(&v, 0.975));
            RecoveryRow {
                name,
                truth: t,
                mean,
                q025,
                q975,
                covers: q025 <= t && t <= q975,
                rhat: summary[j].rhat,
                ess_bulk: summary[j].ess_bulk,
            }
        })
        .collect();
    let (worst, max_rhat) = summary
        .iter()
        .filter(|s| !s.degenerate)
        .map(|s| (s.name.clone(), s.rhat))
        .fold((String::new(), f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let min_ess_bulk = summary
        .iter()
        .filter(|s| !s.degenerate)
        .map(|s| s.ess_bulk)
        .fold(f64::INFINITY, f64::min);
    Ok(RecoveryReport {
        rows,
        max_rhat,
        worst_param: worst,
        min_ess_bulk,
        divergences: draws.divergences(),
        total_draws: draws.total_draws(),
    })
}

/// Simulates from `truth`, fits the model and reports how well the scalar
/// parameters were recovered.
pub fn recovery_experiment(
    truth: &ModelState,
    design: &SimDesign,
    sampler: &SamplerConfig,
    data_seed: u64,
) -> Result<Recovery, SimError> {
    let data = simulate_dataset(truth, design, data_seed)?;
    let model = OccupancyModel::new(&data.sites, &data.visits, &data.presence, design.model_options())?;
    let draws = nuts_run(&model, sampler)?;
    let report = recovery_report(&model, &draws, truth)?;
    Ok(Recovery {
        data,
        model,
        draws,
        report,
    })
}
