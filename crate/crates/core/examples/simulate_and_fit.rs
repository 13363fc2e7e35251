//! Simulate a small study from known parameters, fit it and check recovery.
//!
//! Run with `cargo run --release --example simulate_and_fit`; takes about a
//! minute.

use occupancy::ingest::GridSpec;
use occupancy::sampler::SamplerConfig;
use occupancy::sim::{draw_observer_effects, recovery_experiment, Allocation, SimDesign};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let design = SimDesign {
        grid: GridSpec {
            origin_x: 0.0,
            origin_y: 0.0,
            cell_size: 1000.0,
            ncols: 8,
            nrows: 8,
        },
        n_years: 6,
        n_observers: 30,
        n_visits: 1200,
        allocation: Allocation::Uniform,
        spline_n: 4,
        ..SimDesign::default()
    };
    let mut truth = design.neutral_truth()?;
    truth.beta0_p = -0.5;
    truth.beta_p = [0.5, 1.5];
    truth.beta0_psi = 0.2;
    truth.beta_psi = vec![1.0];
    truth.sigma_obs = 0.8;
    draw_observer_effects(&mut truth, 3);

    let sampler = SamplerConfig {
        chains: 4,
        iterations: 600,
        warmup: 300,
        seed: 11,
        ..SamplerConfig::default()
    };
    let r = recovery_experiment(&truth, &design, &sampler, 5)?;
    println!(
        "{} visits, {} confirmed site-years, {} parameters",
        r.data.visits.len(),
        r.data.presence.count(),
        r.model.layout().dim
    );
    for row in &r.report.rows {
        println!(
            "{:15} truth {:+.2}  mean {:+.2}  95% [{:+.2}, {:+.2}] {}",
            row.name,
            row.truth,
            row.mean,
            row.q025,
            row.q975,
            if row.covers { "covered" } else { "MISSED" }
        );
    }
    println!(
        "max R-hat {:.3} ({}), min bulk ESS {:.0}, divergent {:.2}%",
        r.report.max_rhat,
        r.report.worst_param,
        r.report.min_ess_bulk,
        100.0 * r.report.divergence_fraction()
    );
    Ok(())
}
