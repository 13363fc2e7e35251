//! Posterior summaries from a short fit: occupancy map, trend, phenology,
//! observer and list-length detection, covariate effects.
//!
//! Run with `cargo run --release --example posterior_outputs`.

use occupancy::ingest::GridSpec;
use occupancy::model::OccupancyModel;
use occupancy::posterior::{Posterior, TrendMode};
use occupancy::sampler::{nuts_run, SamplerConfig};
use occupancy::sim::{simulate_dataset, Allocation, SimDesign};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let design = SimDesign {
        grid: GridSpec {
            origin_x: 0.0,
            origin_y: 0.0,
            cell_size: 1000.0,
            ncols: 6,
            nrows: 6,
        },
        n_years: 4,
        n_observers: 12,
        n_visits: 500,
        allocation: Allocation::Uniform,
        spline_n: 4,
        ..SimDesign::default()
    };
    let mut truth = design.neutral_truth()?;
    truth.beta0_psi = 0.5;
    truth.beta_p = [0.5, 1.5];
    let data = simulate_dataset(&truth, &design, 8)?;
    let model = OccupancyModel::new(&data.sites, &data.visits, &data.presence, design.model_options())?;
    let sampler = SamplerConfig {
        chains: 2,
        iterations: 400,
        warmup: 200,
        ..SamplerConfig::default()
    };
    let draws = nuts_run(&model, &sampler)?;
    let post = Posterior::from_draws(&model, &data.sites, &draws)?;
    println!("{} draws", post.n_draws());

    let map = post.occupancy_map(design.first_year)?;
    let first = &map[0].summary;
    println!(
        "site 0 in {}: psi mean {:.3}, 95% [{:.3}, {:.3}]",
        design.first_year,
        first.mean,
        first.quantiles[0],
        first.quantiles[6]
    );

    let all: Vec<usize> = (0..data.sites.n_sites()).collect();
    let realized = data.truth.realized_fraction(&all);
    for mode in [TrendMode::Expected, TrendMode::Realized { seed: 1 }] {
        let trend = post.fraction_occupied_trend("all", &all, mode)?;
        let means: Vec<String> = trend.summaries.iter().map(|s| format!("{:.3}", s.mean)).collect();
        println!("fraction occupied ({mode:?}): {}", means.join(" "));
    }
    let truth_line: Vec<String> = realized.iter().map(|v| format!("{v:.3}")).collect();
    println!("realized in the simulation:  {}", truth_line.join(" "));

    let phen = post.phenology_curve();
    println!("phenology peak week {}", phen.peak_week);
    for c in post.list_length_effect() {
        println!("list length {:6}: detection {:.3}", c.class.label(), c.summary.mean);
    }
    let obs = post.observer_distribution();
    let (lo, hi) = obs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), o| (lo.min(o.mean), hi.max(o.mean)));
    println!("observer detection ranges from {lo:.3} to {hi:.3}");
    for e in post.all_covariate_effects()? {
        let ends = (&e.points[0].summary, &e.points[e.points.len() - 1].summary);
        println!("{}: psi {:.3} at 0, {:.3} at 1", e.covariate, ends.0.mean, ends.1.mean);
    }
    for s in post.covariate_support() {
        println!("P({} > 0) = {:.3}", s.covariate, s.p_positive);
    }
    Ok(())
}
