//! NUTS on a correlated Gaussian, with R-hat and bulk ESS per coordinate.
//!
//! Run with `cargo run --release --example nuts_gaussian`.

use occupancy::sampler::{nuts_run, LogDensity, SamplerConfig};
use occupancy::ModelError;

/// Bivariate normal with unit variances and correlation `rho`.
struct Correlated {
    rho: f64,
}

impl LogDensity for Correlated {
    fn dim(&self) -> usize {
        2
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, ModelError> {
        let c = 1.0 / (1.0 - self.rho * self.rho);
        grad[0] = -c * (x[0] - self.rho * x[1]);
        grad[1] = -c * (x[1] - self.rho * x[0]);
        Ok(-0.5 * c * (x[0] * x[0] - 2.0 * self.rho * x[0] * x[1] + x[1] * x[1]))
    }

    fn param_names(&self) -> Vec<String> {
        vec!["a".into(), "b".into()]
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SamplerConfig {
        chains: 4,
        iterations: 2000,
        warmup: 1000,
        seed: 42,
        ..SamplerConfig::default()
    };
    let draws = nuts_run(&Correlated { rho: 0.9 }, &cfg)?;
    for s in draws.summary()? {
        println!(
            "{}: mean {:+.3} sd {:.3} 95% [{:+.3}, {:+.3}] R-hat {:.4} ESS {:.0}",
            s.name, s.mean, s.sd, s.q025, s.q975, s.rhat, s.ess_bulk
        );
    }
    let steps: Vec<String> = draws.chains.iter().map(|c| format!("{:.3}", c.step_size)).collect();
    println!("adapted step sizes: {}", steps.join(", "));
    println!(
        "mean accept stat {:.3}, {} divergences",
        draws.mean_accept_stat(),
        draws.divergences()
    );
    Ok(())
}
