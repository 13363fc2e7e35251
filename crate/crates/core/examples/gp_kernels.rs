//! Periodic and squared-exponential kernels and the jittered Cholesky factor.
//!
//! Run with `cargo run --example gp_kernels`.

use occupancy::gp::{cholesky_with_jitter, PeriodicKernel, SqExpKernel, PHENOLOGY_PERIOD};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = PeriodicKernel::new(1.0, 1.0)?;
    println!("periodic k(1, 1)            = {:.6}", k.eval(1.0, 1.0));
    println!("periodic k(1, 54)           = {:.6}", k.eval(1.0, 54.0));
    println!(
        "periodic k(0, period / 4)   = {:.6} (e^-1 = {:.6})",
        k.eval(0.0, PHENOLOGY_PERIOD / 4.0),
        (-1.0f64).exp()
    );
    // weeks 1 and 53 are neighbours on the circle
    println!("periodic k(1, 53) vs k(1, 2) = {:.6} vs {:.6}", k.eval(1.0, 53.0), k.eval(1.0, 2.0));

    let weeks: Vec<f64> = (1..=53).map(f64::from).collect();
    for ell in [0.2, 1.0, 5.0] {
        let gram = PeriodicKernel::new(1.0, ell)?.gram(&weeks);
        let chol = cholesky_with_jitter(&gram)?;
        println!("53-week Gram, length scale {ell}: jitter {:e}", chol.jitter);
    }

    let se = SqExpKernel::new(0.5, 0.3)?;
    let years: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64 / 9.0 - 0.5]).collect();
    let gram = se.gram(&years);
    println!("year kernel, first row: {:.3?}", gram.row(0).iter().collect::<Vec<_>>());
    Ok(())
}
