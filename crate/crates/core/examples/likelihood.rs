//! The marginalised site-year likelihood against explicit enumeration.
//!
//! Run with `cargo run --example likelihood`.

use occupancy::model::site_year_loglik;
use occupancy::sim::brute_force_loglik;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases: [(&str, bool, Vec<bool>, Vec<f64>, f64); 4] = [
        ("confirmed, one detection", true, vec![true], vec![0.5], 0.5),
        ("confirmed, mixed", true, vec![true, false, true], vec![0.2, 0.7, 0.4], 0.35),
        ("unconfirmed, two misses", false, vec![false, false], vec![0.3, 0.4], 0.6),
        ("unvisited", false, vec![], vec![], 0.3),
    ];
    for (name, a, ys, p, psi) in cases {
        let fast = site_year_loglik(a, &ys, &p, psi)?;
        let slow = brute_force_loglik(&ys, a, &p, psi)?;
        println!("{name:26} marginal {fast:+.12}  enumerated {slow:+.12}");
    }
    // a detection without confirmed presence contradicts the data model
    println!("inconsistent cell: {:?}", site_year_loglik(false, &[true], &[0.5], 0.5).is_err());
    Ok(())
}
