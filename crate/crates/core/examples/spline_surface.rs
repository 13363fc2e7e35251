//! A B-spline projected Gaussian-process surface over a grid of sites.
//!
//! Run with `cargo run --example spline_surface`.

use occupancy::gp::{build_spline_surface, project_weights, SqExpKernel, DEFAULT_PRUNE_EPS};
use occupancy::ingest::{GridSpec, SiteTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec {
        origin_x: 0.0,
        origin_y: 0.0,
        cell_size: 1000.0,
        ncols: 12,
        nrows: 8,
    };
    let sites = SiteTable::from_grid(&grid);
    let surface = build_spline_surface(&sites.lon, &sites.lat, 6, DEFAULT_PRUNE_EPS)?;
    println!("{} sites, {} active basis functions", surface.n_sites(), surface.n_weights());
    let row_sums: Vec<f64> = (0..surface.n_sites())
        .map(|s| surface.row(s).iter().map(|&(_, b)| b).sum())
        .collect();
    let worst = row_sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    println!("partition of unity: max |row sum - 1| = {worst:.1e}");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z: Vec<f64> = (0..surface.n_weights()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let field = project_weights(&z, &surface, &SqExpKernel::new(1.0, 1.5)?)?;
    for r in (0..grid.nrows).rev() {
        let line: String = (0..grid.ncols)
            .map(|c| {
                let v = field[r * grid.ncols + c];
                match v {
                    v if v > 1.0 => '#',
                    v if v > 0.0 => '+',
                    v if v > -1.0 => '.',
                    _ => ' ',
                }
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
