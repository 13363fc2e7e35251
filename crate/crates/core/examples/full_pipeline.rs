//! The command pipeline end to end in a temporary directory: simulate,
//! prepare, fit, summarize, diagnose.
//!
//! Run with `cargo run --release --example full_pipeline`.

use occupancy::pipeline::{
    cmd_diagnose, cmd_fit, cmd_prepare, cmd_simulate, cmd_summarize, RunConfig, WindowConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    let mut cfg = RunConfig::default();
    cfg.paths.sightings = root.join("raw/sightings.csv");
    cfg.paths.covariates = Some(root.join("raw/covariates.csv"));
    cfg.paths.output_dir = root.join("out");
    cfg.grid.ncols = 6;
    cfg.grid.nrows = 6;
    cfg.window = WindowConfig {
        first_year: 2018,
        last_year: 2022,
    };
    // simulated observers are few and busy
    cfg.proficiency_threshold = 1;
    cfg.model.spline_n = 4;
    cfg.simulation.n_observers = 15;
    cfg.simulation.n_visits = 600;
    cfg.sampler.chains = 2;
    cfg.sampler.iterations = 300;
    cfg.sampler.warmup = 150;
    cfg.strict = false;
    cfg.validate()?;

    for (name, cmd) in [
        ("simulate", cmd_simulate as fn(&RunConfig) -> _),
        ("prepare", cmd_prepare),
        ("fit", cmd_fit),
        ("summarize", cmd_summarize),
        ("diagnose", cmd_diagnose),
    ] {
        let outcome = cmd(&cfg)?;
        println!("{name:9} exit {} manifest {}", outcome.exit_code(), outcome.manifest.display());
    }
    let mut files: Vec<String> = walk(&cfg.paths.output_dir)?
        .into_iter()
        .map(|p| p.strip_prefix(root).unwrap_or(&p).display().to_string())
        .collect();
    files.sort();
    println!("{} files:", files.len());
    for f in files {
        println!("  {f}");
    }
    println!("{}", std::fs::read_to_string(cfg.diagnostics_dir().join("recovery.csv"))?);
    Ok(())
}

fn walk(dir: &std::path::Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            out.extend(walk(&path)?);
        } else {
            out.push(path);
        }
    }
    Ok(out)
}
