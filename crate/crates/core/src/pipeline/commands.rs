use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Manifest, RunConfig, DIVERGENCE_LIMIT, RHAT_LIMIT};
use crate::ingest::{
    self, build_confirmed_presence, derive_visits, load_site_covariates, parse_sightings, split_observer_streams,
    ConfirmedPresence, SiteTable, Visit,
};
use crate::model::OccupancyModel;
use crate::posterior::{output, Posterior, Summary};
use crate::sampler::{io as draws_io, nuts_run, ParamSummary, PosteriorDraws};
use crate::sim::{recovery_report, simulate_dataset, TruthRecord};
use crate::{IngestError, PipelineError, PosteriorError};

const VISITS_FILE: &str = "visits.csv";
const PRESENCE_FILE: &str = "presence.csv";
const SITES_FILE: &str = "sites.csv";
const SITES_META_FILE: &str = "sites_meta.json";
const REPORT_FILE: &str = "prep_report.json";
const ROW_ERRORS_FILE: &str = "row_errors.csv";
const TRUTH_FILE: &str = "truth.json";

/// What a command did, for the caller to turn into an exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub manifest: PathBuf,
    /// False when a strict convergence check failed.
    pub passed: bool,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Counts reported by `cmd_prepare`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepReport {
    /// Parsed rows, before any filtering.
    pub sightings: usize,
    pub row_errors: usize,
    pub outside_window: usize,
    pub outside_grid: usize,
    pub observers: usize,
    pub proficient_observers: usize,
    pub visits: usize,
    pub detections: usize,
    pub confirmed_cells: usize,
    pub sites: usize,
    pub years: usize,
}

/// Convergence summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub max_rhat: f64,
    pub worst_param: String,
    pub min_ess_bulk: f64,
    pub divergences: usize,
    pub total_draws: usize,
    pub divergence_fraction: f64,
    pub mean_accept_stat: f64,
}

impl FitDiagnostics {
    pub fn new(draws: &PosteriorDraws, summary: &[ParamSummary]) -> Self {
        let live = || summary.iter().filter(|s| !s.degenerate);
        let (worst_param, max_rhat) = live()
            .map(|s| (s.name.clone(), s.rhat))
            .fold((String::new(), f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        Self {
            max_rhat,
            worst_param,
            min_ess_bulk: live().map(|s| s.ess_bulk).fold(f64::INFINITY, f64::min),
            divergences: draws.divergences(),
            total_draws: draws.total_draws(),
            divergence_fraction: draws.divergence_fraction(),
            mean_accept_stat: draws.mean_accept_stat(),
        }
    }

    pub fn passes(&self) -> bool {
        self.max_rhat < RHAT_LIMIT && self.divergence_fraction <= DIVERGENCE_LIMIT
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ingest_err(path: &Path) -> impl FnOnce(IngestError) -> PipelineError + '_ {
    move |source| PipelineError::Ingest {
        context: path.display().to_string(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn relative(cfg: &RunConfig, path: &Path) -> String {
    path.strip_prefix(&cfg.paths.output_dir)
        .unwrap_or(path)
        .display()
        .to_string()
}

fn finish(
    cfg: &RunConfig,
    command: &str,
    seed: u64,
    started: Instant,
    outputs: &[PathBuf],
    details: serde_json::Value,
    manifest: PathBuf,
    passed: bool,
) -> Result<CommandOutcome, PipelineError> {
    let m = Manifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: cfg.hash(),
        seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|p| relative(cfg, p)).collect(),
        details,
        config: cfg.clone(),
    };
    write_json(&manifest, &m)?;
    log::info!("{command}: wrote {}", manifest.display());
    Ok(CommandOutcome { manifest, passed })
}

/// Writes a synthetic sightings file (and covariates, when the design has
/// any) where `cmd_prepare` expects them, plus the truth as JSON.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutcome, PipelineError> {
    let started = Instant::now();
    let design = cfg.sim_design();
    let truth = cfg.sim_truth()?;
    let data = simulate_dataset(&truth, &design, cfg.simulation.seed)?;
    let mut outputs = Vec::new();

    let path = &cfg.paths.sightings;
    ingest::io::write_sightings(create(path)?, &data.sightings).map_err(ingest_err(path))?;
    outputs.push(path.clone());
    match &cfg.paths.covariates {
        Some(path) => {
            ingest::io::write_covariates(create(path)?, &data.sites).map_err(ingest_err(path))?;
            outputs.push(path.clone());
        }
        None if design.n_covariates > 0 => {
            return Err(PipelineError::Config(
                "simulation has covariates but paths.covariates is not set".into(),
            ))
        }
        None => {}
    }

    #[derive(Serialize)]
    struct TruthFile<'a> {
        design: &'a crate::sim::SimDesign,
        realized_fraction: Vec<f64>,
        truth: &'a TruthRecord,
    }
    let all: Vec<usize> = (0..design.n_sites()).collect();
    let truth_path = cfg.paths.output_dir.join(TRUTH_FILE);
    write_json(
        &truth_path,
        &TruthFile {
            design: &design,
            realized_fraction: data.truth.realized_fraction(&all),
            truth: &data.truth,
        },
    )?;
    outputs.push(truth_path);
    let details = serde_json::json!({
        "sightings": data.sightings.len(),
        "visits": data.visits.len(),
        "confirmed_cells": data.presence.count(),
    });
    let manifest = cfg.paths.output_dir.join("simulate_manifest.json");
    finish(cfg, "simulate", cfg.simulation.seed, started, &outputs, details, manifest, true)
}

/// Turns raw sightings and covariates into the prepared tables.
///
/// Sightings outside the study window or the grid are dropped and counted;
/// malformed rows are listed in `row_errors.csv`.
pub fn cmd_prepare(cfg: &RunConfig) -> Result<CommandOutcome, PipelineError> {
    let started = Instant::now();
    let window = cfg.study_window()?;
    let src = &cfg.paths.sightings;
    let parsed = parse_sightings(open(src)?, &cfg.columns).map_err(ingest_err(src))?;
    let mut report = PrepReport {
        sightings: parsed.sightings.len(),
        row_errors: parsed.errors.len(),
        sites: cfg.grid.n_cells(),
        years: window.n_years(),
        ..PrepReport::default()
    };
    for e in &parsed.errors {
        log::warn!("{}:{}: {}", src.display(), e.line, e.message);
    }
    let mut sightings = Vec::with_capacity(parsed.sightings.len());
    for s in parsed.sightings {
        if !window.contains(s.date) {
            report.outside_window += 1;
        } else if cfg.grid.assign(s.x, s.y).is_err() {
            report.outside_grid += 1;
        } else {
            sightings.push(s);
        }
    }
    if report.outside_window + report.outside_grid > 0 {
        log::warn!(
            "dropped {} sightings outside the study window and {} outside the grid",
            report.outside_window,
            report.outside_grid
        );
    }

    let streams = split_observer_streams(&sightings, cfg.proficiency_threshold).map_err(ingest_err(src))?;
    report.observers = streams.proficient.len() + streams.other.len();
    report.proficient_observers = streams.proficient.len();
    let visits: Vec<Visit> = if streams.proficient.is_empty() {
        log::warn!("no observer reaches {} sightings; no visits", cfg.proficiency_threshold);
        Vec::new()
    } else {
        derive_visits(&sightings, &cfg.focal_species, &streams.proficient, &cfg.grid, &cfg.list_length)
            .map_err(ingest_err(src))?
    };
    report.visits = visits.len();
    report.detections = visits.iter().filter(|v| v.y).count();
    let presence = build_confirmed_presence(
        &visits,
        &sightings,
        &cfg.focal_species,
        &streams.proficient,
        &cfg.grid,
        &window,
    )
    .map_err(ingest_err(src))?;
    report.confirmed_cells = presence.count();

    let sites = match &cfg.paths.covariates {
        Some(path) => load_site_covariates(open(path)?, &cfg.grid, &cfg.covariates).map_err(ingest_err(path))?,
        None => SiteTable::from_grid(&cfg.grid),
    };

    let dir = cfg.prepared_dir();
    let paths: Vec<PathBuf> = [VISITS_FILE, PRESENCE_FILE, SITES_FILE, SITES_META_FILE, ROW_ERRORS_FILE, REPORT_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    ingest::io::write_visits(create(&paths[0])?, &visits).map_err(ingest_err(&paths[0]))?;
    ingest::io::write_presence(create(&paths[1])?, &presence).map_err(ingest_err(&paths[1]))?;
    ingest::io::write_sites(create(&paths[2])?, create(&paths[3])?, &sites).map_err(ingest_err(&paths[2]))?;
    {
        let mut w = csv::Writer::from_writer(create(&paths[4])?);
        let wrap = |e: csv::Error| ingest_err(&paths[4])(e.into());
        w.write_record(["line", "message"]).map_err(wrap)?;
        for e in &parsed.errors {
            w.write_record([e.line.to_string(), e.message.clone()]).map_err(wrap)?;
        }
        w.flush().map_err(io_err(&paths[4]))?;
    }
    write_json(&paths[5], &report)?;
    log::info!(
        "prepared {} visits from {} sightings; {} of {} observers proficient; {} confirmed cells",
        report.visits,
        report.sightings,
        report.proficient_observers,
        report.observers,
        report.confirmed_cells
    );
    let details = serde_json::to_value(&report)?;
    finish(cfg, "prepare", 0, started, &paths, details, dir.join("prepare_manifest.json"), true)
}

/// Prepared tables read back from disk.
struct Prepared {
    sites: SiteTable,
    visits: Vec<Visit>,
    presence: ConfirmedPresence,
}

fn load_prepared(cfg: &RunConfig) -> Result<Prepared, PipelineError> {
    let dir = cfg.prepared_dir();
    let window = cfg.study_window()?;
    let p = |f: &str| dir.join(f);
    let (sp, mp, vp, ap) = (p(SITES_FILE), p(SITES_META_FILE), p(VISITS_FILE), p(PRESENCE_FILE));
    let sites = ingest::io::read_sites(open(&sp)?, open(&mp)?).map_err(ingest_err(&sp))?;
    let visits = ingest::io::read_visits(open(&vp)?).map_err(ingest_err(&vp))?;
    let presence = ingest::io::read_presence(open(&ap)?, sites.n_sites(), window.first_year(), window.n_years())
        .map_err(ingest_err(&ap))?;
    Ok(Prepared {
        sites,
        visits,
        presence,
    })
}

fn build_model(cfg: &RunConfig, data: &Prepared) -> Result<OccupancyModel, PipelineError> {
    if data.visits.is_empty() {
        return Err(PipelineError::Config("prepared data contain no visits".into()));
    }
    Ok(OccupancyModel::new(&data.sites, &data.visits, &data.presence, cfg.model.clone())?)
}

/// Draw file of chain `chain` (0-based) of a fit.
pub fn draws_path(cfg: &RunConfig, chain: usize) -> PathBuf {
    cfg.fit_dir().join(format!("draws_chain_{}.csv", chain + 1))
}

fn write_param_summary(path: &Path, summary: &[ParamSummary]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| PipelineError::Sampler(e.into());
    w.write_record(["param", "mean", "sd", "q025", "q50", "q975", "rhat", "ess_bulk"])
        .map_err(wrap)?;
    for s in summary {
        w.write_record([
            s.name.clone(),
            s.mean.to_string(),
            s.sd.to_string(),
            s.q025.to_string(),
            s.q50.to_string(),
            s.q975.to_string(),
            s.rhat.to_string(),
            s.ess_bulk.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

/// Summary and diagnostics, or `None` when there are too few draws.
fn diagnose_draws(draws: &PosteriorDraws) -> Option<(Vec<ParamSummary>, FitDiagnostics)> {
    match draws.summary() {
        Ok(s) => {
            let d = FitDiagnostics::new(draws, &s);
            Some((s, d))
        }
        Err(e) => {
            log::warn!("diagnostics unavailable: {e}");
            None
        }
    }
}

fn convergence_verdict(cfg: &RunConfig, diag: &Option<(Vec<ParamSummary>, FitDiagnostics)>) -> bool {
    let Some((_, d)) = diag else {
        return !cfg.strict;
    };
    log::info!(
        "max R-hat {:.4} ({}), min bulk ESS {:.0}, {} of {} transitions divergent",
        d.max_rhat,
        d.worst_param,
        d.min_ess_bulk,
        d.divergences,
        d.total_draws
    );
    if d.passes() {
        return true;
    }
    log::warn!(
        "convergence check failed: R-hat must stay below {RHAT_LIMIT} and divergences at most {}%",
        DIVERGENCE_LIMIT * 100.0
    );
    !cfg.strict
}

/// Builds the model from the prepared tables, samples it and writes one
/// draw file per chain.
pub fn cmd_fit(cfg: &RunConfig) -> Result<CommandOutcome, PipelineError> {
    let started = Instant::now();
    let data = load_prepared(cfg)?;
    let model = build_model(cfg, &data)?;
    log::info!(
        "model with {} parameters: {} sites, {} years, {} observers, {} visits",
        model.layout().dim,
        model.dims().n_sites,
        model.dims().n_years,
        model.dims().n_observers,
        data.visits.len()
    );
    let draws = nuts_run(&model, &cfg.sampler)?;
    let mut outputs = Vec::new();
    for (k, chain) in draws.chains.iter().enumerate() {
        let path = draws_path(cfg, k);
        let mut w = create(&path)?;
        draws_io::write_draws(&mut w, &draws.names, chain)?;
        w.flush().map_err(io_err(&path))?;
        outputs.push(path);
    }
    let diag = diagnose_draws(&draws);
    if let Some((summary, _)) = &diag {
        let path = cfg.fit_dir().join("diagnostics.csv");
        write_param_summary(&path, summary)?;
        outputs.push(path);
    }
    let passed = convergence_verdict(cfg, &diag);
    let chains: Vec<serde_json::Value> = draws
        .chains
        .iter()
        .map(|c| {
            serde_json::json!({
                "step_size": c.step_size,
                "divergences": c.divergences(),
                "warmup_divergences": c.warmup_divergences,
                "inv_metric": c.inv_metric,
            })
        })
        .collect();
    let details = serde_json::json!({
        "dim": model.layout().dim,
        "diagnostics": diag.as_ref().map(|d| &d.1),
        "chains": chains,
    });
    let manifest = cfg.fit_dir().join("fit_manifest.json");
    finish(cfg, "fit", cfg.sampler.seed, started, &outputs, details, manifest, passed)
}

/// Reads every `draws_chain_{k}.csv` of a fit, in chain order.
pub fn read_fit_draws(cfg: &RunConfig) -> Result<PosteriorDraws, PipelineError> {
    let mut names: Option<Vec<String>> = None;
    let mut chains = Vec::new();
    loop {
        let path = draws_path(cfg, chains.len());
        if !path.exists() {
            break;
        }
        let (n, chain) = draws_io::read_draws(open(&path)?)?;
        if names.as_ref().is_some_and(|prev| *prev != n) {
            return Err(PipelineError::Config(format!(
                "{}: parameter columns differ from chain 1",
                path.display()
            )));
        }
        names = Some(n);
        chains.push(chain);
    }
    match names {
        Some(names) => Ok(PosteriorDraws { names, chains }),
        None => Err(PipelineError::Io {
            path: draws_path(cfg, 0),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no draw files; run `fit` first"),
        }),
    }
}

fn check_nested<'s>(what: &str, summaries: impl IntoIterator<Item = &'s Summary>) -> Result<(), PipelineError> {
    for s in summaries {
        if !s.is_nested() {
            return Err(PosteriorError::Contract(format!("{what}: credible intervals are not nested")).into());
        }
    }
    Ok(())
}

/// Writes every posterior summary as a CSV in `summary/`.
pub fn cmd_summarize(cfg: &RunConfig) -> Result<CommandOutcome, PipelineError> {
    let started = Instant::now();
    let data = load_prepared(cfg)?;
    let model = build_model(cfg, &data)?;
    let draws = read_fit_draws(cfg)?;
    if draws.names != model.layout().names() {
        return Err(PipelineError::Config(
            "draw files do not match the model built from the prepared data".into(),
        ));
    }
    let post = Posterior::from_draws(&model, &data.sites, &draws)?;
    let dir = cfg.summary_dir();
    let mut outputs = Vec::new();
    let mut out = |name: String| -> Result<BufWriter<File>, PipelineError> {
        let path = dir.join(name);
        let w = create(&path)?;
        outputs.push(path);
        Ok(w)
    };

    for year in post.years() {
        let map = post.occupancy_map(year)?;
        check_nested("occupancy map", map.iter().map(|m| &m.summary))?;
        output::write_occupancy_map(out(format!("occupancy_map_{year}.csv"))?, &data.sites, &map)?;
    }
    let mut regions = vec![("all".to_string(), (0..data.sites.n_sites()).collect::<Vec<_>>())];
    regions.extend(cfg.regions.iter().map(|r| (r.name.clone(), r.sites.clone())));
    for (name, subset) in &regions {
        let trend = post.fraction_occupied_trend(name, subset, cfg.trend_mode)?;
        check_nested("trend", &trend.summaries)?;
        output::write_trend(out(format!("trend_{name}.csv"))?, &trend)?;
    }
    let phen = post.phenology_curve();
    check_nested("phenology", &phen.weeks)?;
    output::write_phenology(out("phenology.csv".into())?, &phen)?;
    output::write_observers(out("observers.csv".into())?, &post.observer_distribution())?;
    let classes = post.list_length_effect();
    check_nested("list length", classes.iter().map(|c| &c.summary))?;
    output::write_list_length(out("list_length.csv".into())?, &classes)?;
    let effects = post.all_covariate_effects()?;
    check_nested("covariate effects", effects.iter().flat_map(|e| e.points.iter().map(|p| &p.summary)))?;
    output::write_covariate_effects(out("covariate_effects.csv".into())?, &effects)?;
    output::write_trend_slopes(out("trend_slopes.csv".into())?, &data.sites, &post.trend_slope_map())?;
    output::write_covariate_support(out("covariate_support.csv".into())?, &post.covariate_support())?;

    let details = serde_json::json!({
        "draws": post.n_draws(),
        "trend_mode": cfg.trend_mode,
        "regions": regions.iter().map(|r| &r.0).collect::<Vec<_>>(),
    });
    let seed = match cfg.trend_mode {
        crate::posterior::TrendMode::Realized { seed } => seed,
        crate::posterior::TrendMode::Expected => cfg.sampler.seed,
    };
    let manifest = dir.join("summarize_manifest.json");
    finish(cfg, "summarize", seed, started, &outputs, details, manifest, true)
}

/// Recomputes convergence diagnostics from the draw files. When the output
/// directory holds a simulation truth, also reports parameter recovery.
pub fn cmd_diagnose(cfg: &RunConfig) -> Result<CommandOutcome, PipelineError> {
    let started = Instant::now();
    let draws = read_fit_draws(cfg)?;
    let dir = cfg.diagnostics_dir();
    let mut outputs = Vec::new();
    let diag = diagnose_draws(&draws);
    if let Some((summary, _)) = &diag {
        let path = dir.join("diagnostics.csv");
        write_param_summary(&path, summary)?;
        outputs.push(path);
    }

    let path = dir.join("chains.csv");
    {
        let mut w = csv::Writer::from_writer(create(&path)?);
        let wrap = |e: csv::Error| PipelineError::Sampler(e.into());
        w.write_record([
            "chain",
            "draws",
            "step_size",
            "mean_accept_stat",
            "mean_treedepth",
            "max_treedepth",
            "divergences",
        ])
        .map_err(wrap)?;
        for (k, c) in draws.chains.iter().enumerate() {
            let n = c.n_draws().max(1) as f64;
            w.write_record([
                (k + 1).to_string(),
                c.n_draws().to_string(),
                c.step_size.to_string(),
                (c.stats.iter().map(|s| s.accept_stat).sum::<f64>() / n).to_string(),
                (c.stats.iter().map(|s| s.tree_depth as f64).sum::<f64>() / n).to_string(),
                c.stats.iter().map(|s| s.tree_depth).max().unwrap_or(0).to_string(),
                c.divergences().to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    outputs.push(path);

    let mut recovery = None;
    let truth_path = cfg.paths.output_dir.join(TRUTH_FILE);
    if truth_path.exists() && diag.is_some() {
        #[derive(Deserialize)]
        struct TruthFile {
            truth: TruthRecord,
        }
        let t: TruthFile = serde_json::from_reader(open(&truth_path)?)?;
        let data = load_prepared(cfg)?;
        let model = build_model(cfg, &data)?;
        let report = recovery_report(&model, &draws, &t.truth.state)?;
        let path = dir.join("recovery.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        let wrap = |e: csv::Error| PipelineError::Sampler(e.into());
        w.write_record(["param", "truth", "mean", "q025", "q975", "covers", "rhat", "ess_bulk"])
            .map_err(wrap)?;
        for r in &report.rows {
            w.write_record([
                r.name.clone(),
                r.truth.to_string(),
                r.mean.to_string(),
                r.q025.to_string(),
                r.q975.to_string(),
                (r.covers as u8).to_string(),
                r.rhat.to_string(),
                r.ess_bulk.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(io_err(&path))?;
        outputs.push(path);
        recovery = Some(report.rows.iter().filter(|r| r.covers).count());
    }

    let passed = convergence_verdict(cfg, &diag);
    let details = serde_json::json!({
        "diagnostics": diag.as_ref().map(|d| &d.1),
        "recovery_rows_covered": recovery,
    });
    let manifest = dir.join("diagnose_manifest.json");
    finish(cfg, "diagnose", cfg.sampler.seed, started, &outputs, details, manifest, passed)
}
