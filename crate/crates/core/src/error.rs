use thiserror::Error;

/// Errors raised while turning raw sightings into model inputs.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("point ({x}, {y}) lies outside the grid extent")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("covariate table: {0}")]
    Covariates(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Numerical and contract failures in the Gaussian-process and spline layer.
#[derive(Debug, Error)]
pub enum GpError {
    #[error("invalid kernel parameters: sigma={sigma}, length_scale={length_scale}")]
    InvalidKernel { sigma: f64, length_scale: f64 },
    #[error("matrix is not positive definite even with jitter {max_jitter:e} (diag range [{min_diag:e}, {max_diag:e}], size {size})")]
    NotPositiveDefinite {
        max_jitter: f64,
        min_diag: f64,
        max_diag: f64,
        size: usize,
    },
    #[error("coordinate {x} outside the knot span [{lo}, {hi}]")]
    OutOfSpan { x: f64, lo: f64, hi: f64 },
    #[error("cubic spline surfaces need at least 4 basis functions per axis, got {0}")]
    TooFewBasis(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Failures while building or evaluating the occupancy posterior.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("data inconsistency: {0}")]
    Data(String),
    #[error("non-finite log density in {0}")]
    NonFinite(String),
    #[error("dimension mismatch: expected {expected} parameters, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Sampler failures and diagnostics problems.
#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("initialization failed after {attempts} attempts: {reason}")]
    Initialization { attempts: usize, reason: String },
    #[error("step size search failed: {0}")]
    StepSize(String),
    #[error("diagnostics need at least {chains} chains of {draws} draws")]
    TooFewDraws { chains: usize, draws: usize },
    #[error("draws file: {0}")]
    Format(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors from derived posterior summaries.
#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate composition: mean fraction of `{0}` equals 1")]
    DegenerateComposition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Failures while simulating data or running a recovery experiment.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid design: {0}")]
    Design(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Failures of the command-line pipeline. All of them are usage or data
/// problems and map to exit code 2.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Ingest { context: String, source: IngestError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
