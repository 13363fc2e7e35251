//! Bayesian spatiotemporal site-occupancy modelling of opportunistic
//! sightings, with a built-in No-U-Turn sampler.

mod error;

pub mod gp;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod posterior;
pub mod sampler;
pub mod sim;

pub use error::{GpError, IngestError, ModelError, PipelineError, PosteriorError, SamplerError, SimError};
