//! Unconstrained parameterisation, marginalised likelihood, priors and the
//! exact gradient of the joint log posterior.

mod density;
mod gp_block;
mod layout;
mod likelihood;
mod prior;
mod transform;

pub use density::{log_prior, probabilities, Components, ModelOptions, OccupancyModel};
pub use layout::{ModelDims, ModelState, ParamLayout, N_WEEKS};
pub use likelihood::{site_year_loglik, Cell, LikelihoodIndex};
pub use prior::{half_normal_log, inv_gamma_log, normal, uniform_logit, zero_sum_sd};
pub use transform::{log1m, log_sum_exp, logistic, logit, softplus, sum_to_zero_transform};
