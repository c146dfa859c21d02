//! Penalized Poisson likelihood and its accelerated proximal solver.

pub mod fista;
pub mod kkt;
pub mod objective;
mod polish;
pub mod prox;

pub use fista::{fit_fista, FitOptions, FitResult};
pub use kkt::{kkt_from_gradient, kkt_residuals, KktResiduals};
pub use objective::{neg_log_likelihood, nll, objective_grad, penalty, score_residual, DEFAULT_MU_FLOOR};
pub use prox::prox_step;
