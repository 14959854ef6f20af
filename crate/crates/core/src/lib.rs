//! Random walks in random scenery: stable scenery laws, walk local times,
//! the `Ψ` series, limit constants and kernel estimators.

pub mod error;
pub mod kernel_estimator;
pub mod psi_series;
pub mod quadrature;
pub mod renewal_constants;
pub mod rng;
pub mod rwrs;
pub mod special;
pub mod stable_laws;
pub mod stats;
pub mod walk_paths;

pub use error::{Error, Result};
