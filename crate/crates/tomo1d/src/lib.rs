//! Network tomography from one-dimensional linear projections.

pub mod cf_gmm;
pub mod cli;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod identifiability;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod seed;
pub mod simulate;
pub mod topology;

pub mod estimators;
mod optimize;
mod simplex_qp;

pub use error::{Result, TomoError};
