//! Nonlinear electrical impedance tomography with elastic-net
//! regularization.

pub mod baselines;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod forward;
pub mod inversion;
pub mod mesh;
pub mod sparsity;

pub use error::{Error, Result};
pub use exec::Exec;
