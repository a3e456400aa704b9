//! Time-delayed dynamic mode decomposition of periodic orbits in the
//! Earth–Moon circular restricted three-body problem.
//!
//! The crate covers the whole pipeline: propagating reference trajectories,
//! Hankel embedding and delay selection, exact DMD fitting and prediction,
//! spectral summaries, hyperplane-crossing period checks, and a config
//! driven experiment runner. [`ar_oracle`] is an independent implementation
//! of the Fourier/autoregressive theory used to cross-check the DMD results.

pub mod ar_oracle;
pub mod cr3bp;
pub mod dmd;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod linalg;
pub mod spectral;
pub mod validation;

pub use cr3bp::{StateVector, SystemConstants, Trajectory};
pub use dmd::{DmdModel, Truncation};
pub use error::{Error, Result};

pub use faer;
pub use num_complex::Complex64;
