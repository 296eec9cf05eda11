//! Temporal dependence of hourly PV power: quantile-regression marginals,
//! Gaussian and R-vine copulas, scenarios, multivariate prediction
//! intervals and their scores.

pub mod bicop;
pub mod config;
pub mod copula;
pub mod data_io;
pub mod error;
pub mod gaussian_copula;
pub mod marginals;
pub mod mpi;
pub mod pipeline;
pub mod rvine;
pub mod scenarios;
pub mod scoring;
pub mod seeds;
pub mod special;

pub use config::{CopulaChoice, RunConfig};
pub use copula::{Copula, CopulaKind};
pub use data_io::DayMatrix;
pub use error::{Error, Result};
pub use gaussian_copula::GaussianCopulaModel;
pub use marginals::{MarginalModel, QuantileCurve};
pub use mpi::{Mpi, MpiSet};
pub use pipeline::Report;
pub use rvine::RVineModel;
pub use scenarios::ScenarioSet;
pub use scoring::ScoreReport;
