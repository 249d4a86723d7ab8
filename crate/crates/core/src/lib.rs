//! Monte Carlo and quadrature laboratory for integrated functions of spatial
//! increments of Brownian local time.
//!
//! The pipeline is: simulate a path ([`path_engine`]), estimate its local-time
//! field ([`local_time`]), evaluate the increment statistic and its centering
//! and studentizer ([`statistics`]) using Gaussian limit quantities
//! ([`gaussian_theory`]) for a test function ([`functionals`]), and aggregate
//! over many paths ([`experiments`]).

pub mod error;
pub mod exec;
pub mod experiments;
pub mod functionals;
pub mod gaussian_theory;
pub mod local_time;
pub mod numeric;
pub mod path_engine;
pub mod statistics;

pub use error::{LabError, Result};
