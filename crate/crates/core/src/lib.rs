//! Age-of-information sampling and preemption under general service times.
//!
//! The library covers service-time distributions, the discretisation grids,
//! the policy-iteration solver, the zero-wait and no-preemption baselines,
//! and a Monte Carlo simulator of the closed-loop system.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod distributions;
pub mod grids;
pub mod quadrature;
pub mod report;
pub mod simulator;
pub mod solver;

pub use distributions::{DistributionError, Moments, ServiceDistribution};
pub use grids::{GridError, GridSpec, Grids, Theta, ThetaMax};
pub use solver::{SolvedPolicy, SolverConfig, SolverError, StationaryPolicy};
