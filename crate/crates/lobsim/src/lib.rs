//! Numerical laboratory for optimal exchange incentives in a limit order
//! book whose density follows a controlled stochastic PDE.
//!
//! The crate computes the adjoint value of standing volume three independent
//! ways (closed form, finite differences, exit-time Monte Carlo), derives the
//! optimal incentive schedule from the first-order condition, simulates the
//! controlled book with correlated multiplicative noise, and runs the
//! parameter-sensitivity experiment suite with reproducible seeding.

pub mod config;
pub mod error;
pub mod incentive;
pub mod model;
pub mod report;
pub mod rng;
pub mod scenarios;
pub mod simulator;
pub mod tridiag;
pub mod validate;
pub mod value;

pub use error::{Error, Result};
pub use model::{
    intensity_dz, intensity_eval, penalty_dz, penalty_eval, per_limit_rate, per_limit_rate_with,
    validate_params, BookParams, IntensityModel, IntensityParams, LimitConvention, ModelBundle,
    PenaltyModel, PenaltyParams, SideParams,
};
pub use incentive::{
    foc_solve, hamiltonian, incentive_schedule, per_limit_incentive_table, stationary_incentive,
    IncentiveSchedule, LimitTable, TableConvention,
};
pub use simulator::{
    ensemble_average, estimate_objective, objective_samples, simulate_book,
    simulate_book_indexed, simulate_book_recorded, BookState, EnsembleStats, ObjectiveEstimate,
    SimGrid,
};
pub use value::{
    feynman_kac_estimate, solve_value_pde, stationary_coefficients, ConvectionScheme,
    ExitTimeEstimate, StationaryValue, ValueField,
};
