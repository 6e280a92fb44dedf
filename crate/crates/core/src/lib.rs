//! Nash equilibria of discrete-time two-player LQG games in which player 2
//! has a private sensor and player 1 receives it with a one-step delay.
//!
//! Modules, bottom-up: [`model`] (problem data and validation), [`riccati`]
//! (backward and steady control recursions), [`filter`] (the two
//! estimators), [`equilibrium`] (strategy profiles and closed-form costs),
//! [`montecarlo`] (simulation, exact second moments and Nash
//! certificates) and [`export`] (CSV writers).

pub mod equilibrium;
pub mod error;
pub mod export;
pub mod filter;
pub mod fixtures;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod riccati;

pub use equilibrium::{
    analytic_cost_asym, analytic_cost_sym, apply_strategy, gap_decomposition, nash_profile, steady_profile,
    symmetric_profile, Actions, CostReport, GapReport, ProfileKind, StrategyProfile,
};
pub use error::{GameError, Result};
pub use filter::{covariance_forward, covariance_gap, filter_step, steady_covariances, CovarianceSchedule, FilterState};
pub use linalg::{Mat, Vector};
pub use model::{
    augment, load_spec, load_spec_file, paper_example, serialize_spec, validate, AugmentedModel, CostWeights,
    InfoStructure, ProblemSpec, SystemModel, ValidationReport,
};
pub use montecarlo::{
    best_response_certificate, estimate_costs, moment_oracle, orthogonality_stats, simulate, ClosedLoop, CostEstimate,
    NashCertificate, OrthogonalityStats, Trajectory,
};
pub use riccati::{backward, forward_steady, RiccatiTrajectory, SteadyOptions, SteadyRiccati};
