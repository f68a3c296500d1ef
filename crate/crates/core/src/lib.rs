//! Mixed-norm penalized empirical risk minimization for matrix prediction.
//!
//! Observations `(X_i, Y_i)` with `m x T` covariates are fit by
//!
//! ```text
//! A_hat in argmin_A  (1/n) sum_i (Y_i - <X_i, A>)^2
//!                    + l1 ||A||_{S1} + l2 ||A||_{S2}^2 + l3 ||A||_1
//! ```
//!
//! The crate also provides the sampling designs (matrix completion,
//! multitask), the theoretical regularization levels, and a Monte-Carlo
//! harness that checks the oracle inequalities against exact population
//! risks.

pub mod design;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod prox;
mod quad;
pub mod rng;
pub mod solver;
pub mod tuning;

pub use design::{
    completion_design, generate_dataset, multitask_design, noise_constants, Covariate, Dataset,
    DesignDistribution, NoiseConstants, NoiseModel,
};
pub use error::{Error, Result};
pub use harness::{
    dimension_free_experiment, excess_risk, oracle_rhs, population_risk, rate_experiment, verify_bernstein,
    verify_oracle_inequality, ExperimentReport, OracleProblem,
};
pub use linalg::{RealMatrix, SchattenIndex};
pub use prox::{BallSpec, PenaltyConfig};
pub use solver::{fit, SolverOptions, SolverResult};
pub use tuning::{Theorem, TheoremConstants, TheoremParams};


