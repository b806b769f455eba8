//! Finite-horizon distributionally robust Markov decision processes.
//!
//! A controller picks actions on a discretized real state space while nature
//! picks, stage by stage, the law of the disturbance from an ambiguity set
//! given by density generators or by a spectral risk measure. The crate
//! solves the resulting game by robust backward induction, evaluates fixed
//! policies, checks the answers against exhaustive enumeration, and provides
//! diagnostics for stochastic-order reductions, bounding functions and the
//! interchange of the two players' moves.
//!
//! ```
//! use robust_mdp::{game::build_counterexample, solver::solve_robust};
//!
//! let ce = build_counterexample(0.5).unwrap();
//! let j = solve_robust(&ce.model).unwrap();
//! assert!((j.values[0][0] + 0.25).abs() < 1e-12);
//! ```

pub mod ambiguity;
pub mod apps;
pub mod bounds;
pub mod distribution;
pub mod error;
pub mod game;
pub mod model;
pub mod risk;
pub mod schema;
pub mod solver;

use serde::{Deserialize, Serialize};

pub use ambiguity::{AmbiguityKind, AmbiguitySet, Density, Direction, QExponent};
pub use distribution::DiscreteDistribution;
pub use error::{Error, Result, Violation};
pub use model::{
    project_to_grid, validate, ActionSet, Builtin, FiniteDisturbance, FiniteRobustMDP, Stage, StageDynamics,
    StateGrid,
};
pub use risk::Spectrum;
pub use solver::{
    evaluate_pair, evaluate_robust_policy, solve_nature_first, solve_robust, MarkovControllerPolicy,
    MarkovNaturePolicy, NatureChoice, SolveResult,
};

/// The numeric tolerances in force, as reported alongside results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Argmin/argmax tie breaking.
    pub tie: f64,
    /// `<=_st` CDF comparisons.
    pub order: f64,
    /// `<=_cx` mean and stop-loss comparisons.
    pub convex_order: f64,
    /// Bounding envelope.
    pub envelope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tie: ambiguity::TIE_TOL,
            order: ambiguity::ORDER_TOL,
            convex_order: ambiguity::CX_TOL,
            envelope: bounds::ENVELOPE_TOL,
        }
    }
}
