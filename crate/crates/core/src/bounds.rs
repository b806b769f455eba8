//! Bounding functions and the geometric value envelope they imply.
//!
//! A pair `(lb, ub)` with `lb <= -eps_l`, `ub >= eps_u`, `eps_l + eps_u = 1`
//! bounds the model with rate `alpha` when, for every stage, admissible
//! `(x, a)` and every `Q` in the ambiguity set,
//!
//! ```text
//! E^Q[min(c, 0)] >= lb(x)      E^Q[lb(X')] >= alpha lb(x)
//! E^Q[max(c, 0)] <= ub(x)      E^Q[ub(X')] <= alpha ub(x)
//! lb <= c_N <= ub
//! ```
//!
//! Every policy pair's value then lies between `f_n lb(x)` and `f_n ub(x)`
//! with `f_n = (1 - alpha^(N+1-n)) / (1 - alpha)`.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{best_generator, AmbiguityKind, QExponent};
use crate::distribution::DiscreteDistribution;
use crate::error::Violation;
use crate::model::FiniteRobustMDP;
use crate::risk::spectral_rho;

/// Local domination of the costs is vacuous on finite supports.
pub const LOCAL_DOMINATION_NOTE: &str = "auto-satisfied (finite support)";

/// Tolerance of [`check_envelope`].
pub const ENVELOPE_TOL: f64 = 1e-9;

const CHECK_TOL: f64 = 1e-12;

fn half() -> f64 {
    0.5
}

fn infinity() -> QExponent {
    QExponent::Infinity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingData {
    /// `lb(x)` on the state grid.
    pub lower: Vec<f64>,
    /// `ub(x)` on the state grid.
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub norm_bound: f64,
    #[serde(default = "infinity")]
    pub q: QExponent,
    #[serde(default = "half")]
    pub eps_lower: f64,
    #[serde(default = "half")]
    pub eps_upper: f64,
}

impl BoundingData {
    /// `(1 - alpha^(N+1-n)) / (1 - alpha)`.
    pub fn envelope_factor(&self, horizon: usize, n: usize) -> f64 {
        let k = (horizon + 1 - n) as i32;
        (1.0 - self.alpha.powi(k)) / (1.0 - self.alpha)
    }
}

fn leq(a: f64, b: f64) -> bool {
    a <= b + CHECK_TOL * (1.0 + b.abs())
}

/// `sup_Q E^Q[payoff]` over what nature may use at `(n, s, a)`.
fn sup_at(model: &FiniteRobustMDP, n: usize, s: usize, a: usize, payoff: &[f64]) -> f64 {
    let stage = &model.stages[n];
    let probs = &stage.disturbance.probs;
    match &stage.ambiguity.kind {
        AmbiguityKind::Generators(g) => best_generator(g, stage.generators_at(s, a), payoff, probs).0,
        AmbiguityKind::Spectral(phi) => spectral_rho(&DiscreteDistribution::from_parts(payoff, probs), phi),
    }
}

fn norm(weights: &[f64], probs: &[f64], q: QExponent) -> f64 {
    match q {
        QExponent::Infinity => weights
            .iter()
            .zip(probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&y, _)| y.abs())
            .fold(0.0, f64::max),
        QExponent::Finite(q) => weights
            .iter()
            .zip(probs)
            .map(|(&y, &p)| p * y.abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q),
    }
}

/// Every violated bounding condition, by stage, state and action. Assumes a
/// model that passes validation.
pub fn check_bounding(model: &FiniteRobustMDP, data: &BoundingData) -> Vec<Violation> {
    let mut out = Vec::new();
    let num_states = model.num_states();
    let horizon = model.horizon;

    if !(data.alpha >= 0.0) {
        out.push(Violation::global(format!("alpha = {} must be nonnegative", data.alpha)));
    }
    if data.alpha == 1.0 {
        out.push(Violation::global("alpha = 1 is excluded"));
    }
    if !(data.eps_lower >= 0.0 && data.eps_upper >= 0.0) || (data.eps_lower + data.eps_upper - 1.0).abs() > CHECK_TOL {
        out.push(Violation::global("eps_lower and eps_upper must be nonnegative and sum to 1"));
    }
    if !(data.norm_bound >= 1.0) {
        out.push(Violation::global(format!("norm bound {} must be at least 1", data.norm_bound)));
    }
    if let QExponent::Finite(q) = data.q {
        if !(q > 1.0) {
            out.push(Violation::global(format!("q = {q} must exceed 1")));
        }
    }
    if data.lower.len() != num_states || data.upper.len() != num_states {
        out.push(Violation::global("bounding functions must have one value per state"));
        return out;
    }
    for s in 0..num_states {
        if !leq(data.lower[s], -data.eps_lower) {
            out.push(Violation::at_state(horizon, s, "lower bound exceeds -eps_lower"));
        }
        if !leq(data.eps_upper, data.upper[s]) {
            out.push(Violation::at_state(horizon, s, "upper bound is below eps_upper"));
        }
        let c = model.terminal_cost[s];
        if !leq(data.lower[s], c) || !leq(c, data.upper[s]) {
            out.push(Violation::at_state(horizon, s, "terminal cost outside [lower, upper]"));
        }
    }

    for (n, stage) in model.stages.iter().enumerate() {
        let probs = &stage.disturbance.probs;
        match &stage.ambiguity.kind {
            AmbiguityKind::Generators(gens) => {
                for (k, g) in gens.iter().enumerate() {
                    let nrm = norm(g.weights(), probs, data.q);
                    if !leq(nrm, data.norm_bound) {
                        out.push(Violation::at_stage(
                            n,
                            format!("generator {k} has norm {nrm}, above the bound {}", data.norm_bound),
                        ));
                    }
                }
            }
            AmbiguityKind::Spectral(phi) => {
                // Every density of the set is E[phi(U) | X], whose q-norm is at
                // most that of phi.
                let widths: Vec<f64> = phi.breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
                let nrm = norm(&phi.values, &widths, data.q);
                if !leq(nrm, data.norm_bound) {
                    out.push(Violation::at_stage(
                        n,
                        format!("spectrum has norm {nrm}, above the bound {}", data.norm_bound),
                    ));
                }
            }
        }

        for s in 0..num_states {
            let lb = data.lower[s];
            let ub = data.upper[s];
            for &a in &stage.admissible[s] {
                let outcomes = model.outcomes(n, s, a);
                let neg: Vec<f64> = outcomes.iter().map(|o| -o.cost.min(0.0)).collect();
                let pos: Vec<f64> = outcomes.iter().map(|o| o.cost.max(0.0)).collect();
                let neg_lb: Vec<f64> = outcomes.iter().map(|o| -data.lower[o.next]).collect();
                let next_ub: Vec<f64> = outcomes.iter().map(|o| data.upper[o.next]).collect();
                if !leq(lb, -sup_at(model, n, s, a, &neg)) {
                    out.push(Violation::at_action(n, s, a, "expected negative cost part is below the lower bound"));
                }
                if !leq(data.alpha * lb, -sup_at(model, n, s, a, &neg_lb)) {
                    out.push(Violation::at_action(n, s, a, "expected next lower bound is below alpha * lower"));
                }
                if !leq(sup_at(model, n, s, a, &pos), ub) {
                    out.push(Violation::at_action(n, s, a, "expected positive cost part exceeds the upper bound"));
                }
                if !leq(sup_at(model, n, s, a, &next_ub), data.alpha * ub) {
                    out.push(Violation::at_action(n, s, a, "expected next upper bound exceeds alpha * upper"));
                }
            }
        }
    }
    out
}

/// Whether every `values[n][s]` lies in `[f_n lb(x_s), f_n ub(x_s)]` up to
/// [`ENVELOPE_TOL`].
pub fn check_envelope(model: &FiniteRobustMDP, data: &BoundingData, values: &[Vec<f64>]) -> bool {
    let horizon = model.horizon;
    values.len() == horizon + 1
        && values.iter().enumerate().all(|(n, row)| {
            let f = data.envelope_factor(horizon, n);
            row.len() == data.lower.len()
                && row.iter().enumerate().all(|(s, &v)| {
                    v >= f * data.lower[s] - ENVELOPE_TOL && v <= f * data.upper[s] + ENVELOPE_TOL
                })
        })
}
