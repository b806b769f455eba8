//! Robust backward induction and policy evaluation.
//!
//! The controller moves first at every stage and nature answers each action
//! with a worst-case law from the (possibly masked) ambiguity set:
//!
//! ```text
//! J_N(x)   = c_N(x)
//! J_n(x)   = min_{a in D_n(x)} sup_{Q in Q_{n+1}} E^Q[ c_n(x, a, X') + J_{n+1}(X') ]
//! ```
//!
//! Deterministic Markov policies suffice for both players, so the optimal
//! pair is read off the minimizers and maximizers of the recursion.
//! [`solve_nature_first`] solves the game in which nature commits to a law
//! before the controller acts.

mod oracle;

pub use oracle::{oracle_history_value, oracle_min_max, OracleResult, DEFAULT_ENUMERATION_CAP};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{best_generator, AmbiguityKind, Density, TIE_TOL};
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::game::matrix_game_lower_value;
use crate::model::{FiniteRobustMDP, Outcome, Stage};
use crate::risk::{comonotone_density_for, ordering_generators, spectral_rho};

/// Largest support for which a spectral set is expanded into its `m!`
/// ordering generators in the nature-first game.
pub const MAX_SPECTRAL_EXPANSION: usize = 6;

/// `d_n(x_s)` as an action index, per stage and state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovControllerPolicy {
    pub actions: Vec<Vec<usize>>,
}

/// What nature plays at one `(n, s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum NatureChoice {
    Generator(usize),
    /// Convex weights over the stage's generators.
    Mixture(Vec<f64>),
    /// The density comonotone with the payoff (spectral sets).
    Comonotone(Density),
    /// Any other fixed density.
    Density(Density),
}

impl NatureChoice {
    pub fn density(&self, stage: &Stage) -> Result<Density> {
        let gens = stage.ambiguity.as_generators();
        match self {
            NatureChoice::Generator(k) => gens
                .and_then(|g| g.get(*k))
                .cloned()
                .ok_or_else(|| Error::MalformedPolicy(format!("generator {k} does not exist"))),
            NatureChoice::Mixture(w) => {
                let g = gens.ok_or_else(|| Error::MalformedPolicy("mixture over a spectral set".into()))?;
                if w.len() != g.len() || w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::MalformedPolicy("mixture weights must be a probability vector".into()));
                }
                Ok(Density::mixture(g, w))
            }
            NatureChoice::Comonotone(d) | NatureChoice::Density(d) => Ok(d.clone()),
        }
    }

    /// Generator indices carrying positive weight.
    fn generators_used(&self) -> Vec<usize> {
        match self {
            NatureChoice::Generator(k) => vec![*k],
            NatureChoice::Mixture(w) => (0..w.len()).filter(|&k| w[k] > 0.0).collect(),
            _ => Vec::new(),
        }
    }
}

/// Nature's decision rule, indexed `[n][s][a]`; `None` where `a` is not
/// admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovNaturePolicy {
    pub choices: Vec<Vec<Vec<Option<NatureChoice>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// `(N + 1) x S` value table; the last row is the terminal cost.
    pub values: Vec<Vec<f64>>,
    pub controller: MarkovControllerPolicy,
    pub nature: MarkovNaturePolicy,
    /// Nature's choice at the controller's action, per `(n, s)`.
    pub witnesses: Vec<Vec<NatureChoice>>,
}

impl SolveResult {
    pub(crate) fn new(values: Vec<Vec<f64>>, controller: MarkovControllerPolicy, nature: MarkovNaturePolicy) -> Self {
        let witnesses = controller
            .actions
            .iter()
            .zip(&nature.choices)
            .map(|(acts, nat)| {
                acts.iter()
                    .zip(nat)
                    .map(|(&a, row)| row[a].clone().expect("choice recorded at the chosen action"))
                    .collect()
            })
            .collect();
        Self {
            values,
            controller,
            nature,
            witnesses,
        }
    }

    pub fn initial_values(&self) -> &[f64] {
        &self.values[0]
    }
}

/// Model with every admissible `(n, s, a)` expanded into projected outcomes.
pub(crate) struct CompiledModel<'m> {
    model: &'m FiniteRobustMDP,
    outcomes: Vec<Vec<Vec<Option<Vec<Outcome>>>>>,
}

impl<'m> CompiledModel<'m> {
    pub(crate) fn new(model: &'m FiniteRobustMDP) -> Self {
        let outcomes = model
            .stages
            .iter()
            .enumerate()
            .map(|(n, stage)| {
                (0..model.num_states())
                    .into_par_iter()
                    .map(|s| {
                        let mut row = vec![None; stage.actions.len()];
                        for &a in &stage.admissible[s] {
                            row[a] = Some(model.outcomes(n, s, a));
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        Self { model, outcomes }
    }

    pub(crate) fn outcomes(&self, n: usize, s: usize, a: usize) -> &[Outcome] {
        self.outcomes[n][s][a].as_deref().expect("admissible action")
    }

    /// `c_n(x_s, a, x'_i) + v_next(x'_i)` per support point.
    pub(crate) fn payoff(&self, n: usize, s: usize, a: usize, v_next: &[f64]) -> Vec<f64> {
        self.outcomes(n, s, a)
            .iter()
            .map(|o| o.cost + v_next[o.next])
            .collect()
    }

    /// Worst case over the (masked) ambiguity set at `(n, s, a)`.
    pub(crate) fn worst_case(&self, n: usize, s: usize, a: usize, v_next: &[f64]) -> (f64, NatureChoice) {
        let stage = &self.model.stages[n];
        let payoff = self.payoff(n, s, a, v_next);
        let probs = &stage.disturbance.probs;
        match &stage.ambiguity.kind {
            AmbiguityKind::Generators(gens) => {
                let (v, k) = best_generator(gens, stage.generators_at(s, a), &payoff, probs);
                (v, NatureChoice::Generator(k))
            }
            AmbiguityKind::Spectral(phi) => {
                let law = DiscreteDistribution::from_parts(&payoff, probs);
                (
                    spectral_rho(&law, phi),
                    NatureChoice::Comonotone(comonotone_density_for(&payoff, probs, phi)),
                )
            }
        }
    }
}

/// Minimum over scored actions; the action is the lowest index within `tol`
/// of the minimum.
pub(crate) fn controller_choice(scored: &[(usize, f64)], tol: f64) -> (f64, usize) {
    let best = scored.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let a = scored
        .iter()
        .filter(|v| v.1 <= best + tol)
        .map(|v| v.0)
        .min()
        .expect("nonempty admissible set");
    (best, a)
}

/// `L_n v(x_s, a, Q) = E^Q[ c_n(x_s, a, x') + v(x') ]` with `x'` the
/// projected next state.
pub fn operator_l(
    model: &FiniteRobustMDP,
    n: usize,
    s: usize,
    a: usize,
    density: &Density,
    v_next: &[f64],
) -> Result<f64> {
    model.check_admissible(n, s, a)?;
    let stage = &model.stages[n];
    if density.len() != stage.disturbance.len() {
        return Err(Error::InvalidArgument("density length differs from the support size".into()));
    }
    if v_next.len() != model.num_states() {
        return Err(Error::InvalidArgument("continuation value length differs from the state count".into()));
    }
    let payoff: Vec<f64> = model
        .outcomes(n, s, a)
        .iter()
        .map(|o| o.cost + v_next[o.next])
        .collect();
    Ok(density.expectation(&payoff, &stage.disturbance.probs))
}

/// Controller-first robust backward induction.
pub fn solve_robust(model: &FiniteRobustMDP) -> Result<SolveResult> {
    model.ensure_valid()?;
    let compiled = CompiledModel::new(model);
    let horizon = model.horizon;
    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = model.terminal_cost.clone();
    let mut actions = vec![Vec::new(); horizon];
    let mut nature = vec![Vec::new(); horizon];
    for n in (0..horizon).rev() {
        let stage = &model.stages[n];
        let v_next = &values[n + 1];
        let rows: Vec<(f64, usize, Vec<Option<NatureChoice>>)> = (0..model.num_states())
            .into_par_iter()
            .map(|s| {
                let mut choices = vec![None; stage.actions.len()];
                let scored: Vec<(usize, f64)> = stage.admissible[s]
                    .iter()
                    .map(|&a| {
                        let (v, choice) = compiled.worst_case(n, s, a, v_next);
                        choices[a] = Some(choice);
                        (a, v)
                    })
                    .collect();
                let (v, a) = controller_choice(&scored, TIE_TOL);
                (v, a, choices)
            })
            .collect();
        values[n] = rows.iter().map(|r| r.0).collect();
        actions[n] = rows.iter().map(|r| r.1).collect();
        nature[n] = rows.into_iter().map(|r| r.2).collect();
    }
    Ok(SolveResult::new(
        values,
        MarkovControllerPolicy { actions },
        MarkovNaturePolicy { choices: nature },
    ))
}

/// Nature-first game: at each state nature commits to a law from the convex
/// hull of the generators, then the controller best-responds.
///
/// ```text
/// J~_n(x) = max_{Q in conv(Q_{n+1})} min_{a in D_n(x)} L_n J~_{n+1}(x, a, Q)
/// ```
///
/// The inner problem is a finite matrix game (actions x generators) solved as
/// a linear program. Spectral sets are expanded into their ordering
/// generators when the support has at most [`MAX_SPECTRAL_EXPANSION`] points.
/// Generator masks must not depend on the action, since nature moves before
/// seeing it.
///
/// The returned controller is the best response to nature's committed law and
/// the nature policy repeats that law for every admissible action.
pub fn solve_nature_first(model: &FiniteRobustMDP) -> Result<SolveResult> {
    model.ensure_valid()?;
    let compiled = CompiledModel::new(model);
    let horizon = model.horizon;
    let num_states = model.num_states();

    let families: Vec<Option<Vec<Density>>> = model
        .stages
        .iter()
        .enumerate()
        .map(|(n, stage)| match &stage.ambiguity.kind {
            AmbiguityKind::Generators(_) => Ok(None),
            AmbiguityKind::Spectral(phi) => {
                let m = stage.disturbance.len();
                if m > MAX_SPECTRAL_EXPANSION {
                    Err(Error::Unsupported(format!(
                        "stage {n}: spectral set on {m} support points is too large to expand for the nature-first game"
                    )))
                } else {
                    Ok(Some(ordering_generators(&stage.disturbance.probs, phi)))
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = model.terminal_cost.clone();
    let mut actions = vec![Vec::new(); horizon];
    let mut nature = vec![Vec::new(); horizon];
    for n in (0..horizon).rev() {
        let stage = &model.stages[n];
        let v_next = &values[n + 1];
        let probs = &stage.disturbance.probs;
        let rows: Vec<Result<(f64, usize, Vec<Option<NatureChoice>>)>> = (0..num_states)
            .into_par_iter()
            .map(|s| {
                let admissible = &stage.admissible[s];
                let (gens, allowed): (&[Density], Vec<usize>) = match (&families[n], &stage.ambiguity.kind) {
                    (Some(expanded), _) => (expanded, (0..expanded.len()).collect()),
                    (None, AmbiguityKind::Generators(g)) => {
                        let allowed = stage.generators_at(s, admissible[0]);
                        if admissible.iter().any(|&a| {
                            let mut other = stage.generators_at(s, a);
                            let mut mine = allowed.clone();
                            other.sort_unstable();
                            mine.sort_unstable();
                            other != mine
                        }) {
                            return Err(Error::Unsupported(format!(
                                "stage {n}, state {s}: generator mask depends on the action"
                            )));
                        }
                        (g, allowed)
                    }
                    (None, AmbiguityKind::Spectral(_)) => unreachable!("spectral stages are expanded"),
                };
                let matrix: Vec<Vec<f64>> = admissible
                    .iter()
                    .map(|&a| {
                        let payoff = compiled.payoff(n, s, a, v_next);
                        allowed.iter().map(|&k| gens[k].expectation(&payoff, probs)).collect()
                    })
                    .collect();
                let (value, local_weights) = matrix_game_lower_value(&matrix)?;
                let scored: Vec<(usize, f64)> = admissible
                    .iter()
                    .zip(&matrix)
                    .map(|(&a, row)| (a, row.iter().zip(&local_weights).map(|(f, w)| f * w).sum()))
                    .collect();
                let (_, response) = controller_choice(&scored, TIE_TOL);
                let mut weights = vec![0.0; gens.len()];
                for (&k, &w) in allowed.iter().zip(&local_weights) {
                    weights[k] = w;
                }
                let choice = if families[n].is_some() {
                    NatureChoice::Density(Density::mixture(gens, &weights))
                } else {
                    match weights.iter().position(|&w| w == 1.0) {
                        Some(k) => NatureChoice::Generator(k),
                        None => NatureChoice::Mixture(weights),
                    }
                };
                let mut choices = vec![None; stage.actions.len()];
                for &a in admissible {
                    choices[a] = Some(choice.clone());
                }
                Ok((value, response, choices))
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        values[n] = rows.iter().map(|r| r.0).collect();
        actions[n] = rows.iter().map(|r| r.1).collect();
        nature[n] = rows.into_iter().map(|r| r.2).collect();
    }
    Ok(SolveResult::new(
        values,
        MarkovControllerPolicy { actions },
        MarkovNaturePolicy { choices: nature },
    ))
}

fn check_controller(model: &FiniteRobustMDP, controller: &MarkovControllerPolicy) -> Result<()> {
    if controller.actions.len() != model.horizon {
        return Err(Error::MalformedPolicy(format!(
            "controller has {} stages, model has {}",
            controller.actions.len(),
            model.horizon
        )));
    }
    for (n, row) in controller.actions.iter().enumerate() {
        if row.len() != model.num_states() {
            return Err(Error::MalformedPolicy(format!("controller stage {n} has {} states", row.len())));
        }
        for (s, &a) in row.iter().enumerate() {
            if !model.stages[n].is_admissible(s, a) {
                return Err(Error::MalformedPolicy(format!(
                    "action {a} at stage {n}, state {s} is not admissible"
                )));
            }
        }
    }
    Ok(())
}

/// Values `V_{n pi gamma}` of a fixed Markov pair.
pub fn evaluate_pair(
    model: &FiniteRobustMDP,
    controller: &MarkovControllerPolicy,
    nature: &MarkovNaturePolicy,
) -> Result<Vec<Vec<f64>>> {
    check_controller(model, controller)?;
    if nature.choices.len() != model.horizon {
        return Err(Error::MalformedPolicy("nature policy has the wrong number of stages".into()));
    }
    // Resolve every density before recursing so malformed policies fail fast.
    let mut densities = Vec::with_capacity(model.horizon);
    for (n, stage) in model.stages.iter().enumerate() {
        let mut row = Vec::with_capacity(model.num_states());
        for s in 0..model.num_states() {
            let a = controller.actions[n][s];
            let choice = nature
                .choices
                .get(n)
                .and_then(|r| r.get(s))
                .and_then(|r| r.get(a))
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::MalformedPolicy(format!("no nature choice at stage {n}, state {s}, action {a}")))?;
            let allowed = stage.generators_at(s, a);
            if choice.generators_used().iter().any(|k| !allowed.contains(k)) {
                return Err(Error::MalformedPolicy(format!(
                    "nature uses a masked-out generator at stage {n}, state {s}, action {a}"
                )));
            }
            let d = choice.density(stage)?;
            if let Some(msg) = d.violation(&stage.disturbance) {
                return Err(Error::MalformedPolicy(format!("stage {n}, state {s}: {msg}")));
            }
            row.push(d);
        }
        densities.push(row);
    }
    let compiled = CompiledModel::new(model);
    let mut values = vec![Vec::new(); model.horizon + 1];
    values[model.horizon] = model.terminal_cost.clone();
    for n in (0..model.horizon).rev() {
        let probs = &model.stages[n].disturbance.probs;
        values[n] = (0..model.num_states())
            .map(|s| {
                let payoff = compiled.payoff(n, s, controller.actions[n][s], &values[n + 1]);
                densities[n][s].expectation(&payoff, probs)
            })
            .collect();
    }
    Ok(values)
}

/// Worst-case values `J_{n pi}` of a fixed Markov controller.
pub fn evaluate_robust_policy(model: &FiniteRobustMDP, controller: &MarkovControllerPolicy) -> Result<Vec<Vec<f64>>> {
    model.ensure_valid()?;
    check_controller(model, controller)?;
    let compiled = CompiledModel::new(model);
    let mut values = vec![Vec::new(); model.horizon + 1];
    values[model.horizon] = model.terminal_cost.clone();
    for n in (0..model.horizon).rev() {
        values[n] = (0..model.num_states())
            .map(|s| compiled.worst_case(n, s, controller.actions[n][s], &values[n + 1]).0)
            .collect();
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// Whether every row of `values` is monotone along the state grid
/// (non-strict, up to [`TIE_TOL`]).
pub fn check_value_monotone(values: &[Vec<f64>], direction: Monotonicity) -> bool {
    values.iter().all(|row| {
        row.windows(2).all(|w| match direction {
            Monotonicity::Increasing => w[1] >= w[0] - TIE_TOL,
            Monotonicity::Decreasing => w[1] <= w[0] + TIE_TOL,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::AmbiguitySet;
    use crate::model::{ActionSet, FiniteDisturbance, StageDynamics, StateGrid};

    /// Three states on {0,1,2}; T = clamp(x + z - a); cost a + x'.
    fn small_model(ambiguity: AmbiguitySet, horizon: usize) -> FiniteRobustMDP {
        let stage = Stage::new(
            3,
            ActionSet::new(vec![0.0, 1.0]),
            FiniteDisturbance::uniform(vec![0.0, 1.0]),
            ambiguity,
            StageDynamics::custom(|x, a, z| x + z - a, |_, a, _, next| 0.5 * a + next),
        );
        FiniteRobustMDP {
            horizon,
            states: StateGrid::new(vec![0.0, 1.0, 2.0]),
            stages: vec![stage; horizon],
            terminal_cost: vec![0.0, 1.0, 3.0],
        }
    }

    fn two_gens() -> AmbiguitySet {
        AmbiguitySet::generators(vec![Density::new(vec![1.5, 0.5]), Density::new(vec![0.5, 1.5])])
    }

    #[test]
    fn operator_l_zero_integrand() {
        let mut m = small_model(AmbiguitySet::singleton(2), 1);
        m.stages[0].dynamics = StageDynamics::custom(|x, _, _| x, |_, _, _, _| 0.0);
        assert_eq!(operator_l(&m, 0, 1, 0, &Density::ones(2), &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn operator_l_indicator_gives_reach_probability() {
        let mut m = small_model(AmbiguitySet::singleton(2), 1);
        m.stages[0].dynamics = StageDynamics::custom(|x, a, z| x + z - a, |_, _, _, _| 0.0);
        // From x=1 with a=0, the next state is 2 with reference probability 1/2.
        let v = operator_l(&m, 0, 1, 0, &Density::ones(2), &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn operator_l_hand_value() {
        let m = small_model(AmbiguitySet::singleton(2), 1);
        // x=1, a=1: z=0 -> x'=0 cost 0.5, z=1 -> x'=1 cost 1.5.
        // With y=(1.5, 0.5): 0.5*1.5*(0.5 + 0) + 0.5*0.5*(1.5 + 1) = 0.375 + 0.625.
        let v = operator_l(&m, 0, 1, 1, &Density::new(vec![1.5, 0.5]), &[0.0, 1.0, 3.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(operator_l(&m, 0, 1, 5, &Density::ones(2), &[0.0; 3]).is_err());
    }

    #[test]
    fn zero_cost_solves_to_zero_with_first_action() {
        let mut m = small_model(two_gens(), 1);
        m.stages[0].dynamics = StageDynamics::custom(|x, _, _| x, |_, _, _, _| 0.0);
        m.terminal_cost = vec![0.0; 3];
        let r = solve_robust(&m).unwrap();
        assert!(r.values.iter().flatten().all(|&v| v == 0.0));
        assert!(r.controller.actions[0].iter().all(|&a| a == 0));
    }

    #[test]
    fn one_step_hand_solution() {
        let m = small_model(two_gens(), 1);
        let r = solve_robust(&m).unwrap();
        // x=0, a=0: outcomes x'=0 (cost 0), x'=1 (cost 1+1=2); worst y=(0.5,1.5): 1.5.
        // x=0, a=1: x'=0 both (clamped) cost 0.5 each: 0.5.
        assert!((r.values[0][0] - 0.5).abs() < 1e-15);
        assert_eq!(r.controller.actions[0][0], 1);
        assert_eq!(r.values[1], m.terminal_cost);
    }

    #[test]
    fn optimal_pair_reproduces_values() {
        let m = small_model(two_gens(), 3);
        let r = solve_robust(&m).unwrap();
        let pair = evaluate_pair(&m, &r.controller, &r.nature).unwrap();
        let robust = evaluate_robust_policy(&m, &r.controller).unwrap();
        for n in 0..=3 {
            for s in 0..3 {
                assert!((pair[n][s] - r.values[n][s]).abs() < 1e-12);
                assert!((robust[n][s] - r.values[n][s]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dominated_controller_is_strictly_worse() {
        let m = small_model(two_gens(), 1);
        let r = solve_robust(&m).unwrap();
        let mut bad = r.controller.clone();
        bad.actions[0][0] = 0;
        let v = evaluate_robust_policy(&m, &bad).unwrap();
        assert!(v[0][0] > r.values[0][0] + 0.5);
    }

    #[test]
    fn evaluate_pair_one_step_hand_value() {
        let m = small_model(two_gens(), 1);
        let controller = MarkovControllerPolicy {
            actions: vec![vec![0, 1, 1]],
        };
        let nature = MarkovNaturePolicy {
            choices: vec![vec![vec![Some(NatureChoice::Generator(0)), Some(NatureChoice::Generator(1))]; 3]],
        };
        let v = evaluate_pair(&m, &controller, &nature).unwrap();
        // x=0, a=0 under y=(1.5, .5): 0.75*0 + 0.25*(1 + 1) = 0.5
        assert!((v[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn malformed_policies_are_rejected() {
        let m = small_model(two_gens(), 1);
        let r = solve_robust(&m).unwrap();
        let mut c = r.controller.clone();
        c.actions[0][0] = 9;
        assert!(matches!(evaluate_pair(&m, &c, &r.nature), Err(Error::MalformedPolicy(_))));
        let mut nat = r.nature.clone();
        nat.choices[0][0] = vec![Some(NatureChoice::Generator(7)); 2];
        assert!(matches!(evaluate_pair(&m, &r.controller, &nat), Err(Error::MalformedPolicy(_))));
        let short = MarkovControllerPolicy { actions: vec![] };
        assert!(evaluate_robust_policy(&m, &short).is_err());
    }

    #[test]
    fn singleton_ambiguity_pair_matches_robust_evaluation() {
        let m = small_model(AmbiguitySet::singleton(2), 2);
        let controller = MarkovControllerPolicy {
            actions: vec![vec![1, 0, 1], vec![0, 0, 1]],
        };
        let nature = MarkovNaturePolicy {
            choices: vec![vec![vec![Some(NatureChoice::Generator(0)); 2]; 3]; 2],
        };
        assert_eq!(
            evaluate_pair(&m, &controller, &nature).unwrap(),
            evaluate_robust_policy(&m, &controller).unwrap()
        );
    }

    #[test]
    fn nature_first_is_below_controller_first() {
        let m = small_model(two_gens(), 3);
        let upper = solve_robust(&m).unwrap();
        let lower = solve_nature_first(&m).unwrap();
        for (u, l) in upper.values.iter().flatten().zip(lower.values.iter().flatten()) {
            assert!(*l <= *u + 1e-12);
        }
        let replay = evaluate_pair(&m, &lower.controller, &lower.nature).unwrap();
        for (r, l) in replay.iter().flatten().zip(lower.values.iter().flatten()) {
            assert!((r - l).abs() < 1e-9);
        }
    }

    #[test]
    fn nature_first_rejects_action_dependent_masks() {
        let mut m = small_model(two_gens(), 1);
        m.stages[0].generator_mask = Some(vec![vec![vec![0], vec![1]]; 3]);
        assert!(solve_robust(&m).is_ok());
        assert!(matches!(solve_nature_first(&m), Err(Error::Unsupported(_))));
    }

    #[test]
    fn masks_restrict_nature() {
        let mut m = small_model(two_gens(), 1);
        let free = solve_robust(&m).unwrap();
        m.stages[0].generator_mask = Some(vec![vec![vec![0], vec![0]]; 3]);
        let masked = solve_robust(&m).unwrap();
        for (a, b) in masked.values[0].iter().zip(&free.values[0]) {
            assert!(a <= b);
        }
        assert!(masked.witnesses[0].iter().all(|w| *w == NatureChoice::Generator(0)));
    }

    #[test]
    fn monotone_scan() {
        let c = vec![vec![1.0; 4]];
        assert!(check_value_monotone(&c, Monotonicity::Increasing));
        assert!(check_value_monotone(&c, Monotonicity::Decreasing));
        let inc = vec![vec![0.0, 1.0, 1.0, 2.0]];
        assert!(check_value_monotone(&inc, Monotonicity::Increasing));
        assert!(!check_value_monotone(&inc, Monotonicity::Decreasing));
    }

    #[test]
    fn invalid_models_are_refused() {
        let mut m = small_model(two_gens(), 1);
        m.stages[0].admissible[0].clear();
        assert!(matches!(solve_robust(&m), Err(Error::Invalid(_))));
        assert!(matches!(solve_nature_first(&m), Err(Error::Invalid(_))));
    }
}
