//! Minimax diagnostics for one-stage games and the upper/lower value gap of
//! whole models.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguitySet, Density, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::{ActionSet, Builtin, FiniteDisturbance, FiniteRobustMDP, Stage, StageDynamics, StateGrid};
use crate::solver::{solve_nature_first, solve_robust};

/// Controller grid x nature parameter grid with `payoff[a][theta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticGame {
    pub actions: Vec<f64>,
    pub params: Vec<f64>,
    pub payoff: Vec<Vec<f64>>,
}

impl StaticGame {
    pub fn new(actions: Vec<f64>, params: Vec<f64>, payoff: Vec<Vec<f64>>) -> Result<Self> {
        if actions.is_empty() || params.is_empty() {
            return Err(Error::InvalidArgument("game grids must be nonempty".into()));
        }
        if payoff.len() != actions.len() || payoff.iter().any(|r| r.len() != params.len()) {
            return Err(Error::InvalidArgument("payoff must be [action][parameter]".into()));
        }
        Ok(Self { actions, params, payoff })
    }

    pub fn from_fn(actions: Vec<f64>, params: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let payoff = actions.iter().map(|&a| params.iter().map(|&t| f(a, t)).collect()).collect();
        Self::new(actions, params, payoff)
    }

    fn row_max(&self, a: usize) -> f64 {
        self.payoff[a].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn col_min(&self, t: usize) -> f64 {
        self.payoff.iter().map(|r| r[t]).fold(f64::INFINITY, f64::min)
    }
}

/// Index of the first entry within [`TIE_TOL`] of the extreme, and the
/// extreme itself.
fn arg_extreme(vals: impl Iterator<Item = f64> + Clone, max: bool) -> (f64, usize) {
    let best = if max {
        vals.clone().fold(f64::NEG_INFINITY, f64::max)
    } else {
        vals.clone().fold(f64::INFINITY, f64::min)
    };
    let idx = vals
        .into_iter()
        .position(|v| if max { v >= best - TIE_TOL } else { v <= best + TIE_TOL })
        .expect("nonempty grid");
    (best, idx)
}

/// `min_a max_theta payoff` and the minimizing action index.
pub fn upper_value(g: &StaticGame) -> (f64, usize) {
    arg_extreme((0..g.actions.len()).map(|a| g.row_max(a)), false)
}

/// `max_theta min_a payoff` and the maximizing parameter index.
pub fn lower_value(g: &StaticGame) -> (f64, usize) {
    arg_extreme((0..g.params.len()).map(|t| g.col_min(t)), true)
}

/// `max_theta sum_a mix(a) payoff(a, theta)` for a fixed randomization of the
/// controller.
pub fn mixing_value(g: &StaticGame, mix: &[f64]) -> Result<f64> {
    if mix.len() != g.actions.len() || mix.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("mix must be nonnegative with one weight per action".into()));
    }
    if (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("mix weights must sum to 1".into()));
    }
    Ok((0..g.params.len())
        .map(|t| g.payoff.iter().zip(mix).map(|(r, w)| w * r[t]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// First `(a, theta)` in row-major order with
/// `payoff(a, .) <= payoff(a, theta) <= payoff(., theta)` up to `tol`.
pub fn saddle_search(g: &StaticGame, tol: f64) -> Option<(usize, usize)> {
    let row_max: Vec<f64> = (0..g.actions.len()).map(|a| g.row_max(a)).collect();
    let col_min: Vec<f64> = (0..g.params.len()).map(|t| g.col_min(t)).collect();
    (0..g.actions.len())
        .flat_map(|a| (0..g.params.len()).map(move |t| (a, t)))
        .find(|&(a, t)| {
            let v = g.payoff[a][t];
            v >= row_max[a] - tol && v <= col_min[t] + tol
        })
}

/// Value and maximizing mixture of `max_{lambda in simplex} min_a
/// sum_k lambda_k m[a][k]`.
///
/// The value returned is recomputed exactly from the (clipped, renormalized)
/// mixture and is never below the best pure column, so it is attained by the
/// returned weights.
pub fn matrix_game_lower_value(m: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let cols = m.first().map_or(0, Vec::len);
    if m.is_empty() || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("matrix game needs a nonempty rectangular matrix".into()));
    }
    let guaranteed = |w: &[f64]| {
        m.iter()
            .map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };
    let mut best_pure = (f64::NEG_INFINITY, 0);
    for k in 0..cols {
        let v = m.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
        if v > best_pure.0 + TIE_TOL {
            best_pure = (v, k);
        }
    }
    let mut pure = vec![0.0; cols];
    pure[best_pure.1] = 1.0;
    if cols == 1 || m.len() == 1 {
        return Ok((best_pure.0, pure));
    }

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let lambda: Vec<_> = (0..cols).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let v = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for row in m {
        let mut expr: Vec<_> = lambda.iter().zip(row).map(|(&l, &c)| (l, c)).collect();
        expr.push((v, -1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, 0.0);
    }
    let ones: Vec<_> = lambda.iter().map(|&l| (l, 1.0)).collect();
    lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
    let sol = lp
        .solve()
        .map_err(|e| Error::LinearProgram(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::LinearProgram("solve interrupted".into()))?;
    let mut w: Vec<f64> = lambda.iter().map(|&l| sol.var_value(l).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Ok((best_pure.0, pure));
    }
    w.iter_mut().for_each(|x| *x /= total);
    let mixed = guaranteed(&w);
    if mixed > best_pure.0 + TIE_TOL {
        Ok((mixed, w))
    } else {
        Ok((best_pure.0, pure))
    }
}

/// `J - J~` per stage and state: controller-first minus nature-first value.
pub fn gap(model: &FiniteRobustMDP) -> Result<Vec<Vec<f64>>> {
    let upper = solve_robust(model)?;
    let lower = solve_nature_first(model)?;
    Ok(upper
        .values
        .iter()
        .zip(&lower.values)
        .map(|(u, l)| u.iter().zip(l).map(|(a, b)| a - b).collect())
        .collect())
}

/// The static game `f(a, p) = -(1-p) a^2 - p (a-1)^2` on `[0,1]^2` together
/// with the equivalent one-stage model.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub game: StaticGame,
    pub model: FiniteRobustMDP,
}

/// `-(1-p) a^2 - p (a-1)^2`, written so that `a = 1/2` and `p = 1/2` give
/// exact values in floating point.
pub fn counterexample_payoff(a: f64, p: f64) -> f64 {
    -(a * a + p * (1.0 - 2.0 * a))
}

/// Builds the counterexample on the grid `{0, step, ..., 1}` for both
/// players. `step` must divide 1/2.
///
/// In model form the state grid holds every reachable value `-a^2`, the
/// disturbance is Bernoulli(1/2) on `{0, 1}` and nature's parameter `p`
/// is the density `(2(1-p), 2p)`.
pub fn build_counterexample(step: f64) -> Result<Counterexample> {
    let halves = 0.5 / step;
    let k_half = halves.round();
    if !(step > 0.0) || !(k_half >= 1.0) || (halves - k_half).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("grid step {step} does not divide 1/2")));
    }
    let k = 2 * k_half as usize;
    let grid: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
    let game = StaticGame::from_fn(grid.clone(), grid.clone(), counterexample_payoff)?;

    let states: Vec<f64> = (0..=k)
        .rev()
        .map(|j| {
            let a = j as f64 / k as f64;
            -(a * a)
        })
        .collect();
    let generators: Vec<Density> = grid.iter().map(|&p| Density::new(vec![2.0 * (1.0 - p), 2.0 * p])).collect();
    let stage = Stage::new(
        states.len(),
        ActionSet::new(grid),
        FiniteDisturbance::uniform(vec![0.0, 1.0]),
        AmbiguitySet::generators(generators),
        StageDynamics::builtin(Builtin::Counterexample),
    );
    let model = FiniteRobustMDP {
        horizon: 1,
        terminal_cost: vec![0.0; states.len()],
        states: StateGrid::new(states),
        stages: vec![stage],
    };
    Ok(Counterexample { game, model })
}
