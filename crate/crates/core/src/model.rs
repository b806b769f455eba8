//! Finite problem instances: grids, disturbances, dynamics, admissibility and
//! per-stage ambiguity.
//!
//! The state space is the real line discretized to a [`StateGrid`]. Every
//! real-valued transition is mapped back to the grid with
//! [`project_to_grid`] (nearest point, ties to the lower index, clamping
//! outside the grid), and costs are evaluated at the projected next state so
//! the solved instance is exactly a finite MDP. Refine the grid to control
//! projection error.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguityKind, AmbiguitySet, Density};
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result, Violation};

/// Tolerance on `sum(p) == 1` and `sum(p * y) == 1`.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateGrid {
    pub points: Vec<f64>,
}

impl StateGrid {
    pub fn new(points: Vec<f64>) -> Self {
        Self { points }
    }

    /// `count` equally spaced points on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Self {
        Self::new(uniform_points(lo, hi, count))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn violations(&self) -> Option<String> {
        if self.points.is_empty() {
            return Some("state grid is empty".into());
        }
        if self.points.iter().any(|x| !x.is_finite()) {
            return Some("state grid has non-finite points".into());
        }
        if self.points.windows(2).any(|w| w[0] >= w[1]) {
            return Some("state grid is not strictly increasing".into());
        }
        None
    }
}

/// Scalar action grid of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSet {
    pub points: Vec<f64>,
}

impl ActionSet {
    pub fn new(points: Vec<f64>) -> Self {
        Self { points }
    }

    pub fn uniform(lo: f64, hi: f64, count: usize) -> Self {
        Self::new(uniform_points(lo, hi, count))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `count` equally spaced points from `lo` to `hi`, computed as
/// `lo + (hi - lo) * j / (count - 1)` so that dyadic points land exactly.
pub fn uniform_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = (count - 1) as f64;
            (0..count)
                .map(|j| {
                    if j + 1 == count {
                        hi
                    } else {
                        lo + (hi - lo) * (j as f64 / last)
                    }
                })
                .collect()
        }
    }
}

/// Reference law of one stage's disturbance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDisturbance {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl FiniteDisturbance {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Self {
        Self { support, probs }
    }

    pub fn uniform(support: Vec<f64>) -> Self {
        let p = 1.0 / support.len() as f64;
        let probs = vec![p; support.len()];
        Self { support, probs }
    }

    /// Single deterministic outcome.
    pub fn deterministic(z: f64) -> Self {
        Self {
            support: vec![z],
            probs: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Law of the disturbance under the measure with density `y`.
    pub fn law_under(&self, y: &Density) -> DiscreteDistribution {
        DiscreteDistribution::from_atoms(
            self.support
                .iter()
                .zip(&self.probs)
                .zip(y.weights())
                .map(|((&z, &p), &w)| (z, p * w)),
        )
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.support.is_empty() {
            out.push("disturbance support is empty".into());
            return out;
        }
        if self.support.len() != self.probs.len() {
            out.push(format!(
                "disturbance has {} support points but {} probabilities",
                self.support.len(),
                self.probs.len()
            ));
            return out;
        }
        if self.support.iter().any(|z| !z.is_finite()) {
            out.push("disturbance support has non-finite values".into());
        }
        let mut sorted = self.support.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            out.push("disturbance support values are not distinct".into());
        }
        if self.probs.iter().any(|&p| !(p > 0.0)) {
            out.push("disturbance probabilities must be strictly positive".into());
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            out.push(format!("disturbance probabilities sum to {total}, not 1"));
        }
        out
    }
}

/// Transition and cost of the named builtin families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case")]
pub enum Builtin {
    /// `T(x,a,z) = u x + v a + z`, `c = q x^2 + r a^2`.
    Lq {
        state_coef: f64,
        action_coef: f64,
        state_cost: f64,
        action_cost: f64,
    },
    /// Wind/storage: `T = clamp(x + z - a, 0, capacity)`,
    /// `c = -a P + (P + penalty) (a - z - x)+`.
    Energy {
        capacity: f64,
        price: f64,
        penalty: f64,
    },
    /// `T(x,a,z) = -(a - z)^2`, `c(x,a,x') = x'`.
    Counterexample,
}

impl Builtin {
    pub fn next_state(&self, x: f64, a: f64, z: f64) -> f64 {
        match *self {
            Builtin::Lq {
                state_coef,
                action_coef,
                ..
            } => state_coef * x + action_coef * a + z,
            Builtin::Energy { capacity, .. } => (x + z - a).clamp(0.0, capacity),
            Builtin::Counterexample => -(a - z) * (a - z),
        }
    }

    pub fn cost(&self, x: f64, a: f64, z: f64, next: f64) -> f64 {
        match *self {
            Builtin::Lq {
                state_cost,
                action_cost,
                ..
            } => state_cost * x * x + action_cost * a * a,
            Builtin::Energy { price, penalty, .. } => {
                -a * price + (price + penalty) * (a - z - x).max(0.0)
            }
            Builtin::Counterexample => next,
        }
    }
}

pub type TransitionFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// `(x, a, z, projected next state) -> cost`.
pub type CostFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;

/// Dense tables are indexed `[state][action][support point]`.
#[derive(Clone)]
pub enum Transition {
    Table(Vec<Vec<Vec<f64>>>),
    Builtin(Builtin),
    Custom(TransitionFn),
}

#[derive(Clone)]
pub enum Cost {
    Table(Vec<Vec<Vec<f64>>>),
    Builtin(Builtin),
    Custom(CostFn),
}

impl fmt::Debug for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
            Transition::Builtin(b) => f.debug_tuple("Builtin").field(b).finish(),
            Transition::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
            Cost::Builtin(b) => f.debug_tuple("Builtin").field(b).finish(),
            Cost::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// User assertions of the monotone-model hypotheses. Spot-checked by
/// [`check_flags`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonotoneFlags {
    /// `x -> D_n(x)` is decreasing (set inclusion).
    pub admissible_decreasing: bool,
    /// `x -> T_n(x, a, z)` is increasing.
    pub transition_increasing: bool,
    /// `(x, x') -> c_n(x, a, x')` is increasing.
    pub cost_increasing: bool,
    /// `x -> c_N(x)` is increasing.
    pub terminal_increasing: bool,
}

/// User assertions of the convex-model hypotheses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvexFlags {
    pub admissible_convex: bool,
    pub transition_convex: bool,
    pub cost_convex: bool,
    pub terminal_convex: bool,
}

#[derive(Debug, Clone)]
pub struct StageDynamics {
    pub transition: Transition,
    pub cost: Cost,
    pub monotone: MonotoneFlags,
    pub convex: ConvexFlags,
}

impl StageDynamics {
    pub fn new(transition: Transition, cost: Cost) -> Self {
        Self {
            transition,
            cost,
            monotone: MonotoneFlags::default(),
            convex: ConvexFlags::default(),
        }
    }

    pub fn builtin(b: Builtin) -> Self {
        Self::new(Transition::Builtin(b.clone()), Cost::Builtin(b))
    }

    pub fn custom(
        transition: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        cost: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(Transition::Custom(Arc::new(transition)), Cost::Custom(Arc::new(cost)))
    }

    pub fn tables(next_state: Vec<Vec<Vec<f64>>>, cost: Vec<Vec<Vec<f64>>>) -> Self {
        Self::new(Transition::Table(next_state), Cost::Table(cost))
    }
}

/// One decision epoch `n`: the action grid, `D_n`, the law of `Z_{n+1}`, its
/// ambiguity set and the dynamics `T_n`, `c_n`.
#[derive(Debug, Clone)]
pub struct Stage {
    pub actions: ActionSet,
    /// Admissible action indices per state.
    pub admissible: Vec<Vec<usize>>,
    pub disturbance: FiniteDisturbance,
    pub ambiguity: AmbiguitySet,
    pub dynamics: StageDynamics,
    /// Optional `[state][action] -> generator indices` restriction, giving
    /// state- and action-dependent ambiguity.
    pub generator_mask: Option<Vec<Vec<Vec<usize>>>>,
}

impl Stage {
    /// Stage where every action is admissible in each of `states` states.
    pub fn new(
        states: usize,
        actions: ActionSet,
        disturbance: FiniteDisturbance,
        ambiguity: AmbiguitySet,
        dynamics: StageDynamics,
    ) -> Self {
        let all: Vec<usize> = (0..actions.len()).collect();
        Self {
            admissible: vec![all; states],
            actions,
            disturbance,
            ambiguity,
            dynamics,
            generator_mask: None,
        }
    }

    pub fn is_admissible(&self, state: usize, action: usize) -> bool {
        self.admissible
            .get(state)
            .is_some_and(|d| d.contains(&action))
    }

    /// Generator indices nature may use at `(state, action)`.
    pub fn generators_at(&self, state: usize, action: usize) -> Vec<usize> {
        match (&self.generator_mask, &self.ambiguity.kind) {
            (Some(mask), _) => mask[state][action].clone(),
            (None, AmbiguityKind::Generators(g)) => (0..g.len()).collect(),
            (None, AmbiguityKind::Spectral(_)) => Vec::new(),
        }
    }

    /// Real-valued next state `T_n(x, a, z_i)` before projection.
    pub fn raw_next_state(&self, s: usize, x: f64, a_idx: usize, i: usize) -> f64 {
        let a = self.actions.points[a_idx];
        let z = self.disturbance.support[i];
        match &self.dynamics.transition {
            Transition::Table(t) => t[s][a_idx][i],
            Transition::Builtin(b) => b.next_state(x, a, z),
            Transition::Custom(f) => f(x, a, z),
        }
    }

    /// Cost of `(x_s, a, z_i)` with the projected next state `next`.
    pub fn cost_at(&self, s: usize, x: f64, a_idx: usize, i: usize, next: f64) -> f64 {
        let a = self.actions.points[a_idx];
        let z = self.disturbance.support[i];
        match &self.dynamics.cost {
            Cost::Table(t) => t[s][a_idx][i],
            Cost::Builtin(b) => b.cost(x, a, z, next),
            Cost::Custom(f) => f(x, a, z, next),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FiniteRobustMDP {
    pub horizon: usize,
    pub states: StateGrid,
    pub stages: Vec<Stage>,
    /// `c_N` on the state grid.
    pub terminal_cost: Vec<f64>,
}

/// Projected next-state index and cost of one disturbance outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub cost: f64,
}

impl FiniteRobustMDP {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Outcomes of `(n, s, a)` for every support point of `Z_{n+1}`.
    /// Does not check admissibility.
    pub fn outcomes(&self, n: usize, s: usize, a: usize) -> Vec<Outcome> {
        let stage = &self.stages[n];
        let x = self.states.points[s];
        (0..stage.disturbance.len())
            .map(|i| {
                let raw = stage.raw_next_state(s, x, a, i);
                let next = project_to_grid(&self.states, raw);
                let cost = stage.cost_at(s, x, a, i, self.states.points[next]);
                Outcome { next, cost }
            })
            .collect()
    }

    pub(crate) fn check_admissible(&self, n: usize, s: usize, a: usize) -> Result<()> {
        if n < self.stages.len() && s < self.num_states() && self.stages[n].is_admissible(s, a) {
            Ok(())
        } else {
            Err(Error::Inadmissible {
                stage: n,
                state: s,
                action: a,
            })
        }
    }

    /// Fails with [`Error::Invalid`] unless [`validate`] is empty.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }
}

/// Index of the grid point nearest to `x`; ties go to the lower index and
/// values outside the grid clamp to the boundary.
pub fn project_to_grid(grid: &StateGrid, x: f64) -> usize {
    let pts = &grid.points;
    debug_assert!(!pts.is_empty());
    let j = pts.partition_point(|&p| p < x);
    if j == 0 {
        return 0;
    }
    if j == pts.len() {
        return pts.len() - 1;
    }
    if pts[j] - x < x - pts[j - 1] {
        j
    } else {
        j - 1
    }
}

/// Law of the projected next state under the measure with density `density`.
pub fn induced_distribution(
    model: &FiniteRobustMDP,
    n: usize,
    s: usize,
    a: usize,
    density: &Density,
) -> Result<DiscreteDistribution> {
    model.check_admissible(n, s, a)?;
    let stage = &model.stages[n];
    if density.len() != stage.disturbance.len() {
        return Err(Error::InvalidArgument(format!(
            "density has {} weights, disturbance has {} support points",
            density.len(),
            stage.disturbance.len()
        )));
    }
    let outcomes = model.outcomes(n, s, a);
    Ok(DiscreteDistribution::from_atoms(
        outcomes
            .iter()
            .zip(&stage.disturbance.probs)
            .zip(density.weights())
            .map(|((o, &p), &y)| (model.states.points[o.next], p * y)),
    ))
}

/// Lists every structural problem of the instance. Empty iff the instance
/// satisfies the preconditions of the solver operations.
pub fn validate(model: &FiniteRobustMDP) -> Vec<Violation> {
    let mut out = Vec::new();
    if model.horizon == 0 {
        out.push(Violation::global("horizon must be at least 1"));
    }
    if model.stages.len() != model.horizon {
        out.push(Violation::global(format!(
            "horizon is {} but {} stages are given",
            model.horizon,
            model.stages.len()
        )));
    }
    if let Some(msg) = model.states.violations() {
        out.push(Violation::global(msg));
        return out;
    }
    let num_states = model.num_states();
    if model.terminal_cost.len() != num_states {
        out.push(Violation::global(format!(
            "terminal cost has {} entries for {} states",
            model.terminal_cost.len(),
            num_states
        )));
    } else if let Some(s) = model.terminal_cost.iter().position(|c| !c.is_finite()) {
        out.push(Violation::at_state(model.horizon, s, "terminal cost is not finite"));
    }
    for (n, stage) in model.stages.iter().enumerate() {
        validate_stage(model, n, stage, &mut out);
    }
    out
}

fn validate_stage(model: &FiniteRobustMDP, n: usize, stage: &Stage, out: &mut Vec<Violation>) {
    let num_states = model.num_states();
    let num_actions = stage.actions.len();
    let mut structural_ok = true;

    if stage.actions.is_empty() {
        out.push(Violation::at_stage(n, "action set is empty"));
        structural_ok = false;
    } else if stage.actions.points.iter().any(|a| !a.is_finite())
        || stage.actions.points.windows(2).any(|w| w[0] >= w[1])
    {
        out.push(Violation::at_stage(n, "action grid is not strictly increasing and finite"));
        structural_ok = false;
    }

    if stage.admissible.len() != num_states {
        out.push(Violation::at_stage(
            n,
            format!("admissibility lists {} states, grid has {}", stage.admissible.len(), num_states),
        ));
        structural_ok = false;
    } else {
        for (s, d) in stage.admissible.iter().enumerate() {
            if d.is_empty() {
                out.push(Violation::at_state(n, s, "no admissible action"));
                structural_ok = false;
            }
            if let Some(&a) = d.iter().find(|&&a| a >= num_actions) {
                out.push(Violation::at_action(n, s, a, "admissible action index out of range"));
                structural_ok = false;
            }
        }
    }

    let dist_problems = stage.disturbance.violations();
    let m = stage.disturbance.len();
    let disturbance_ok = dist_problems.is_empty();
    for msg in dist_problems {
        out.push(Violation::at_stage(n, msg));
    }

    match &stage.ambiguity.kind {
        AmbiguityKind::Generators(gens) => {
            if gens.is_empty() {
                out.push(Violation::at_stage(n, "ambiguity set has no generators"));
            }
            if disturbance_ok {
                for (k, g) in gens.iter().enumerate() {
                    if let Some(msg) = g.violation(&stage.disturbance) {
                        out.push(Violation::at_stage(n, format!("generator {k}: {msg}")));
                    }
                }
            }
        }
        AmbiguityKind::Spectral(phi) => {
            if let Some(msg) = phi.violation() {
                out.push(Violation::at_stage(n, format!("spectrum: {msg}")));
            }
            if stage.generator_mask.is_some() {
                out.push(Violation::at_stage(n, "generator mask given for a spectral ambiguity set"));
            }
        }
    }

    if let (Some(mask), AmbiguityKind::Generators(gens)) = (&stage.generator_mask, &stage.ambiguity.kind) {
        if mask.len() != num_states || mask.iter().any(|row| row.len() != num_actions) {
            out.push(Violation::at_stage(n, "generator mask must be indexed [state][action]"));
        } else if structural_ok {
            for (s, d) in stage.admissible.iter().enumerate() {
                for &a in d {
                    let allowed = &mask[s][a];
                    if allowed.is_empty() {
                        out.push(Violation::at_action(n, s, a, "masked generator set is empty"));
                    } else if allowed.iter().any(|&k| k >= gens.len()) {
                        out.push(Violation::at_action(n, s, a, "masked generator index out of range"));
                    }
                }
            }
        }
    }

    let table_shape_ok = |t: &Vec<Vec<Vec<f64>>>| {
        t.len() == num_states && t.iter().all(|r| r.len() == num_actions && r.iter().all(|c| c.len() == m))
    };
    if let Transition::Table(t) = &stage.dynamics.transition {
        if !table_shape_ok(t) {
            out.push(Violation::at_stage(n, "transition table must be [state][action][support]"));
            structural_ok = false;
        }
    }
    if let Cost::Table(t) = &stage.dynamics.cost {
        if !table_shape_ok(t) {
            out.push(Violation::at_stage(n, "cost table must be [state][action][support]"));
            structural_ok = false;
        }
    }

    if structural_ok && disturbance_ok {
        'outer: for (s, d) in stage.admissible.iter().enumerate() {
            let x = model.states.points[s];
            for &a in d {
                for i in 0..m {
                    let raw = stage.raw_next_state(s, x, a, i);
                    if !raw.is_finite() {
                        out.push(Violation::at_action(n, s, a, "transition is not finite"));
                        break 'outer;
                    }
                    let next = model.states.points[project_to_grid(&model.states, raw)];
                    if !stage.cost_at(s, x, a, i, next).is_finite() {
                        out.push(Violation::at_action(n, s, a, "cost is not finite"));
                        break 'outer;
                    }
                }
            }
        }
    }
}

const FLAG_TOL: f64 = 1e-12;

/// Spot-checks the asserted monotone/convex flags along every grid line and
/// reports the contradictions found. Flags that are not asserted are not
/// checked.
pub fn check_flags(model: &FiniteRobustMDP) -> Vec<Violation> {
    let mut out = Vec::new();
    let xs = &model.states.points;
    let any_terminal_inc = model.stages.iter().any(|s| s.dynamics.monotone.terminal_increasing);
    let any_terminal_cvx = model.stages.iter().any(|s| s.dynamics.convex.terminal_convex);
    if any_terminal_inc && model.terminal_cost.windows(2).any(|w| w[1] < w[0] - FLAG_TOL) {
        out.push(Violation::global("terminal cost is not increasing"));
    }
    if any_terminal_cvx && !is_convex_on(xs, &model.terminal_cost) {
        out.push(Violation::global("terminal cost is not convex"));
    }

    for (n, stage) in model.stages.iter().enumerate() {
        let mono = stage.dynamics.monotone;
        let cvx = stage.dynamics.convex;
        let m = stage.disturbance.len();
        if mono.admissible_decreasing {
            for s in 1..xs.len() {
                if let Some(&a) = stage.admissible[s].iter().find(|a| !stage.admissible[s - 1].contains(a)) {
                    out.push(Violation::at_action(n, s, a, "admissible sets are not decreasing in the state"));
                }
            }
        }
        if cvx.admissible_convex {
            for (s, d) in stage.admissible.iter().enumerate() {
                let mut sorted = d.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[1] != w[0] + 1) {
                    out.push(Violation::at_state(n, s, "admissible set is not an interval of the action grid"));
                }
            }
        }
        if mono.transition_increasing || mono.cost_increasing {
            for s in 1..xs.len() {
                for &a in &stage.admissible[s] {
                    if !stage.admissible[s - 1].contains(&a) {
                        continue;
                    }
                    for i in 0..m {
                        let lo = stage.raw_next_state(s - 1, xs[s - 1], a, i);
                        let hi = stage.raw_next_state(s, xs[s], a, i);
                        if mono.transition_increasing && hi < lo - FLAG_TOL {
                            out.push(Violation::at_action(n, s, a, "transition is not increasing in the state"));
                        }
                        if mono.cost_increasing {
                            let lo_next = xs[project_to_grid(&model.states, lo)];
                            let hi_next = xs[project_to_grid(&model.states, hi)];
                            let c_lo = stage.cost_at(s - 1, xs[s - 1], a, i, lo_next);
                            let c_hi = stage.cost_at(s, xs[s], a, i, hi_next);
                            if hi_next >= lo_next && c_hi < c_lo - FLAG_TOL {
                                out.push(Violation::at_action(n, s, a, "cost is not increasing in (x, x')"));
                            }
                        }
                    }
                }
            }
        }
        if cvx.transition_convex || cvx.cost_convex {
            let acts = &stage.actions.points;
            for (s, d) in stage.admissible.iter().enumerate() {
                let mut d = d.clone();
                d.sort_unstable();
                let grid: Vec<f64> = d.iter().map(|&a| acts[a]).collect();
                for i in 0..m {
                    let raw: Vec<f64> = d.iter().map(|&a| stage.raw_next_state(s, xs[s], a, i)).collect();
                    if cvx.transition_convex && !is_convex_on(&grid, &raw) {
                        out.push(Violation::at_state(n, s, "transition is not convex in the action"));
                    }
                    if cvx.cost_convex {
                        let costs: Vec<f64> = d
                            .iter()
                            .zip(&raw)
                            .map(|(&a, &r)| stage.cost_at(s, xs[s], a, i, xs[project_to_grid(&model.states, r)]))
                            .collect();
                        if !is_convex_on(&grid, &costs) {
                            out.push(Violation::at_state(n, s, "cost is not convex in the action"));
                        }
                    }
                }
            }
        }
    }
    out.dedup();
    out
}

/// Discrete convexity of `f` sampled at increasing points `x`.
fn is_convex_on(x: &[f64], f: &[f64]) -> bool {
    x.windows(3).zip(f.windows(3)).all(|(x, f)| {
        let left = (f[1] - f[0]) / (x[1] - x[0]);
        let right = (f[2] - f[1]) / (x[2] - x[1]);
        right >= left - 1e-9 * (1.0 + left.abs())
    })
}
