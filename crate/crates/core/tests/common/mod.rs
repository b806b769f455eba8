//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_mdp::ambiguity::{AmbiguitySet, Density};
use robust_mdp::model::{
    uniform_points, ActionSet, FiniteDisturbance, FiniteRobustMDP, Stage, StageDynamics, StateGrid,
};
use robust_mdp::solver::{MarkovControllerPolicy, MarkovNaturePolicy, NatureChoice};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Upper limits (inclusive) on instance sizes.
#[derive(Debug, Clone, Copy)]
pub struct Dims {
    pub states: usize,
    pub actions: usize,
    pub support: usize,
    pub gens: usize,
    pub horizon: usize,
}

impl Dims {
    pub fn sample(&self, rng: &mut impl Rng) -> Dims {
        Dims {
            states: rng.gen_range(1..=self.states),
            actions: rng.gen_range(1..=self.actions),
            support: rng.gen_range(1..=self.support),
            gens: rng.gen_range(1..=self.gens),
            horizon: rng.gen_range(1..=self.horizon),
        }
    }
}

/// Strictly positive probabilities summing to one.
pub fn random_probs(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Density of a random law (possibly with zero atoms) relative to `probs`.
pub fn random_density(rng: &mut impl Rng, probs: &[f64]) -> Density {
    let mut pmf: Vec<f64> = probs
        .iter()
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    if pmf.iter().all(|&q| q == 0.0) {
        pmf[0] = 1.0;
    }
    let total: f64 = pmf.iter().sum();
    Density::new(pmf.iter().zip(probs).map(|(q, p)| q / total / p).collect())
}

fn random_subset(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if out.is_empty() {
        out.push(rng.gen_range(0..n));
    }
    out
}

pub struct Options {
    /// Random per-(state, action) generator masks.
    pub masks: bool,
    /// Costs are drawn from `[-cost_scale, cost_scale]`.
    pub cost_scale: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            masks: false,
            cost_scale: 1.0,
        }
    }
}

/// Table-driven instance on the grid `{0, 1, .., S-1}`. Next states are
/// arbitrary reals around the grid, so projection (and clamping) is
/// exercised.
pub fn random_instance(rng: &mut impl Rng, d: Dims, opts: &Options) -> FiniteRobustMDP {
    let s = d.states;
    let states = StateGrid::new((0..s).map(|i| i as f64).collect());
    let stages = (0..d.horizon)
        .map(|_| {
            let probs = random_probs(rng, d.support);
            let support: Vec<f64> = (0..d.support).map(|i| i as f64).collect();
            let gens: Vec<Density> = (0..d.gens).map(|_| random_density(rng, &probs)).collect();
            let table = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| -> Vec<Vec<Vec<f64>>> {
                (0..s)
                    .map(|_| (0..d.actions).map(|_| (0..d.support).map(|_| rng.gen_range(lo..hi)).collect()).collect())
                    .collect()
            };
            let next = table(rng, -0.7, s as f64 - 0.3);
            let cost = table(rng, -opts.cost_scale, opts.cost_scale);
            let mut stage = Stage::new(
                s,
                ActionSet::new((0..d.actions).map(|a| a as f64).collect()),
                FiniteDisturbance::new(support, probs),
                AmbiguitySet::generators(gens),
                StageDynamics::tables(next, cost),
            );
            stage.admissible = (0..s).map(|_| random_subset(rng, d.actions)).collect();
            if opts.masks {
                stage.generator_mask = Some(
                    (0..s)
                        .map(|_| (0..d.actions).map(|_| random_subset(rng, d.gens)).collect())
                        .collect(),
                );
            }
            stage
        })
        .collect();
    FiniteRobustMDP {
        horizon: d.horizon,
        states,
        stages,
        terminal_cost: (0..s).map(|_| rng.gen_range(-opts.cost_scale..opts.cost_scale)).collect(),
    }
}

/// Enumeration count of the Markov min-max oracle.
pub fn oracle_count(m: &FiniteRobustMDP) -> u128 {
    let mut count: u128 = 1;
    for st in &m.stages {
        for s in 0..m.num_states() {
            let b: u128 = st.admissible[s].iter().map(|&a| st.generators_at(s, a).len() as u128).sum();
            count = count.saturating_mul(b);
        }
    }
    count
}

pub fn random_controller(rng: &mut impl Rng, m: &FiniteRobustMDP) -> MarkovControllerPolicy {
    MarkovControllerPolicy {
        actions: m
            .stages
            .iter()
            .map(|st| st.admissible.iter().map(|d| *d.choose(rng).unwrap()).collect())
            .collect(),
    }
}

/// Random generator choice at every admissible `(n, s, a)`.
pub fn random_nature(rng: &mut impl Rng, m: &FiniteRobustMDP) -> MarkovNaturePolicy {
    MarkovNaturePolicy {
        choices: m
            .stages
            .iter()
            .map(|st| {
                (0..m.num_states())
                    .map(|s| {
                        (0..st.actions.len())
                            .map(|a| {
                                st.is_admissible(s, a)
                                    .then(|| NatureChoice::Generator(*st.generators_at(s, a).choose(rng).unwrap()))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Monotone instance: transitions increasing in the state and the
/// disturbance, costs increasing in the state and the next state, increasing
/// terminal cost, every action admissible everywhere.
pub fn random_monotone_instance(rng: &mut impl Rng, d: Dims) -> FiniteRobustMDP {
    let s = d.states.max(2);
    let states = StateGrid::new((0..s).map(|i| i as f64).collect());
    let stages = (0..d.horizon)
        .map(|_| {
            let probs = random_probs(rng, d.support);
            let support: Vec<f64> = (0..d.support).map(|i| i as f64).collect();
            let gens: Vec<Density> = (0..d.gens).map(|_| random_density(rng, &probs)).collect();
            let (tx, tz, ta) = (rng.gen_range(0.3..1.2), rng.gen_range(0.2..1.5), rng.gen_range(-1.0..1.0));
            let (cx, cn, ca) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(-0.5..0.5));
            Stage::new(
                s,
                ActionSet::new((0..d.actions).map(|a| a as f64).collect()),
                FiniteDisturbance::new(support, probs),
                AmbiguitySet::generators(gens),
                StageDynamics::custom(
                    move |x, a, z| tx * x + tz * z + ta * a,
                    move |x, a, _, next| cx * x + cn * next + ca * a,
                ),
            )
        })
        .collect();
    let mut terminal: Vec<f64> = (0..s).map(|_| rng.gen_range(0.0..1.0)).collect();
    terminal.sort_by(f64::total_cmp);
    FiniteRobustMDP {
        horizon: d.horizon,
        states,
        stages,
        terminal_cost: terminal,
    }
}

/// The density whose law has CDF `min_k F_k`: the `<=_st`-maximum of the
/// generator laws.
pub fn st_max_density(gens: &[Density], probs: &[f64]) -> Density {
    let m = probs.len();
    let cdfs: Vec<Vec<f64>> = gens
        .iter()
        .map(|g| {
            let mut acc = 0.0;
            (0..m)
                .map(|i| {
                    acc += probs[i] * g.weights()[i];
                    acc
                })
                .collect()
        })
        .collect();
    let mut min_cdf: Vec<f64> = (0..m).map(|i| cdfs.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min)).collect();
    min_cdf[m - 1] = 1.0;
    let mut prev = 0.0;
    Density::new(
        (0..m)
            .map(|i| {
                let q = (min_cdf[i] - prev).max(0.0);
                prev = min_cdf[i];
                q / probs[i]
            })
            .collect(),
    )
}

/// Convex one-dimensional instance with lattice step `h`:
/// `T = x + a + z` on `[-0.5, 0.5]`, `c = Q x^2 + R a^2 + beta x'`, actions
/// restricted so every outcome stays on the lattice, and generators
/// `1 + r (cos t g1 + sin t g2)` on a circle with `round(0.2 / h)` points.
pub fn convex_lq_instance(rng: &mut impl Rng, h: f64, horizon: usize) -> FiniteRobustMDP {
    let q = rng.gen_range(0.5..2.0);
    let r = rng.gen_range(0.5..2.0);
    let beta = rng.gen_range(-1.0..1.0);
    let qn = rng.gen_range(0.5..2.0);
    let radius = rng.gen_range(0.1..0.3);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let n_theta = (0.2 / h).round() as usize;

    let xs = uniform_points(-0.5, 0.5, (1.0 / h).round() as usize + 1);
    let acts = uniform_points(-0.3, 0.3, (0.6 / h).round() as usize + 1);
    let support = vec![-0.04, 0.0, 0.04];
    let g1 = [-1.0, 0.0, 1.0];
    let g2 = [1.0, -2.0, 1.0];
    let gens: Vec<Density> = (0..n_theta)
        .map(|k| {
            let t = phase + std::f64::consts::TAU * k as f64 / n_theta as f64;
            Density::new((0..3).map(|i| 1.0 + radius * (t.cos() * g1[i] + t.sin() * g2[i])).collect())
        })
        .collect();
    let admissible: Vec<Vec<usize>> = xs
        .iter()
        .map(|&x| (0..acts.len()).filter(|&a| (x + acts[a]).abs() <= 0.46 + 1e-9).collect())
        .collect();
    let stages = (0..horizon)
        .map(|_| {
            let mut st = Stage::new(
                xs.len(),
                ActionSet::new(acts.clone()),
                FiniteDisturbance::uniform(support.clone()),
                AmbiguitySet::generators(gens.clone()),
                StageDynamics::custom(|x, a, z| x + a + z, move |x, a, _, next| q * x * x + r * a * a + beta * next),
            );
            st.admissible = admissible.clone();
            st.dynamics.convex.admissible_convex = true;
            st.dynamics.convex.transition_convex = true;
            st.dynamics.convex.cost_convex = true;
            st.dynamics.convex.terminal_convex = true;
            st
        })
        .collect();
    FiniteRobustMDP {
        horizon,
        terminal_cost: xs.iter().map(|x| qn * x * x + beta * x).collect(),
        states: StateGrid::new(xs),
        stages,
    }
}

/// Nearest grid point by linear scan, first index on ties.
pub fn nearest(points: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (j, &p) in points.iter().enumerate() {
        if (p - x).abs() < (points[best] - x).abs() {
            best = j;
        }
    }
    best
}

/// Plain robust backward induction over the generator lists, written
/// independently of the library solver. `values[n][s]`.
pub fn reference_dp(m: &FiniteRobustMDP) -> Vec<Vec<f64>> {
    let s_count = m.num_states();
    let xs = &m.states.points;
    let mut values = vec![vec![0.0; s_count]; m.horizon + 1];
    values[m.horizon] = m.terminal_cost.clone();
    for n in (0..m.horizon).rev() {
        let st = &m.stages[n];
        let gens = st.ambiguity.as_generators().expect("generator stage");
        for s in 0..s_count {
            let mut best = f64::INFINITY;
            for &a in &st.admissible[s] {
                let payoff: Vec<f64> = (0..st.disturbance.len())
                    .map(|i| {
                        let j = nearest(xs, st.raw_next_state(s, xs[s], a, i));
                        st.cost_at(s, xs[s], a, i, xs[j]) + values[n + 1][j]
                    })
                    .collect();
                let worst = st
                    .generators_at(s, a)
                    .iter()
                    .map(|&k| {
                        (0..payoff.len())
                            .map(|i| st.disturbance.probs[i] * gens[k].weights()[i] * payoff[i])
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                best = best.min(worst);
            }
            values[n][s] = best;
        }
    }
    values
}

/// Random step spectrum with at most `max_steps` steps.
pub fn random_spectrum(rng: &mut impl Rng, max_steps: usize) -> robust_mdp::Spectrum {
    let k = rng.gen_range(1..=max_steps);
    let mut inner: Vec<f64> = (1..k).map(|_| rng.gen_range(0.01..0.99)).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut breakpoints = vec![0.0];
    breakpoints.extend(inner);
    breakpoints.push(1.0);
    let mut values: Vec<f64> = (0..breakpoints.len() - 1)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..3.0) })
        .collect();
    values.sort_by(f64::total_cmp);
    if values.iter().all(|&v| v == 0.0) {
        *values.last_mut().unwrap() = 1.0;
    }
    let total: f64 = values.iter().zip(breakpoints.windows(2)).map(|(v, w)| v * (w[1] - w[0])).sum();
    robust_mdp::Spectrum::new(breakpoints, values.into_iter().map(|v| v / total).collect())
}

/// `int_0^1 q_X(u) phi(u) du` on the merged grid of CDF jumps and spectrum
/// breakpoints, with both integrands read at cell midpoints.
pub fn quantile_integral(values: &[f64], probs: &[f64], phi: &robust_mdp::Spectrum) -> f64 {
    let mut atoms: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for &(_, p) in &atoms {
        acc += p;
        cum.push(acc);
    }
    let mut cuts: Vec<f64> = cum.iter().copied().chain(phi.breakpoints.iter().copied()).collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1].min(1.0));
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let q = atoms[cum.iter().position(|&c| c >= mid).unwrap_or(atoms.len() - 1)].0;
        let j = (phi.breakpoints.partition_point(|&b| b <= mid) - 1).min(phi.values.len() - 1);
        total += q * phi.values[j] * (hi - lo);
    }
    total
}
