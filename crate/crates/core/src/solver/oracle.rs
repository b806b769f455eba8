//! Exhaustive enumeration of policy pairs, used to check backward induction.
//!
//! Only nature's choices at the controller's own action affect a pair's
//! value, so for each controller the enumeration ranges over the generator
//! index at `(n, s, d_n(s))` only. The number of pair evaluations is then
//! `prod_{n,s} sum_{a in D_n(s)} |G(n, s, a)|`.

use rayon::prelude::*;

use super::{MarkovControllerPolicy, MarkovNaturePolicy, NatureChoice};
use crate::ambiguity::{AmbiguityKind, Density};
use crate::error::{Error, Result};
use crate::model::{FiniteRobustMDP, Outcome};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Min-max value per start state with a pair attaining it.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub values: Vec<f64>,
    pub controllers: Vec<MarkovControllerPolicy>,
    pub natures: Vec<MarkovNaturePolicy>,
}

fn generator_stages(model: &FiniteRobustMDP) -> Result<Vec<&[Density]>> {
    model
        .stages
        .iter()
        .enumerate()
        .map(|(n, st)| match &st.ambiguity.kind {
            AmbiguityKind::Generators(g) => Ok(g.as_slice()),
            AmbiguityKind::Spectral(_) => Err(Error::Unsupported(format!(
                "stage {n}: the oracle enumerates generator sets only"
            ))),
        })
        .collect()
}

fn check_cap(count: u128, cap: u128) -> Result<()> {
    if count > cap {
        Err(Error::EnumerationCap { count, cap })
    } else {
        Ok(())
    }
}

/// Per-`(n, s, a)` expected payoff data for one generator:
/// `sum_i p_i y_i [c_i + v(next_i)]` is `const + sum_i w_i v(next_i)`.
#[derive(Clone)]
struct Weighted {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Weighted {
    fn new(outcomes: &[Outcome], probs: &[f64], y: &Density) -> Self {
        let mut constant = 0.0;
        let mut terms = Vec::with_capacity(outcomes.len());
        for ((o, &p), &w) in outcomes.iter().zip(probs).zip(y.weights()) {
            let q = p * w;
            constant += q * o.cost;
            terms.push((o.next, q));
        }
        Self { constant, terms }
    }

    fn eval(&self, v: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, q)| q * v[j]).sum::<f64>()
    }
}

struct Candidate {
    value: f64,
    controller: u64,
    nature: u64,
}

/// `min` over Markov controllers of `max` over Markov natures of the pair
/// value at stage 0, per start state. Refuses instances whose enumeration
/// count exceeds `cap`.
pub fn oracle_min_max(model: &FiniteRobustMDP, cap: u128) -> Result<OracleResult> {
    model.ensure_valid()?;
    let gens = generator_stages(model)?;
    let horizon = model.horizon;
    let num_states = model.num_states();

    let mut count: u128 = 1;
    for stage in &model.stages {
        for s in 0..num_states {
            let branch: u128 = stage.admissible[s]
                .iter()
                .map(|&a| stage.generators_at(s, a).len() as u128)
                .sum();
            count = count.saturating_mul(branch);
        }
    }
    check_cap(count, cap)?;

    // weighted[n][s][a][j]: payoff data of the j-th allowed generator.
    let weighted: Vec<Vec<Vec<Vec<Weighted>>>> = model
        .stages
        .iter()
        .enumerate()
        .map(|(n, stage)| {
            (0..num_states)
                .map(|s| {
                    (0..stage.actions.len())
                        .map(|a| {
                            if !stage.is_admissible(s, a) {
                                return Vec::new();
                            }
                            let outcomes = model.outcomes(n, s, a);
                            stage
                                .generators_at(s, a)
                                .iter()
                                .map(|&k| Weighted::new(&outcomes, &stage.disturbance.probs, &gens[n][k]))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    // Mixed-radix digit slots ordered stage 0 first, so the fastest-moving
    // digits only force recomputation of stage 0.
    let slots: Vec<(usize, usize)> = (0..horizon).flat_map(|n| (0..num_states).map(move |s| (n, s))).collect();
    let controller_radix: Vec<u64> = slots
        .iter()
        .map(|&(n, s)| model.stages[n].admissible[s].len() as u64)
        .collect();
    let num_controllers: u64 = controller_radix.iter().product();

    let decode_controller = |mut idx: u64| -> Vec<Vec<usize>> {
        let mut acts = vec![vec![0; num_states]; horizon];
        for (slot, &(n, s)) in slots.iter().enumerate() {
            let r = controller_radix[slot];
            acts[n][s] = model.stages[n].admissible[s][(idx % r) as usize];
            idx /= r;
        }
        acts
    };

    let evaluate_controller = |c: u64| -> Vec<Candidate> {
        let acts = decode_controller(c);
        let radix: Vec<usize> = slots.iter().map(|&(n, s)| weighted[n][s][acts[n][s]].len()).collect();
        let mut digits = vec![0usize; slots.len()];
        let mut v = vec![vec![0.0; num_states]; horizon + 1];
        v[horizon] = model.terminal_cost.clone();
        let recompute = |v: &mut Vec<Vec<f64>>, digits: &[usize], top: usize| {
            for n in (0..=top).rev() {
                for s in 0..num_states {
                    let w = &weighted[n][s][acts[n][s]][digits[n * num_states + s]];
                    v[n][s] = w.eval(&v[n + 1]);
                }
            }
        };
        recompute(&mut v, &digits, horizon - 1);
        let mut best: Vec<Candidate> = v[0]
            .iter()
            .map(|&value| Candidate {
                value,
                controller: c,
                nature: 0,
            })
            .collect();
        let mut nature_idx: u64 = 0;
        loop {
            let mut slot = 0;
            while slot < digits.len() && digits[slot] + 1 == radix[slot] {
                digits[slot] = 0;
                slot += 1;
            }
            if slot == digits.len() {
                break;
            }
            digits[slot] += 1;
            nature_idx += 1;
            recompute(&mut v, &digits, slots[slot].0);
            for (b, &value) in best.iter_mut().zip(&v[0]) {
                if value > b.value {
                    b.value = value;
                    b.nature = nature_idx;
                }
            }
        }
        best
    };

    let better = |a: &Candidate, b: &Candidate| a.value < b.value || (a.value == b.value && a.controller < b.controller);
    let best: Vec<Candidate> = (0..num_controllers)
        .into_par_iter()
        .map(evaluate_controller)
        .reduce_with(|x, y| x.into_iter().zip(y).map(|(a, b)| if better(&b, &a) { b } else { a }).collect())
        .expect("at least one controller");

    let mut values = Vec::with_capacity(num_states);
    let mut controllers = Vec::with_capacity(num_states);
    let mut natures = Vec::with_capacity(num_states);
    for cand in best {
        let acts = decode_controller(cand.controller);
        let mut choices: Vec<Vec<Vec<Option<NatureChoice>>>> = model
            .stages
            .iter()
            .map(|st| {
                (0..num_states)
                    .map(|s| {
                        (0..st.actions.len())
                            .map(|a| {
                                st.is_admissible(s, a)
                                    .then(|| NatureChoice::Generator(st.generators_at(s, a)[0]))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut idx = cand.nature;
        for &(n, s) in &slots {
            let allowed = model.stages[n].generators_at(s, acts[n][s]);
            let r = allowed.len() as u64;
            choices[n][s][acts[n][s]] = Some(NatureChoice::Generator(allowed[(idx % r) as usize]));
            idx /= r;
        }
        values.push(cand.value);
        controllers.push(MarkovControllerPolicy { actions: acts });
        natures.push(MarkovNaturePolicy { choices });
    }
    Ok(OracleResult {
        values,
        controllers,
        natures,
    })
}

/// Inf-sup value over history-dependent deterministic policies of both
/// players, per start state. Horizons 1 and 2 only.
///
/// At horizon 2 the controller's stage-1 rule is a function of `x_1` for
/// each `(x_0, a_0)` branch, and nature's stage-1 choice may depend on the
/// whole history `(x_0, a_0, x_1, a_1)`; both are enumerated exhaustively
/// per branch.
pub fn oracle_history_value(model: &FiniteRobustMDP, cap: u128) -> Result<Vec<f64>> {
    model.ensure_valid()?;
    if model.horizon > 2 {
        return Err(Error::Unsupported(format!(
            "history enumeration supports horizons up to 2, got {}",
            model.horizon
        )));
    }
    let gens = generator_stages(model)?;
    let num_states = model.num_states();
    let term = &model.terminal_cost;
    let st0 = &model.stages[0];
    let probs0 = &st0.disturbance.probs;

    if model.horizon == 1 {
        let count: u128 = (0..num_states)
            .map(|s| st0.admissible[s].iter().map(|&a| st0.generators_at(s, a).len() as u128).sum::<u128>())
            .sum();
        check_cap(count, cap)?;
        return Ok((0..num_states)
            .map(|s| {
                st0.admissible[s]
                    .iter()
                    .map(|&a| {
                        let o = model.outcomes(0, s, a);
                        st0.generators_at(s, a)
                            .iter()
                            .map(|&k| Weighted::new(&o, probs0, &gens[0][k]).eval(term))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect());
    }

    let st1 = &model.stages[1];
    // Stage-1 data: w1[s][a] lists the per-generator continuation values.
    let w1: Vec<Vec<Vec<f64>>> = (0..num_states)
        .map(|s| {
            (0..st1.actions.len())
                .map(|a| {
                    if !st1.is_admissible(s, a) {
                        return Vec::new();
                    }
                    let o = model.outcomes(1, s, a);
                    st1.generators_at(s, a)
                        .iter()
                        .map(|&k| Weighted::new(&o, &st1.disturbance.probs, &gens[1][k]).eval(term))
                        .collect()
                })
                .collect()
        })
        .collect();

    // Stage-1 rules f: x_1 -> D_1(x_1), and for each the number of
    // history-dependent nature completions.
    let rule_radix: Vec<usize> = (0..num_states).map(|s| st1.admissible[s].len()).collect();
    let num_rules: usize = rule_radix.iter().product();
    let decode_rule = |mut idx: usize| -> Vec<usize> {
        (0..num_states)
            .map(|s| {
                let a = st1.admissible[s][idx % rule_radix[s]];
                idx /= rule_radix[s];
                a
            })
            .collect()
    };
    let mut count: u128 = 0;
    for s in 0..num_states {
        for &a in &st0.admissible[s] {
            let g0 = st0.generators_at(s, a).len() as u128;
            for r in 0..num_rules {
                let f = decode_rule(r);
                let g1: u128 = (0..num_states).map(|x1| w1[x1][f[x1]].len() as u128).product();
                count = count.saturating_add(g0.saturating_mul(g1));
            }
        }
    }
    check_cap(count, cap)?;

    Ok((0..num_states)
        .into_par_iter()
        .map(|s| {
            let mut best = f64::INFINITY;
            for &a0 in &st0.admissible[s] {
                let o0 = model.outcomes(0, s, a0);
                let first: Vec<Weighted> = st0
                    .generators_at(s, a0)
                    .iter()
                    .map(|&k| Weighted::new(&o0, probs0, &gens[0][k]))
                    .collect();
                for r in 0..num_rules {
                    let f = decode_rule(r);
                    let radix: Vec<usize> = (0..num_states).map(|x1| w1[x1][f[x1]].len()).collect();
                    let mut digits = vec![0usize; num_states];
                    let mut worst = f64::NEG_INFINITY;
                    loop {
                        let cont: Vec<f64> = (0..num_states).map(|x1| w1[x1][f[x1]][digits[x1]]).collect();
                        for w in &first {
                            worst = worst.max(w.eval(&cont));
                        }
                        let mut slot = 0;
                        while slot < num_states && digits[slot] + 1 == radix[slot] {
                            digits[slot] = 0;
                            slot += 1;
                        }
                        if slot == num_states {
                            break;
                        }
                        digits[slot] += 1;
                    }
                    best = best.min(worst);
                }
            }
            best
        })
        .collect())
}
