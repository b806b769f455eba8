//! Quantiles, the distributional transform and spectral risk measures.
//!
//! A spectral risk measure `rho(X) = int_0^1 q_X(u) phi(u) du` is evaluated
//! exactly: both the quantile function of a finite law and the spectrum are
//! step functions, so the integral is a finite sum over merged breakpoints.
//! Its dual form `sup E[X Y]` is attained by the density `phi(U_X)`
//! comonotone with `X`, which [`comonotone_density`] constructs.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguityKind, Density, TIE_TOL};
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::{FiniteDisturbance, FiniteRobustMDP};
use crate::solver::{
    controller_choice, CompiledModel, MarkovControllerPolicy, MarkovNaturePolicy, NatureChoice, SolveResult,
};

/// Increasing, right-continuous step function on `[0, 1]` with unit integral:
/// `phi(u) = values[j]` on `[breakpoints[j], breakpoints[j + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        Self { breakpoints, values }
    }

    /// `phi = 1`: the expectation.
    pub fn constant() -> Self {
        Self::new(vec![0.0, 1.0], vec![1.0])
    }

    /// Expected Shortfall at level `alpha`: `phi = 1/(1 - alpha) on [alpha, 1]`.
    pub fn expected_shortfall(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("ES level {alpha} is not in [0, 1)")));
        }
        if alpha == 0.0 {
            return Ok(Self::constant());
        }
        Ok(Self::new(vec![0.0, alpha, 1.0], vec![0.0, 1.0 / (1.0 - alpha)]))
    }

    pub fn violation(&self) -> Option<String> {
        let b = &self.breakpoints;
        if b.len() < 2 || self.values.len() + 1 != b.len() {
            return Some("need k+1 breakpoints for k values (k >= 1)".into());
        }
        if b[0] != 0.0 || *b.last().unwrap() != 1.0 {
            return Some("breakpoints must start at 0 and end at 1".into());
        }
        if b.windows(2).any(|w| w[0] >= w[1]) {
            return Some("breakpoints must be strictly increasing".into());
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Some("values must be finite and nonnegative".into());
        }
        if self.values.windows(2).any(|w| w[0] > w[1]) {
            return Some("values must be increasing".into());
        }
        let total = self.integral(0.0, 1.0);
        if (total - 1.0).abs() > 1e-12 {
            return Some(format!("spectrum integrates to {total}, not 1"));
        }
        None
    }

    /// Value at `u`, right-continuous.
    pub fn eval(&self, u: f64) -> f64 {
        let j = self.breakpoints.partition_point(|&b| b <= u);
        self.values[j.saturating_sub(1).min(self.values.len() - 1)]
    }

    /// `int_lo^hi phi(u) du` for `0 <= lo <= hi <= 1`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(&v, w)| {
                let a = w[0].max(lo);
                let b = w[1].min(hi);
                if b > a {
                    v * (b - a)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("quantile level {alpha} is not in (0, 1)")))
    }
}

/// Lower quantile `inf { x : F(x) >= alpha }`.
pub fn quantile_lower(d: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    let cum = d.cumulative();
    let j = cum.iter().position(|&c| c >= alpha).unwrap_or(cum.len() - 1);
    Ok(d.values()[j])
}

/// Upper quantile `inf { x : F(x) > alpha }`.
pub fn quantile_upper(d: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    let cum = d.cumulative();
    let j = cum.iter().position(|&c| c > alpha).unwrap_or(cum.len() - 1);
    Ok(d.values()[j])
}

/// `rho_phi(X) = int_0^1 q_X(u) phi(u) du`, summed cell by cell over the CDF
/// jump points of `d`.
pub fn spectral_rho(d: &DiscreteDistribution, phi: &Spectrum) -> f64 {
    let mut lo = 0.0;
    d.values()
        .iter()
        .zip(d.cumulative())
        .map(|(&x, hi)| {
            let part = x * phi.integral(lo, hi);
            lo = hi;
            part
        })
        .sum()
}

/// Density comonotone with `payoff` under `probs`: support points sorted by
/// payoff (stable, ties by index) receive `y = (1/p) int phi` over their slice
/// of `[0, 1]`.
pub fn comonotone_density_for(payoff: &[f64], probs: &[f64], phi: &Spectrum) -> Density {
    let mut order: Vec<usize> = (0..payoff.len()).collect();
    order.sort_by(|&i, &j| payoff[i].total_cmp(&payoff[j]));
    density_for_order(&order, probs, phi)
}

/// Comonotone density for the law `d`, aligned with its atoms.
pub fn comonotone_density(d: &DiscreteDistribution, phi: &Spectrum) -> Density {
    comonotone_density_for(d.values(), d.probs(), phi)
}

fn density_for_order(order: &[usize], probs: &[f64], phi: &Spectrum) -> Density {
    let mut y = vec![0.0; probs.len()];
    let mut lo = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let hi = if rank + 1 == order.len() { 1.0 } else { lo + probs[i] };
        y[i] = phi.integral(lo, hi) / probs[i];
        lo = hi;
    }
    Density::new(y)
}

/// `E[X * phi(U_X)]`, the dual representation of `rho_phi(X)`.
pub fn dual_value(d: &DiscreteDistribution, phi: &Spectrum) -> f64 {
    comonotone_density(d, phi).expectation(d.values(), d.probs())
}

/// One comonotone density per ordering of the support points, i.e. the
/// extreme points that the spectral set contributes for some payoff.
/// Duplicates (from ties in `phi`) are removed up to [`TIE_TOL`].
pub fn ordering_generators(probs: &[f64], phi: &Spectrum) -> Vec<Density> {
    let mut out: Vec<Density> = Vec::new();
    let mut perm: Vec<usize> = (0..probs.len()).collect();
    permutations(&mut perm, 0, &mut |order| {
        let d = density_for_order(order, probs, phi);
        let seen = out.iter().any(|o| {
            o.weights()
                .iter()
                .zip(d.weights())
                .all(|(a, b)| (a - b).abs() <= TIE_TOL)
        });
        if !seen {
            out.push(d);
        }
    });
    out
}

fn permutations(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permutations(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedSample {
    pub atom: usize,
    pub u: f64,
}

/// Generalized distributional transform of atom `i` with randomization `v`:
/// `u = F(x_i-) + v (F(x_i) - F(x_i-))`.
pub fn distributional_transform(d: &DiscreteDistribution, i: usize, v: f64) -> Result<TransformedSample> {
    if i >= d.len() {
        return Err(Error::InvalidArgument(format!("atom {i} out of range")));
    }
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidArgument(format!("randomization {v} is not in (0, 1)")));
    }
    let cum = d.cumulative();
    let left = if i == 0 { 0.0 } else { cum[i - 1] };
    Ok(TransformedSample {
        atom: i,
        u: left + v * (cum[i] - left),
    })
}

/// Spectrum `q^+_Y`, the upper quantile function of the law of `y` under the
/// reference measure.
pub fn spectrum_from_density(y: &Density, reference: &FiniteDisturbance) -> Spectrum {
    let law = y.law(reference);
    let mut breakpoints = vec![0.0];
    breakpoints.extend(law.cumulative());
    Spectrum::new(breakpoints, law.values().to_vec())
}

/// Backward induction with the stagewise spectral risk measure of cost plus
/// continuation under the reference law.
pub fn solve_risk_form(model: &FiniteRobustMDP) -> Result<SolveResult> {
    model.ensure_valid()?;
    let spectra: Vec<&Spectrum> = model
        .stages
        .iter()
        .enumerate()
        .map(|(n, st)| match &st.ambiguity.kind {
            AmbiguityKind::Spectral(phi) => Ok(phi),
            AmbiguityKind::Generators(_) => {
                Err(Error::Unsupported(format!("stage {n} has a generator ambiguity set")))
            }
        })
        .collect::<Result<_>>()?;
    let compiled = CompiledModel::new(model);
    let num_states = model.num_states();
    let horizon = model.horizon;
    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = model.terminal_cost.clone();
    let mut actions = vec![Vec::new(); horizon];
    let mut nature = vec![Vec::new(); horizon];
    for n in (0..horizon).rev() {
        let stage = &model.stages[n];
        let probs = &stage.disturbance.probs;
        let phi = spectra[n];
        let mut row = Vec::with_capacity(num_states);
        let mut act_row = Vec::with_capacity(num_states);
        let mut nat_row = Vec::with_capacity(num_states);
        for s in 0..num_states {
            let mut choices = vec![None; stage.actions.len()];
            let mut scored = Vec::new();
            for &a in &stage.admissible[s] {
                let payoff = compiled.payoff(n, s, a, &values[n + 1]);
                let law = DiscreteDistribution::from_parts(&payoff, probs);
                scored.push((a, spectral_rho(&law, phi)));
                choices[a] = Some(NatureChoice::Comonotone(comonotone_density_for(&payoff, probs, phi)));
            }
            let (best, a) = controller_choice(&scored, TIE_TOL);
            row.push(best);
            act_row.push(a);
            nat_row.push(choices);
        }
        values[n] = row;
        actions[n] = act_row;
        nature[n] = nat_row;
    }
    Ok(SolveResult::new(
        values,
        MarkovControllerPolicy { actions },
        MarkovNaturePolicy { choices: nature },
    ))
}
