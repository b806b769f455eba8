//! Joint wind turbine and battery management.
//!
//! The state is the battery level `x in [0, capacity]`, the action the bid
//! `a in [0, max_wind]`, the disturbance the wind energy `z in [0, max_wind]`:
//!
//! ```text
//! T(x, a, z) = min(x + z - a, capacity)   if z >= a
//!              max(x + z - a, 0)          otherwise
//! c(x, a, z) = -a P + (P + penalty) (a - z - x)+
//! ```
//!
//! States, bids and wind values share one lattice of spacing `step`. The
//! reference wind law is uniform on the lattice and the ambiguity set is
//! given by a list of wind laws.

use serde::{Deserialize, Serialize};

use crate::ambiguity::{find_st_extreme, AmbiguitySet, Density, Direction};
use crate::error::{Error, Result};
use crate::model::{uniform_points, ActionSet, Builtin, FiniteDisturbance, FiniteRobustMDP, Stage, StageDynamics, StateGrid};
use crate::solver::solve_robust;

/// A wind law on the lattice `{0, step, ..., max_wind}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WindLaw {
    /// Binomial(m, p) on the `m + 1` lattice points.
    Binomial { p: f64 },
    /// Beta(a, b) density evaluated at cell midpoints and normalized.
    Beta { a: f64, b: f64 },
    /// Explicit probabilities, one per lattice point.
    Pmf { probs: Vec<f64> },
}

impl WindLaw {
    pub fn pmf(&self, points: usize) -> Result<Vec<f64>> {
        let m = points - 1;
        let probs = match self {
            WindLaw::Binomial { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidArgument(format!("binomial p = {p} outside [0, 1]")));
                }
                let mut coef = 1.0;
                (0..=m)
                    .map(|i| {
                        if i > 0 {
                            coef = coef * (m + 1 - i) as f64 / i as f64;
                        }
                        coef * p.powi(i as i32) * (1.0 - p).powi((m - i) as i32)
                    })
                    .collect()
            }
            WindLaw::Beta { a, b } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::InvalidArgument("beta parameters must be positive".into()));
                }
                let raw: Vec<f64> = (0..points)
                    .map(|i| {
                        let u = (i as f64 + 0.5) / points as f64;
                        u.powf(a - 1.0) * (1.0 - u).powf(b - 1.0)
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect()
            }
            WindLaw::Pmf { probs } => {
                if probs.len() != points {
                    return Err(Error::InvalidArgument(format!(
                        "wind pmf has {} entries for {points} lattice points",
                        probs.len()
                    )));
                }
                probs.clone()
            }
        };
        Ok(probs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub horizon: usize,
    pub capacity: f64,
    pub max_wind: f64,
    pub price: f64,
    pub penalty: f64,
    /// Lattice spacing; must divide both `capacity` and `max_wind`.
    pub step: f64,
    /// Generators of the wind ambiguity set.
    pub wind: Vec<WindLaw>,
}

fn lattice_count(len: f64, step: f64, what: &str) -> Result<usize> {
    let k = len / step;
    if !(step > 0.0) || !(len > 0.0) || (k - k.round()).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("step {step} does not divide the {what} {len}")));
    }
    Ok(k.round() as usize + 1)
}

/// The energy instance on the declared lattice.
pub fn energy_build(p: &EnergyParams) -> Result<FiniteRobustMDP> {
    if p.horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if p.price < 0.0 || p.penalty < 0.0 {
        return Err(Error::InvalidArgument("price and penalty must be nonnegative".into()));
    }
    if p.wind.is_empty() {
        return Err(Error::InvalidArgument("at least one wind law is required".into()));
    }
    let states = lattice_count(p.capacity, p.step, "capacity")?;
    let winds = lattice_count(p.max_wind, p.step, "maximal wind")?;
    let support = uniform_points(0.0, p.max_wind, winds);
    let reference = FiniteDisturbance::uniform(support.clone());
    let generators = p
        .wind
        .iter()
        .map(|w| Ok(Density::from_pmf(&w.pmf(winds)?, &reference)))
        .collect::<Result<Vec<_>>>()?;
    let stage = Stage::new(
        states,
        ActionSet::new(support),
        reference,
        AmbiguitySet::generators(generators),
        StageDynamics::builtin(Builtin::Energy {
            capacity: p.capacity,
            price: p.price,
            penalty: p.penalty,
        }),
    );
    let model = FiniteRobustMDP {
        horizon: p.horizon,
        states: StateGrid::uniform(0.0, p.capacity, states),
        stages: vec![stage; p.horizon],
        terminal_cost: vec![0.0; states],
    };
    model.ensure_valid()?;
    Ok(model)
}

/// Whether the robust value equals the value of the classical MDP driven by
/// the `<=_st`-minimal wind law, to within `1e-12`. Fails with
/// [`Error::NoExtremeElement`] if some stage has no such law.
pub fn energy_st_reduction_check(p: &EnergyParams) -> Result<bool> {
    let model = energy_build(p)?;
    let mut reduced = model.clone();
    for stage in &mut reduced.stages {
        let k = find_st_extreme(&stage.ambiguity, &stage.disturbance, Direction::Min)?
            .ok_or(Error::NoExtremeElement("stochastically minimal"))?;
        let g = stage.ambiguity.as_generators().expect("generator set")[k].clone();
        stage.ambiguity = AmbiguitySet::generators(vec![g]);
    }
    let full = solve_robust(&model)?;
    let single = solve_robust(&reduced)?;
    Ok(full
        .values
        .iter()
        .flatten()
        .zip(single.values.iter().flatten())
        .all(|(a, b)| (a - b).abs() <= 1e-12))
}
