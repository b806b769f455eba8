//! Ambiguity sets as finite density families, stochastic-order checks and
//! the reductions they enable.
//!
//! A `GENERATORS` set denotes the convex hull of its densities. The supremum
//! of a linear functional over the hull is attained at a generator, so the
//! worst case is found by scanning generators. Ties resolve to the lowest
//! index everywhere so witnesses are deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{union_support, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::model::{FiniteDisturbance, PROB_TOL};
use crate::risk::{comonotone_density_for, spectral_rho, Spectrum};

/// Tolerance for CDF comparisons in the usual stochastic order.
pub const ORDER_TOL: f64 = 1e-12;
/// Tolerance for the mean equality and stop-loss comparisons of the convex order.
pub const CX_TOL: f64 = 1e-10;
/// Two objective values within this distance count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Radon-Nikodym weights `y_i = dQ/dP(z_i)` aligned with the disturbance support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Density(Vec<f64>);

impl Density {
    pub fn new(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    /// The reference measure itself.
    pub fn ones(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    /// Density of the law with probabilities `pmf` relative to `reference`.
    pub fn from_pmf(pmf: &[f64], reference: &FiniteDisturbance) -> Self {
        Self(pmf.iter().zip(&reference.probs).map(|(q, p)| q / p).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `E^P[y * payoff]`.
    pub fn expectation(&self, payoff: &[f64], probs: &[f64]) -> f64 {
        probs
            .iter()
            .zip(&self.0)
            .zip(payoff)
            .map(|((p, y), v)| p * y * v)
            .sum()
    }

    /// Law of the weight itself as a random variable under the reference.
    pub fn law(&self, reference: &FiniteDisturbance) -> DiscreteDistribution {
        DiscreteDistribution::from_parts(&self.0, &reference.probs)
    }

    pub fn violation(&self, reference: &FiniteDisturbance) -> Option<String> {
        if self.0.len() != reference.len() {
            return Some(format!(
                "density has {} weights for {} support points",
                self.0.len(),
                reference.len()
            ));
        }
        if self.0.iter().any(|y| !(*y >= 0.0) || !y.is_finite()) {
            return Some("density weights must be finite and nonnegative".into());
        }
        let total = self.expectation(&vec![1.0; self.0.len()], &reference.probs);
        if (total - 1.0).abs() > PROB_TOL {
            return Some(format!("density integrates to {total}, not 1"));
        }
        None
    }

    pub fn is_valid(&self, reference: &FiniteDisturbance) -> bool {
        self.violation(reference).is_none()
    }

    /// `sum_k w_k y_k`.
    pub fn mixture(densities: &[Density], weights: &[f64]) -> Density {
        let m = densities.first().map_or(0, Density::len);
        let mut out = vec![0.0; m];
        for (d, &w) in densities.iter().zip(weights) {
            for (o, y) in out.iter_mut().zip(&d.0) {
                *o += w * y;
            }
        }
        Density(out)
    }
}

/// Exponent `q` of the `L^q` space the ambiguity set lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QExponent {
    Finite(f64),
    Infinity,
}

impl Serialize for QExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            QExponent::Finite(q) => s.serialize_f64(*q),
            QExponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for QExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) => Ok(QExponent::Finite(q)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(QExponent::Infinity),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid q exponent {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmbiguityKind {
    Generators(Vec<Density>),
    Spectral(Spectrum),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    pub kind: AmbiguityKind,
    /// Diagnostic metadata consumed by the bounding checks.
    pub q: Option<QExponent>,
    pub norm_bound: Option<f64>,
}

impl AmbiguitySet {
    pub fn generators(densities: Vec<Density>) -> Self {
        Self {
            kind: AmbiguityKind::Generators(densities),
            q: None,
            norm_bound: None,
        }
    }

    pub fn spectral(phi: Spectrum) -> Self {
        Self {
            kind: AmbiguityKind::Spectral(phi),
            q: None,
            norm_bound: None,
        }
    }

    /// `{P}`: the reference measure only.
    pub fn singleton(m: usize) -> Self {
        Self::generators(vec![Density::ones(m)])
    }

    pub fn as_generators(&self) -> Option<&[Density]> {
        match &self.kind {
            AmbiguityKind::Generators(g) => Some(g),
            AmbiguityKind::Spectral(_) => None,
        }
    }
}

/// Worst-case expectation and the density attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct Supremum {
    pub value: f64,
    pub density: Density,
    /// Generator index of the witness; `None` for the comonotone witness of
    /// a spectral set.
    pub generator: Option<usize>,
}

/// `sup_{Q in set} E^Q[payoff]`.
pub fn sup_over_set(set: &AmbiguitySet, payoff: &[f64], reference: &FiniteDisturbance) -> Supremum {
    match &set.kind {
        AmbiguityKind::Generators(gens) => {
            let (value, k) = best_generator(gens, 0..gens.len(), payoff, &reference.probs);
            Supremum {
                value,
                density: gens[k].clone(),
                generator: Some(k),
            }
        }
        AmbiguityKind::Spectral(phi) => {
            let d = DiscreteDistribution::from_parts(payoff, &reference.probs);
            Supremum {
                value: spectral_rho(&d, phi),
                density: comonotone_density_for(payoff, &reference.probs, phi),
                generator: None,
            }
        }
    }
}

/// Maximum of `E^{Q_k}[payoff]` over the listed generator indices; the
/// returned index is the lowest one within [`TIE_TOL`] of the maximum.
pub(crate) fn best_generator(
    gens: &[Density],
    indices: impl IntoIterator<Item = usize>,
    payoff: &[f64],
    probs: &[f64],
) -> (f64, usize) {
    let vals: Vec<(usize, f64)> = indices
        .into_iter()
        .map(|k| (k, gens[k].expectation(payoff, probs)))
        .collect();
    let best = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let k = vals
        .iter()
        .find(|v| v.1 >= best - TIE_TOL)
        .map(|v| v.0)
        .expect("generator list is nonempty");
    (best, k)
}

/// `d1 <=_st d2`: `F_1(t) >= F_2(t)` at every point of the union of supports.
/// Both CDFs are step functions jumping only there, so this is exact.
pub fn usual_order_leq(d1: &DiscreteDistribution, d2: &DiscreteDistribution) -> bool {
    union_support(d1, d2)
        .into_iter()
        .all(|t| d1.cdf(t) >= d2.cdf(t) - ORDER_TOL)
}

/// `d1 <=_cx d2`: equal means and `E[(X1 - t)+] <= E[(X2 - t)+]` at every
/// kink of the piecewise-linear stop-loss transforms.
pub fn convex_order_leq(d1: &DiscreteDistribution, d2: &DiscreteDistribution) -> bool {
    if (d1.mean() - d2.mean()).abs() > CX_TOL {
        return false;
    }
    union_support(d1, d2)
        .into_iter()
        .all(|t| d1.stop_loss(t) <= d2.stop_loss(t) + CX_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

/// Generator whose disturbance law dominates (`Max`) or is dominated by
/// (`Min`) every other generator's law in `<=_st`. Returns its index.
pub fn find_st_extreme(
    set: &AmbiguitySet,
    reference: &FiniteDisturbance,
    direction: Direction,
) -> Result<Option<usize>> {
    let gens = set
        .as_generators()
        .ok_or_else(|| Error::Unsupported("stochastic-order extremes need a generator set".into()))?;
    let laws: Vec<DiscreteDistribution> = gens.iter().map(|g| reference.law_under(g)).collect();
    Ok((0..laws.len()).find(|&k| {
        laws.iter().all(|other| match direction {
            Direction::Max => usual_order_leq(other, &laws[k]),
            Direction::Min => usual_order_leq(&laws[k], other),
        })
    }))
}

/// Generator whose weight, as a random variable under the reference,
/// dominates all other generators in `<=_cx`. Returns its index.
pub fn find_cx_maximal(set: &AmbiguitySet, reference: &FiniteDisturbance) -> Result<Option<usize>> {
    let gens = set
        .as_generators()
        .ok_or_else(|| Error::Unsupported("convex-order maxima need a generator set".into()))?;
    let laws: Vec<DiscreteDistribution> = gens.iter().map(|g| g.law(reference)).collect();
    Ok((0..laws.len()).find(|&k| laws.iter().all(|other| convex_order_leq(other, &laws[k]))))
}

/// Appends `samples` random convex combinations of the generators
/// (Dirichlet(1) weights from a ChaCha8 stream seeded with `seed`).
pub fn convex_combinations(set: &AmbiguitySet, samples: usize, seed: u64) -> Result<AmbiguitySet> {
    let gens = set
        .as_generators()
        .ok_or_else(|| Error::Unsupported("convex combinations need a generator set".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = gens.to_vec();
    for _ in 0..samples {
        let raw: Vec<f64> = gens.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        out.push(Density::mixture(gens, &w));
    }
    Ok(AmbiguitySet {
        kind: AmbiguityKind::Generators(out),
        ..set.clone()
    })
}
