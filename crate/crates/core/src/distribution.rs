//! Finitely supported distributions on the real line.

use serde::{Deserialize, Serialize};

/// A finitely supported law in canonical form: atoms sorted by value, equal
/// values merged, zero-probability atoms dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds the canonical form of `(value, prob)` pairs. Probabilities are
    /// taken as given; callers are responsible for them summing to one.
    pub fn from_atoms<I>(atoms: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().filter(|&(_, p)| p > 0.0).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut probs: Vec<f64> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match values.last() {
                Some(&last) if last == v => *probs.last_mut().unwrap() += p,
                _ => {
                    values.push(v);
                    probs.push(p);
                }
            }
        }
        Self { values, probs }
    }

    pub fn from_parts(values: &[f64], probs: &[f64]) -> Self {
        Self::from_atoms(values.iter().copied().zip(probs.iter().copied()))
    }

    pub fn point_mass(value: f64) -> Self {
        Self {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    /// Equal weights on the given values (duplicates merge).
    pub fn uniform(values: &[f64]) -> Self {
        let w = 1.0 / values.len() as f64;
        Self::from_atoms(values.iter().map(|&v| (v, w)))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v * p).sum()
    }

    /// `P(X <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms().take_while(|&(v, _)| v <= t).map(|(_, p)| p).sum()
    }

    /// `P(X < t)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        self.atoms().take_while(|&(v, _)| v < t).map(|(_, p)| p).sum()
    }

    /// Stop-loss transform `E[(X - t)+]`.
    pub fn stop_loss(&self, t: f64) -> f64 {
        self.atoms().filter(|&(v, _)| v > t).map(|(v, p)| (v - t) * p).sum()
    }

    /// Cumulative probabilities at each atom, with the last one pinned to 1.
    pub(crate) fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// Law of `X + c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self::from_atoms(self.atoms().map(|(v, p)| (v + c, p)))
    }

    /// Law of `k X`.
    pub fn scaled(&self, k: f64) -> Self {
        Self::from_atoms(self.atoms().map(|(v, p)| (v * k, p)))
    }
}

/// Sorted, deduplicated union of the supports of two distributions.
pub(crate) fn union_support(d1: &DiscreteDistribution, d2: &DiscreteDistribution) -> Vec<f64> {
    let mut pts: Vec<f64> = d1.values().iter().chain(d2.values()).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}
