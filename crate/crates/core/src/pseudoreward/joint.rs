use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::RewardSupport;

/// Sparse joint law of `(R_0, ..., R_{K-1})` over a shared support.
///
/// Atoms are stored as support indices with their mass; identical reward
/// vectors are merged on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf<T> {
    arms: usize,
    support: RewardSupport<T>,
    atoms: Vec<(Vec<usize>, T)>,
}

impl<T: Scalar> JointPmf<T> {
    /// Builds a pmf from reward vectors given as support values.
    pub fn new(support: RewardSupport<T>, atoms: impl IntoIterator<Item = (Vec<T>, T)>) -> Result<Self> {
        let indexed = atoms
            .into_iter()
            .map(|(v, m)| {
                let idx = v
                    .iter()
                    .map(|&r| {
                        support.index_of(r).ok_or_else(|| {
                            Error::Validation(format!("joint coordinate {r} is not in the support"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((idx, m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(support, indexed)
    }

    /// Builds a pmf from reward vectors given as support indices.
    pub fn from_indices(support: RewardSupport<T>, atoms: impl IntoIterator<Item = (Vec<usize>, T)>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<usize>, T> = BTreeMap::new();
        let mut arms = None;
        for (v, m) in atoms {
            if *arms.get_or_insert(v.len()) != v.len() {
                return Err(Error::Validation("joint atoms have different lengths".into()));
            }
            if v.iter().any(|&i| i >= support.len()) {
                return Err(Error::Validation("joint atom index outside the support".into()));
            }
            if !(m >= T::zero()) || !m.is_finite() {
                return Err(Error::Validation(format!("joint mass must be non-negative, got {m}")));
            }
            let slot = merged.entry(v).or_insert_with(T::zero);
            *slot = *slot + m;
        }
        let arms = arms.ok_or_else(|| Error::Validation("joint pmf has no atoms".into()))?;
        if arms == 0 {
            return Err(Error::Validation("joint pmf needs at least one arm".into()));
        }
        let total: T = merged.values().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if (total - T::one()).abs() > tol {
            return Err(Error::Validation(format!("joint masses sum to {total}, not 1")));
        }
        let atoms = merged.into_iter().filter(|(_, m)| *m > T::zero()).collect();
        Ok(Self { arms, support, atoms })
    }

    /// Point mass on one reward vector.
    pub fn deterministic(support: RewardSupport<T>, rewards: Vec<T>) -> Result<Self> {
        Self::new(support, [(rewards, T::one())])
    }

    /// Independent arms with the given marginals over the support.
    pub fn product(support: RewardSupport<T>, marginals: &[Vec<T>]) -> Result<Self> {
        let mut atoms: Vec<(Vec<usize>, T)> = vec![(Vec::new(), T::one())];
        for m in marginals {
            if m.len() != support.len() {
                return Err(Error::Validation("marginal length differs from support size".into()));
            }
            atoms = atoms
                .into_iter()
                .flat_map(|(v, p)| {
                    m.iter().enumerate().filter(|(_, q)| **q > T::zero()).map(move |(i, &q)| {
                        let mut w = v.clone();
                        w.push(i);
                        (w, p * q)
                    })
                })
                .collect();
        }
        Self::from_indices(support, atoms)
    }

    /// Latent-class Bernoulli model on `{0, 1}`: a hidden class `x` is drawn
    /// with probability `weights[x]`, then arm `k` pays 1 with probability
    /// `probs[x][k]`, independently across arms given `x`.
    pub fn latent_bernoulli(weights: &[T], probs: &[Vec<T>]) -> Result<Self> {
        if weights.len() != probs.len() || weights.is_empty() {
            return Err(Error::Validation("need one probability row per latent class".into()));
        }
        let arms = probs[0].len();
        if probs.iter().any(|row| row.len() != arms) {
            return Err(Error::Validation("latent rows have different arm counts".into()));
        }
        if probs.iter().flatten().any(|p| !(*p >= T::zero() && *p <= T::one())) {
            return Err(Error::Validation("Bernoulli parameters must lie in [0, 1]".into()));
        }
        let mut atoms = Vec::new();
        for (w, row) in weights.iter().zip(probs) {
            let marginals: Vec<Vec<T>> = row.iter().map(|&p| vec![T::one() - p, p]).collect();
            let class = Self::product(RewardSupport::binary(), &marginals)?;
            atoms.extend(class.atoms.into_iter().map(|(v, m)| (v, m * *w)));
        }
        Self::from_indices(RewardSupport::binary(), atoms)
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn support(&self) -> &RewardSupport<T> {
        &self.support
    }

    /// Atoms with positive mass, as (support indices, mass).
    pub fn atoms(&self) -> &[(Vec<usize>, T)] {
        &self.atoms
    }

    /// `P(R_k = support[i])` for every `i`.
    pub fn marginal(&self, arm: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.support.len()];
        for (v, m) in &self.atoms {
            out[v[arm]] = out[v[arm]] + *m;
        }
        out
    }

    pub fn marginals(&self) -> Vec<Vec<T>> {
        (0..self.arms).map(|k| self.marginal(k)).collect()
    }

    pub fn mean(&self, arm: usize) -> T {
        self.atoms.iter().map(|(v, m)| *m * self.support.value(v[arm])).sum()
    }

    pub fn means(&self) -> Vec<T> {
        (0..self.arms).map(|k| self.mean(k)).collect()
    }

    /// Reads `r_0,...,r_{K-1},mass`. Without an explicit support, the support
    /// is the set of reward values appearing in the file.
    pub fn read_csv(path: impl AsRef<Path>, support: Option<RewardSupport<T>>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv_open(path, e))?;
        let headers = reader.headers()?.clone();
        let arms = headers.len().saturating_sub(1);
        let expected: Vec<String> = (0..arms).map(|k| format!("r_{k}")).chain(["mass".to_string()]).collect();
        if arms == 0 || headers.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
            return Err(Error::Schema(format!(
                "{}: joint header must be r_0,...,r_{{K-1}},mass",
                path.display()
            )));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let nums = record
                .iter()
                .map(|f| parse_scalar::<T>(f, path))
                .collect::<Result<Vec<T>>>()?;
            let (mass, rewards) = nums.split_last().expect("non-empty row");
            rows.push((rewards.to_vec(), *mass));
        }
        let support = match support {
            Some(s) => s,
            None => RewardSupport::from_values(rows.iter().flat_map(|(v, _)| v.iter().copied()))?,
        };
        Self::new(support, rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv_open(path, e))?;
        let mut header: Vec<String> = (0..self.arms).map(|k| format!("r_{k}")).collect();
        header.push("mass".into());
        w.write_record(&header)?;
        for (v, m) in &self.atoms {
            let mut row: Vec<String> = v.iter().map(|&i| self.support.value(i).to_string()).collect();
            row.push(m.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn parse_scalar<T: Scalar>(field: &str, path: &Path) -> Result<T> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .and_then(T::from_f64)
        .ok_or_else(|| Error::Schema(format!("{}: {field:?} is not a number", path.display())))
}
