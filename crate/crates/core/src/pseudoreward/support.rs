use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite reward alphabet inside `[0, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSupport<T> {
    values: Vec<T>,
    max_reward: T,
}

impl<T: Scalar> RewardSupport<T> {
    /// `values` must be strictly increasing, non-negative and at most `max_reward`.
    pub fn new(values: Vec<T>, max_reward: T) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("reward support is empty".into()));
        }
        if !(max_reward > T::zero()) || !max_reward.is_finite() {
            return Err(Error::Validation(format!("max reward must be positive, got {max_reward}")));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero() || *v > max_reward) {
            return Err(Error::Validation(format!("support values must lie in [0, {max_reward}]")));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation("support values must be strictly increasing".into()));
        }
        Ok(Self { values, max_reward })
    }

    /// Sorts and deduplicates `values`; `b` is the largest value.
    pub fn from_values(values: impl IntoIterator<Item = T>) -> Result<Self> {
        let mut values: Vec<T> = values.into_iter().collect();
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Validation("support value is NaN".into()));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        values.dedup();
        let max = values.last().copied().unwrap_or_else(T::zero);
        Self::new(values, max)
    }

    /// `{0, 1}`.
    pub fn binary() -> Self {
        Self { values: vec![T::zero(), T::one()], max_reward: T::one() }
    }

    /// `{1, 2, ..., m}`.
    pub fn integers(m: u32) -> Result<Self> {
        Self::from_values((1..=m).map(|v| T::count(v as u64)))
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> T {
        self.values[index]
    }

    /// The reward bound `b`.
    pub fn max_reward(&self) -> T {
        self.max_reward
    }

    /// Position of `reward`, tolerating float noise of order `1e-9`.
    pub fn index_of(&self, reward: T) -> Option<usize> {
        let tol = T::lit(1e-9) * reward.abs().max(T::one());
        let i = self.values.partition_point(|v| *v < reward - tol);
        (i < self.values.len() && (self.values[i] - reward).abs() <= tol).then_some(i)
    }

    pub fn require_index(&self, reward: T) -> Result<usize> {
        self.index_of(reward)
            .ok_or_else(|| Error::Parameter(format!("reward {reward} is not in the support")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_supports() {
        assert!(RewardSupport::<f64>::new(vec![], 1.0).is_err());
        assert!(RewardSupport::new(vec![0.0, 0.0], 1.0).is_err());
        assert!(RewardSupport::new(vec![0.5, 0.2], 1.0).is_err());
        assert!(RewardSupport::new(vec![0.0, 2.0], 1.0).is_err());
        assert!(RewardSupport::new(vec![-1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn lookup_tolerates_rounding() {
        let s = RewardSupport::from_values([3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.max_reward(), 3.0);
        assert_eq!(s.index_of(2.0 + 1e-12), Some(1));
        assert_eq!(s.index_of(2.5), None);
        assert_eq!(s.index_of(7.0), None);
    }
}
