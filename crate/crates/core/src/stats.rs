//! Running per-arm statistics and the index families built from them.
//!
//! Samples are stored as per-(arm, support value) counts. Every sum is
//! recomputed from the counts in support order, so index values do not
//! depend on the order in which rewards arrived.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::confidence::{check_delta, ConfidenceSchedule};
use crate::error::{Error, Result};
use crate::pseudoreward::PseudoRewardTable;
use crate::scalar::Scalar;

/// Which counter plays `t` in the pseudo-UCB exploration bonus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PseudoUcbClock {
    /// Policy rounds; a round of a two-pull policy advances it once.
    #[default]
    Rounds,
    /// Total samples drawn.
    Samples,
}

#[derive(Debug, Clone)]
pub struct ArmStats<T> {
    table: Arc<PseudoRewardTable<T>>,
    counts: Vec<u64>,
    pulls: Vec<u64>,
    round: u64,
    total: u64,
    clock: PseudoUcbClock,
}

/// `b sqrt(2 ln max(t, 2) / n)`.
pub fn exploration_bonus<T: Scalar>(b: T, t: T, n: u64) -> T {
    b * (T::lit(2.0) * t.max(T::lit(2.0)).ln() / T::count(n)).sqrt()
}

impl<T: Scalar> ArmStats<T> {
    pub fn new(table: Arc<PseudoRewardTable<T>>) -> Self {
        let k = table.arms();
        let s = table.support().len();
        Self { counts: vec![0; k * s], pulls: vec![0; k], round: 1, total: 0, clock: PseudoUcbClock::default(), table }
    }

    pub fn with_clock(mut self, clock: PseudoUcbClock) -> Self {
        self.clock = clock;
        self
    }

    pub fn arms(&self) -> usize {
        self.pulls.len()
    }

    pub fn table(&self) -> &PseudoRewardTable<T> {
        &self.table
    }

    pub fn pulls(&self, arm: usize) -> u64 {
        self.pulls[arm]
    }

    pub fn all_pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn total_samples(&self) -> u64 {
        self.total
    }

    /// Index of the current round, starting at 1.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub(crate) fn advance_round(&mut self) {
        self.round += 1;
    }

    /// Records a reward given by value.
    pub fn record(&mut self, arm: usize, reward: T) -> Result<()> {
        let i = self.table.support().require_index(reward)?;
        self.record_index(arm, i)
    }

    /// Records the reward `support[index]`.
    pub fn record_index(&mut self, arm: usize, index: usize) -> Result<()> {
        let s = self.table.support().len();
        if arm >= self.arms() {
            return Err(Error::Parameter(format!("arm {arm} out of range for {} arms", self.arms())));
        }
        if index >= s {
            return Err(Error::Parameter(format!("support index {index} out of range")));
        }
        self.counts[arm * s + index] += 1;
        self.pulls[arm] += 1;
        self.total += 1;
        Ok(())
    }

    fn require_pulled(&self, arm: usize) -> Result<u64> {
        match self.pulls.get(arm) {
            None => Err(Error::Parameter(format!("arm {arm} out of range for {} arms", self.arms()))),
            Some(0) => Err(Error::Precondition(format!("arm {arm} has not been sampled"))),
            Some(&n) => Ok(n),
        }
    }

    fn counts_of(&self, arm: usize) -> &[u64] {
        let s = self.table.support().len();
        &self.counts[arm * s..(arm + 1) * s]
    }

    pub fn reward_sum(&self, arm: usize) -> T {
        let support = self.table.support();
        self.counts_of(arm).iter().enumerate().map(|(i, &c)| T::count(c) * support.value(i)).sum()
    }

    /// `sum over arm k's samples r of s(target, k)(r)`.
    pub fn pseudo_sum(&self, target: usize, source: usize) -> T {
        self.counts_of(source)
            .iter()
            .enumerate()
            .map(|(i, &c)| T::count(c) * self.table.get(target, source, i))
            .sum()
    }

    /// Empirical mean `mu_hat_k`.
    pub fn mean(&self, arm: usize) -> Result<T> {
        let n = self.require_pulled(arm)?;
        Ok(self.reward_sum(arm) / T::count(n))
    }

    /// Empirical pseudo-reward `phi_hat(target, source)`.
    pub fn empirical_pseudo_reward(&self, target: usize, source: usize) -> Result<T> {
        let n = self.require_pulled(source)?;
        Ok(self.pseudo_sum(target, source) / T::count(n))
    }

    /// `U(target, source) = phi_hat(target, source) + B(n_source, delta)`.
    pub fn cross_ucb(&self, target: usize, source: usize, schedule: &ConfidenceSchedule<T>, delta: T) -> Result<T> {
        check_delta(delta)?;
        let phi = self.empirical_pseudo_reward(target, source)?;
        Ok(schedule.upper_unchecked(phi, self.pulls[source], delta))
    }

    /// `min_k U(target, k)` over all arms, eliminated ones included.
    pub fn cross_ucb_min(&self, target: usize, schedule: &ConfidenceSchedule<T>, delta: T) -> Result<T> {
        (0..self.arms())
            .map(|k| self.cross_ucb(target, k, schedule, delta))
            .try_fold(T::infinity(), |acc, u| Ok(acc.min(u?)))
    }

    /// [`cross_ucb_min`](Self::cross_ucb_min) for every target, sharing the width evaluations.
    pub fn cross_ucb_mins(&self, schedule: &ConfidenceSchedule<T>, delta: T) -> Result<Vec<T>> {
        check_delta(delta)?;
        for k in 0..self.arms() {
            self.require_pulled(k)?;
        }
        let widths: Vec<T> = self.pulls.iter().map(|&n| schedule.width_unchecked(n, delta)).collect();
        let kl = schedule.family().is_kl();
        Ok((0..self.arms())
            .map(|l| {
                (0..self.arms())
                    .map(|k| {
                        let phi = self.pseudo_sum(l, k) / T::count(self.pulls[k]);
                        if kl {
                            schedule.upper_unchecked(phi, self.pulls[k], delta)
                        } else {
                            phi + widths[k]
                        }
                    })
                    .fold(T::infinity(), T::min)
            })
            .collect())
    }

    /// The `t` used by the pseudo-UCB bonus under the configured clock.
    pub fn clock_value(&self) -> u64 {
        match self.clock {
            PseudoUcbClock::Rounds => self.round,
            PseudoUcbClock::Samples => self.total,
        }
    }

    /// `I(target, source) = phi_hat(target, source) + b sqrt(2 ln t / n_source)`, with `t` floored at 2.
    pub fn pseudo_ucb(&self, target: usize, source: usize) -> Result<T> {
        let phi = self.empirical_pseudo_reward(target, source)?;
        let b = self.table.max_reward();
        Ok(phi + exploration_bonus(b, T::count(self.clock_value()), self.pulls[source]))
    }

    /// `min_k I(target, k)` over all arms.
    pub fn pseudo_ucb_min(&self, target: usize) -> Result<T> {
        (0..self.arms())
            .map(|k| self.pseudo_ucb(target, k))
            .try_fold(T::infinity(), |acc, u| Ok(acc.min(u?)))
    }

    /// [`pseudo_ucb_min`](Self::pseudo_ucb_min) for every target.
    pub fn pseudo_ucb_mins(&self) -> Result<Vec<T>> {
        for k in 0..self.arms() {
            self.require_pulled(k)?;
        }
        let b = self.table.max_reward();
        let t = T::count(self.clock_value());
        let bonus: Vec<T> = self.pulls.iter().map(|&n| exploration_bonus(b, t, n)).collect();
        Ok((0..self.arms())
            .map(|l| {
                (0..self.arms())
                    .map(|k| self.pseudo_sum(l, k) / T::count(self.pulls[k]) + bonus[k])
                    .fold(T::infinity(), T::min)
            })
            .collect())
    }

    /// Classical upper index `mu_hat_k + B(n_k, delta)` (the diagonal cross index).
    pub fn ucb(&self, arm: usize, schedule: &ConfidenceSchedule<T>, delta: T) -> Result<T> {
        self.cross_ucb(arm, arm, schedule, delta)
    }

    /// `L_k = mu_hat_k - B(n_k, delta)`.
    pub fn lcb(&self, arm: usize, schedule: &ConfidenceSchedule<T>, delta: T) -> Result<T> {
        check_delta(delta)?;
        let mu = self.mean(arm)?;
        Ok(schedule.lower_unchecked(mu, self.pulls[arm], delta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::BoundFamily;
    use crate::instances;
    use crate::pseudoreward::RewardSupport;
    use approx::assert_abs_diff_eq;

    fn two_arm_stats() -> ArmStats<f64> {
        ArmStats::new(Arc::new(instances::two_arm_table()))
    }

    fn howard() -> ConfidenceSchedule<f64> {
        ConfidenceSchedule::new(BoundFamily::HowardLil, 1.0).unwrap()
    }

    #[test]
    fn empirical_pseudo_reward_uses_table() {
        let mut s = two_arm_stats();
        s.record(0, 0.0).unwrap();
        assert_abs_diff_eq!(s.empirical_pseudo_reward(1, 0).unwrap(), 0.7);
        s.record(0, 1.0).unwrap();
        assert_abs_diff_eq!(s.empirical_pseudo_reward(1, 0).unwrap(), 0.55, epsilon = 1e-15);
        assert_eq!(s.empirical_pseudo_reward(0, 0).unwrap(), s.mean(0).unwrap());
        assert_eq!(s.total_samples(), 2);
    }

    #[test]
    fn off_support_and_unsampled_arms_are_rejected() {
        let mut s = two_arm_stats();
        assert!(matches!(s.record(0, 0.5), Err(Error::Parameter(_))));
        assert!(matches!(s.record(2, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(s.mean(1), Err(Error::Precondition(_))));
        assert!(matches!(s.cross_ucb(0, 1, &howard(), 0.1), Err(Error::Precondition(_))));
        assert!(matches!(s.lcb(1, &howard(), 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn cross_ucb_is_phi_plus_width() {
        let mut s = two_arm_stats();
        s.record(0, 0.0).unwrap();
        s.record(0, 1.0).unwrap();
        s.record(1, 1.0).unwrap();
        let w = howard().width(2, 0.05).unwrap();
        assert_abs_diff_eq!(s.cross_ucb(1, 0, &howard(), 0.05).unwrap(), 0.55 + w, epsilon = 1e-15);
        let u0 = s.cross_ucb(0, 0, &howard(), 0.05).unwrap();
        assert_abs_diff_eq!(u0, 0.5 + w, epsilon = 1e-15);
        assert_abs_diff_eq!(u0 - s.lcb(0, &howard(), 0.05).unwrap(), 2.0 * w, epsilon = 1e-15);
        for l in 0..2 {
            let m = s.cross_ucb_min(l, &howard(), 0.05).unwrap();
            assert_eq!(m, s.cross_ucb_mins(&howard(), 0.05).unwrap()[l]);
            assert!(m <= s.cross_ucb(l, l, &howard(), 0.05).unwrap());
        }
    }

    #[test]
    fn lcb_arithmetic() {
        let mut s = two_arm_stats();
        for r in [1.0, 1.0, 0.0, 1.0, 0.0] {
            s.record(0, r).unwrap();
        }
        let w = howard().width(5, 0.1).unwrap();
        assert_abs_diff_eq!(s.lcb(0, &howard(), 0.1).unwrap(), 0.6 - w, epsilon = 1e-15);
        assert!(s.lcb(0, &howard(), 0.01).unwrap() < s.lcb(0, &howard(), 0.1).unwrap());
    }

    #[test]
    fn exploration_bonus_matches_closed_form() {
        let e2 = std::f64::consts::E.powi(2);
        assert_abs_diff_eq!(0.5 + exploration_bonus(1.0, e2, 2), 0.5 + 2f64.sqrt(), epsilon = 1e-12);
        let ratio = exploration_bonus(1.0, 50.0, 8) / exploration_bonus(1.0, 50.0, 4);
        assert_abs_diff_eq!(ratio, 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(exploration_bonus(1.0, 1.0, 3), exploration_bonus(1.0, 2.0, 3));
    }

    #[test]
    fn pseudo_ucb_uses_clock() {
        let mut s = two_arm_stats();
        s.record(0, 1.0).unwrap();
        s.record(1, 0.0).unwrap();
        s.advance_round();
        s.advance_round();
        assert_eq!(s.round(), 3);
        let by_rounds = s.pseudo_ucb(1, 0).unwrap();
        assert_abs_diff_eq!(by_rounds, 0.4 + exploration_bonus(1.0, 3.0, 1), epsilon = 1e-15);
        let s2 = s.clone().with_clock(PseudoUcbClock::Samples);
        assert_abs_diff_eq!(s2.pseudo_ucb(1, 0).unwrap(), 0.4 + exploration_bonus(1.0, 2.0, 1), epsilon = 1e-15);
        let mins = s.pseudo_ucb_mins().unwrap();
        for l in 0..2 {
            assert_eq!(mins[l], s.pseudo_ucb_min(l).unwrap());
            assert!(mins[l] <= s.pseudo_ucb(l, l).unwrap());
        }
    }

    #[test]
    fn full_padding_reduces_to_classical_indices() {
        let t = PseudoRewardTable::exact_from_joint(&instances::five_arm_joint())
            .unwrap()
            .pad_unknown(1.0, 0)
            .unwrap();
        let mut s = ArmStats::new(Arc::new(t));
        for (k, r) in [(0, 1.0), (1, 0.0), (2, 1.0), (3, 1.0), (4, 0.0)] {
            s.record(k, r).unwrap();
        }
        let mins = s.cross_ucb_mins(&howard(), 0.1).unwrap();
        for l in 0..5 {
            let own = s.cross_ucb(l, l, &howard(), 0.1).unwrap();
            for k in 0..5 {
                assert!(s.cross_ucb(l, k, &howard(), 0.1).unwrap() >= own);
            }
            assert_eq!(mins[l], own);
        }
    }

    #[test]
    fn kl_cross_index_is_consistent() {
        let kl = ConfidenceSchedule::new(BoundFamily::Kl, 1.0).unwrap();
        let mut s = two_arm_stats();
        for r in [1.0, 0.0, 0.0, 1.0] {
            s.record(0, r).unwrap();
            s.record(1, 1.0 - r).unwrap();
        }
        let mins = s.cross_ucb_mins(&kl, 0.1).unwrap();
        for l in 0..2 {
            assert_abs_diff_eq!(mins[l], s.cross_ucb_min(l, &kl, 0.1).unwrap(), epsilon = 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn record_order_is_irrelevant(rewards in prop::collection::vec((0usize..3, 0usize..3), 3..40), seed in any::<u64>()) {
                let support = RewardSupport::from_values([0.0, 0.5, 1.0]).unwrap();
                let t = PseudoRewardTable::from_fn(3, support, |l, k, i| (0.1 * (l + 2 * k + i) as f64, true)).unwrap();
                let t = Arc::new(t);
                let mut a = ArmStats::new(t.clone());
                let mut b = ArmStats::new(t);
                let mut shuffled = rewards.clone();
                let n = shuffled.len();
                for i in 0..n {
                    let jdx = (seed.wrapping_mul(i as u64 + 7) % n as u64) as usize;
                    shuffled.swap(i, jdx);
                }
                for (k, i) in &rewards { a.record_index(*k, *i).unwrap(); }
                for (k, i) in &shuffled { b.record_index(*k, *i).unwrap(); }
                for l in 0..3 {
                    for k in 0..3 {
                        if a.pulls(k) > 0 {
                            prop_assert_eq!(a.empirical_pseudo_reward(l, k).unwrap(), b.empirical_pseudo_reward(l, k).unwrap());
                        }
                    }
                }
            }
        }
    }
}
