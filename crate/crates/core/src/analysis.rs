//! Ground-truth analytics for an instance: gaps, pseudo-gaps, the
//! competitive set, `t0`, the theoretical sample bounds, and Monte-Carlo
//! checks of the pseudo-UCB tail bounds.
//!
//! Gaps enter the bounds normalised by `b`, so the formulas see rewards in
//! `[0, 1]`. The inner `ln(1/gap^2)` is floored at 1 to keep the outer
//! logarithm defined for large gaps.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::check_delta;
use crate::environment::{BestArm, Environment};
use crate::error::{Error, Result};
use crate::pseudoreward::{JointPmf, PseudoRewardTable, RewardSupport};
use crate::rng;
use crate::scalar::Scalar;

/// Pseudo-gaps within this distance of zero count as competitive.
pub const COMPETITIVE_TOLERANCE: f64 = 1e-9;
/// Largest `t0` searched before giving up.
pub const T0_CAP: u64 = 1_000_000_000;
/// Default `zeta` in the bound formulas.
pub const DEFAULT_ZETA: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitiveSummary<T> {
    pub means: Vec<T>,
    pub best_arm: usize,
    /// Another arm's mean ties the best within `1e-12`.
    pub tie: bool,
    pub second_arm: usize,
    /// `mu_best - mu_k`; the best arm carries the smallest gap.
    pub gaps: Vec<T>,
    /// `mu_second - phi(l, best)`.
    pub pseudo_gaps: Vec<T>,
    pub competitive_set: Vec<usize>,
    pub t0: u64,
    /// `t0` search hit [`T0_CAP`].
    pub t0_capped: bool,
    pub delta: T,
    pub zeta: T,
    pub bound_clucb: T,
    pub bound_lucb: T,
    pub bound_lucbpp: T,
    /// The `O(1)` part of the C-LUCB bound, reported but not compared.
    pub additive_clucb: T,
    /// Arms whose gap is zero, which makes their bound terms infinite.
    pub degenerate_arms: Vec<usize>,
}

/// `phi(l, k) = sum_r P(R_k = r) s(l, k)(r)`.
pub fn expected_pseudo_reward<T: Scalar>(
    joint: &JointPmf<T>,
    table: &PseudoRewardTable<T>,
    target: usize,
    source: usize,
) -> Result<T> {
    check_shapes(joint.arms(), joint.support(), table)?;
    if target >= table.arms() || source >= table.arms() {
        return Err(Error::Parameter("arm index out of range".into()));
    }
    Ok(phi(&joint.marginal(source), table, target, source))
}

fn phi<T: Scalar>(marginal: &[T], table: &PseudoRewardTable<T>, target: usize, source: usize) -> T {
    marginal.iter().enumerate().map(|(i, &p)| p * table.get(target, source, i)).sum()
}

fn check_shapes<T: Scalar>(arms: usize, support: &RewardSupport<T>, table: &PseudoRewardTable<T>) -> Result<()> {
    if arms != table.arms() || support != table.support() {
        return Err(Error::Validation("instance and table differ in arms or support".into()));
    }
    Ok(())
}

/// Competitive summary of a joint pmf.
pub fn competitive_summary<T: Scalar>(
    joint: &JointPmf<T>,
    table: &PseudoRewardTable<T>,
    delta: T,
    zeta: T,
) -> Result<CompetitiveSummary<T>> {
    check_shapes(joint.arms(), joint.support(), table)?;
    summary_from_marginals(&joint.marginals(), table, delta, zeta)
}

/// Competitive summary of any environment; only its marginals matter.
pub fn competitive_summary_for<T: Scalar>(
    env: &dyn Environment<T>,
    table: &PseudoRewardTable<T>,
    delta: T,
    zeta: T,
) -> Result<CompetitiveSummary<T>> {
    check_shapes(env.arms(), env.support(), table)?;
    summary_from_marginals(&env.marginals(), table, delta, zeta)
}

fn summary_from_marginals<T: Scalar>(
    marginals: &[Vec<T>],
    table: &PseudoRewardTable<T>,
    delta: T,
    zeta: T,
) -> Result<CompetitiveSummary<T>> {
    check_delta(delta)?;
    if !(zeta > T::zero()) {
        return Err(Error::Parameter(format!("zeta must be positive, got {zeta}")));
    }
    let k = marginals.len();
    if k < 2 {
        return Err(Error::Parameter("competitive summary needs at least 2 arms".into()));
    }
    let support = table.support();
    let means: Vec<T> = marginals
        .iter()
        .map(|m| m.iter().enumerate().map(|(i, &p)| p * support.value(i)).sum())
        .collect();
    let BestArm { arm: best, tie } = BestArm::from_means(&means);
    let second = (0..k)
        .filter(|&a| a != best)
        .fold(None, |acc: Option<usize>, a| match acc {
            Some(s) if !(means[a] > means[s]) => Some(s),
            _ => Some(a),
        })
        .expect("at least two arms");
    let min_gap = means[best] - means[second];
    let gaps: Vec<T> = (0..k).map(|a| if a == best { min_gap } else { means[best] - means[a] }).collect();
    let pseudo_gaps: Vec<T> = (0..k).map(|l| means[second] - phi(&marginals[best], table, l, best)).collect();
    let tol = T::lit(COMPETITIVE_TOLERANCE);
    let competitive_set: Vec<usize> =
        (0..k).filter(|&l| l == best || l == second || pseudo_gaps[l] <= tol).collect();

    let b = table.max_reward();
    let kf = T::count(k as u64);
    let two = T::lit(2.0);
    let term = |gap: T, factor: T| -> T {
        let g = gap / b;
        if !(g > T::zero()) {
            return T::infinity();
        }
        let inner = (T::one() / (g * g)).ln().max(T::one());
        two * zeta / (g * g) * (factor * inner / delta).ln()
    };
    let bound_clucb = competitive_set.iter().map(|&a| term(gaps[a], two * kf)).sum();
    let bound_lucb = (0..k).map(|a| term(gaps[a], kf)).sum();
    let bound_lucbpp =
        (0..k).filter(|&a| a != best).map(|a| term(gaps[a], T::one())).sum::<T>() + term(min_gap, kf);
    let degenerate_arms = (0..k).filter(|&a| !(gaps[a] > T::zero())).collect();

    let (t0, t0_capped) = t0_scan((min_gap / b).as_f64(), k);
    let t0f = t0 as f64;
    let (kd, dd) = (k as f64, delta.as_f64());
    let additive = (3.0 * kd + 2.0 * kd * t0f) / (1.0 - dd)
        + 2.0 / (1.0 - dd) * ((kd + 1.0).powi(3) / t0f + 2.0 / (t0f * t0f));

    Ok(CompetitiveSummary {
        means,
        best_arm: best,
        tie,
        second_arm: second,
        gaps,
        pseudo_gaps,
        competitive_set,
        t0,
        t0_capped,
        delta,
        zeta,
        bound_clucb,
        bound_lucb,
        bound_lucbpp,
        additive_clucb: T::lit(additive),
        degenerate_arms,
    })
}

fn t0_holds(gap: f64, arms: usize, tau: u64) -> bool {
    let t = tau as f64;
    gap >= 4.0 * (2.0 * arms as f64 * t.ln() / t).sqrt()
}

/// Smallest `tau >= 2` with `gap >= 4 sqrt(2 K ln(tau) / tau)`.
///
/// `ln(tau)/tau` decreases from `tau = 3` on, so the condition is monotone
/// there and a doubling search followed by bisection finds the first hit.
/// Returns `(T0_CAP, true)` when the condition fails up to the cap.
pub fn t0_scan(gap: f64, arms: usize) -> (u64, bool) {
    if t0_holds(gap, arms, 2) {
        return (2, false);
    }
    if !(gap > 0.0) || !t0_holds(gap, arms, T0_CAP) {
        return (T0_CAP, true);
    }
    let mut lo = 2;
    let mut hi = 3;
    while !t0_holds(gap, arms, hi) {
        lo = hi;
        hi = (hi * 2).min(T0_CAP);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if t0_holds(gap, arms, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// `P(mu_best > I(best, best)(t)) <= t^-3`.
    L3Single,
    /// `P(mu_best > min_k I(best, k)(t)) <= K t^-3`.
    L4Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRate {
    pub lemma: Lemma,
    pub t: u64,
    pub trials: u64,
    pub exceedances: u64,
    pub rate: f64,
    pub bound: f64,
    /// `bound + 3 sqrt(bound (1 - bound) / trials)`.
    pub limit: f64,
    pub pass: bool,
}

const LEMMA_CHUNK: u64 = 10_000;

/// Simulates `trials` histories of `t` pulls, each pull on a uniformly
/// random arm, and counts how often the best arm's mean exceeds its
/// pseudo-UCB index at time `t`. Arms never pulled contribute no finite index.
pub fn lemma_bound_check<T: Scalar>(
    lemma: Lemma,
    env: &dyn Environment<T>,
    table: &PseudoRewardTable<T>,
    t_values: &[u64],
    trials: u64,
    seed: u64,
) -> Result<Vec<LemmaRate>> {
    check_shapes(env.arms(), env.support(), table)?;
    if trials == 0 {
        return Err(Error::Parameter("lemma check needs at least one trial".into()));
    }
    if t_values.iter().any(|&t| t < 2) {
        return Err(Error::Parameter("lemma check needs t >= 2".into()));
    }
    let k = env.arms();
    let s = table.support().len();
    let best = env.best_arm().arm;
    let mu = env.true_means()[best].as_f64();
    let b = table.max_reward().as_f64();
    let column: Vec<Vec<f64>> = (0..k).map(|src| (0..s).map(|i| table.get(best, src, i).as_f64()).collect()).collect();

    t_values
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let chunks = trials.div_ceil(LEMMA_CHUNK);
            let exceedances: u64 = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = rng::stream(seed, ((ti as u64) << 40) | c);
                    let n_trials = LEMMA_CHUNK.min(trials - c * LEMMA_CHUNK);
                    let mut counts = vec![0u64; k];
                    let mut sums = vec![0.0f64; k];
                    let mut hits = 0;
                    for _ in 0..n_trials {
                        counts.iter_mut().for_each(|c| *c = 0);
                        sums.iter_mut().for_each(|s| *s = 0.0);
                        for _ in 0..t {
                            let arm = rng.gen_range(0..k);
                            let i = env.pull_index(arm, &mut rng).expect("arm in range");
                            counts[arm] += 1;
                            sums[arm] += column[arm][i];
                        }
                        let bonus = |n: u64| b * (2.0 * (t as f64).ln() / n as f64).sqrt();
                        let index = match lemma {
                            Lemma::L3Single => {
                                (counts[best] > 0).then(|| sums[best] / counts[best] as f64 + bonus(counts[best]))
                            }
                            Lemma::L4Min => (0..k)
                                .filter(|&a| counts[a] > 0)
                                .map(|a| sums[a] / counts[a] as f64 + bonus(counts[a]))
                                .reduce(f64::min),
                        };
                        if index.is_some_and(|i| mu > i) {
                            hits += 1;
                        }
                    }
                    hits
                })
                .sum();
            let tf = t as f64;
            let bound = match lemma {
                Lemma::L3Single => tf.powi(-3),
                Lemma::L4Min => k as f64 * tf.powi(-3),
            };
            let p = bound.min(1.0);
            let limit = bound + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
            let rate = exceedances as f64 / trials as f64;
            Ok(LemmaRate { lemma, t, trials, exceedances, rate, bound, limit, pass: rate <= limit })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::TabularEnv;
    use crate::instances;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expected_pseudo_reward_on_two_arm() {
        let j = instances::two_arm_joint_a();
        let t = instances::two_arm_table();
        assert_abs_diff_eq!(expected_pseudo_reward(&j, &t, 1, 0).unwrap(), 0.52, epsilon = 1e-15);
        assert_abs_diff_eq!(expected_pseudo_reward(&j, &t, 0, 0).unwrap(), 0.6, epsilon = 1e-15);
        let exact = PseudoRewardTable::exact_from_joint(&j).unwrap();
        assert_abs_diff_eq!(expected_pseudo_reward(&j, &exact, 1, 0).unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn two_arm_summary() {
        let s = competitive_summary(&instances::two_arm_joint_a(), &instances::two_arm_table(), 0.1, 8.0).unwrap();
        assert_eq!(s.best_arm, 0);
        assert_abs_diff_eq!(s.pseudo_gaps[1], -0.12, epsilon = 1e-12);
        assert_eq!(s.competitive_set, vec![0, 1]);
        for l in 0..2 {
            assert!(s.pseudo_gaps[l] <= s.gaps[l] + 1e-12);
        }
    }

    #[test]
    fn non_competitive_arm_detected() {
        // Means (0.6, 0.5, 0.2). The table is loose but valid: it claims
        // s(2, 0)(1) = 2/3 where the truth is 1/3, so phi(2, 0) = 0.4.
        let s = RewardSupport::binary();
        let j = JointPmf::new(
            s,
            [
                (vec![1.0, 1.0, 1.0], 0.1),
                (vec![1.0, 0.0, 1.0], 0.1),
                (vec![1.0, 1.0, 0.0], 0.2),
                (vec![1.0, 0.0, 0.0], 0.2),
                (vec![0.0, 1.0, 0.0], 0.2),
                (vec![0.0, 0.0, 0.0], 0.2),
            ],
        )
        .unwrap();
        for (m, w) in j.means().iter().zip([0.6, 0.5, 0.2]) {
            assert_abs_diff_eq!(*m, w, epsilon = 1e-12);
        }
        let t = PseudoRewardTable::exact_from_joint(&j).unwrap();
        let u = t.with_entry(2, 0, 1, 2.0 / 3.0, true).unwrap().with_entry(2, 0, 0, 0.0, true).unwrap();
        assert!(u.validate_dominance(&j).unwrap().is_empty());
        assert_abs_diff_eq!(expected_pseudo_reward(&j, &u, 2, 0).unwrap(), 0.4, epsilon = 1e-12);
        let s = competitive_summary(&j, &u, 0.1, 8.0).unwrap();
        assert_abs_diff_eq!(s.pseudo_gaps[2], 0.1, epsilon = 1e-12);
        assert_eq!(s.competitive_set, vec![0, 1]);
    }

    #[test]
    fn t0_regression_and_minimality() {
        assert_eq!(t0_scan(1.0, 2), (381, false));
        for (gap, arms) in [(1.0, 2), (0.3, 5), (0.05, 8), (0.9, 3)] {
            let (t0, capped) = t0_scan(gap, arms);
            assert!(!capped);
            assert!(t0_holds(gap, arms, t0));
            if t0 > 2 {
                assert!(!t0_holds(gap, arms, t0 - 1));
            }
        }
        assert_eq!(t0_scan(0.0, 3), (T0_CAP, true));
        assert_eq!(t0_scan(1e-5, 50), (T0_CAP, true));
    }

    #[test]
    fn degenerate_gaps_are_infinite() {
        let s = RewardSupport::<f64>::binary();
        let j = JointPmf::product(s, &[vec![0.5, 0.5], vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let t = PseudoRewardTable::exact_from_joint(&j).unwrap();
        let sum = competitive_summary(&j, &t, 0.1, 8.0).unwrap();
        assert!(sum.tie);
        assert!(sum.bound_lucb.is_infinite());
        assert!(!sum.degenerate_arms.is_empty());
    }

    #[test]
    fn deterministic_env_never_exceeds() {
        let s = RewardSupport::from_values([0.0, 0.5, 1.0]).unwrap();
        let j = JointPmf::deterministic(s, vec![1.0, 0.5, 0.0]).unwrap();
        let env = TabularEnv::new(j.clone());
        let t = PseudoRewardTable::exact_from_joint(&j).unwrap();
        for lemma in [Lemma::L3Single, Lemma::L4Min] {
            let r = lemma_bound_check(lemma, &env, &t, &[3, 5], 2000, 1).unwrap();
            assert!(r.iter().all(|x| x.exceedances == 0));
        }
    }
}
