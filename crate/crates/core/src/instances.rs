//! Fixed problem instances used by tests, the CLI defaults and the examples.

use crate::pseudoreward::{JointPmf, PseudoRewardTable, RewardSupport};

/// Two Bernoulli arms, means `(0.6, 0.4)`: arm 0 is best.
pub fn two_arm_joint_a() -> JointPmf<f64> {
    JointPmf::new(
        RewardSupport::binary(),
        [
            (vec![0.0, 0.0], 0.2),
            (vec![1.0, 0.0], 0.4),
            (vec![0.0, 1.0], 0.2),
            (vec![1.0, 1.0], 0.2),
        ],
    )
    .expect("valid pmf")
}

/// Two Bernoulli arms, means `(0.4, 0.5)`: arm 1 is best.
pub fn two_arm_joint_b() -> JointPmf<f64> {
    JointPmf::new(
        RewardSupport::binary(),
        [
            (vec![0.0, 0.0], 0.2),
            (vec![1.0, 0.0], 0.3),
            (vec![0.0, 1.0], 0.4),
            (vec![1.0, 1.0], 0.1),
        ],
    )
    .expect("valid pmf")
}

/// The loose table that is valid under both joints above:
/// `s(1, 0) = (0.7, 0.4)` and `s(0, 1) = (0.8, 0.5)` at rewards `(0, 1)`.
pub fn two_arm_table() -> PseudoRewardTable<f64> {
    PseudoRewardTable::from_fn(2, RewardSupport::binary(), |l, _k, i| {
        let v = match (l, i) {
            (1, 0) => 0.7,
            (1, 1) => 0.4,
            (0, 0) => 0.8,
            _ => 0.5,
        };
        (v, true)
    })
    .expect("valid table")
}

/// Five Bernoulli arms driven by a fair hidden coin, means `(0.7, 0.5, 0.4, 0.3, 0.2)`.
pub fn five_arm_joint() -> JointPmf<f64> {
    JointPmf::latent_bernoulli(
        &[0.5, 0.5],
        &[vec![0.9, 0.6, 0.5, 0.4, 0.3], vec![0.5, 0.4, 0.3, 0.2, 0.1]],
    )
    .expect("valid pmf")
}

/// Eight Bernoulli arms driven by a fair hidden coin: one best arm at 0.7,
/// a runner-up at 0.55 and six arms just below the runner-up, which are
/// expensive to separate from the best arm on their own samples.
pub fn eight_arm_joint() -> JointPmf<f64> {
    JointPmf::latent_bernoulli(
        &[0.5, 0.5],
        &[
            vec![0.9, 0.65, 0.62, 0.62, 0.61, 0.61, 0.6, 0.6],
            vec![0.5, 0.45, 0.42, 0.42, 0.41, 0.41, 0.4, 0.4],
        ],
    )
    .expect("valid pmf")
}

/// Three Bernoulli arms with means `(0.6, 0.5, 0.3)`.
pub fn three_arm_joint() -> JointPmf<f64> {
    JointPmf::latent_bernoulli(&[0.5, 0.5], &[vec![0.8, 0.6, 0.4], vec![0.4, 0.4, 0.2]]).expect("valid pmf")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn means_are_as_documented() {
        let cases: [(JointPmf<f64>, &[f64]); 5] = [
            (two_arm_joint_a(), &[0.6, 0.4]),
            (two_arm_joint_b(), &[0.4, 0.5]),
            (five_arm_joint(), &[0.7, 0.5, 0.4, 0.3, 0.2]),
            (eight_arm_joint(), &[0.7, 0.55, 0.52, 0.52, 0.51, 0.51, 0.5, 0.5]),
            (three_arm_joint(), &[0.6, 0.5, 0.3]),
        ];
        for (j, want) in cases {
            for (m, w) in j.means().iter().zip(want) {
                assert_abs_diff_eq!(*m, *w, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn loose_table_is_valid_for_both_joints() {
        let t = two_arm_table();
        assert!(t.validate_dominance(&two_arm_joint_a()).unwrap().is_empty());
        assert!(t.validate_dominance(&two_arm_joint_b()).unwrap().is_empty());
    }
}
