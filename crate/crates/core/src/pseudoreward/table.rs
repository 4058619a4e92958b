use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::joint::parse_scalar;
use super::{JointPmf, RewardSupport};

/// `s(l, k)(r)` for every target `l`, source `k` and support value `r`.
///
/// Entries with `l == k` always equal `r`. Each entry carries a `known`
/// flag; unknown entries hold a conservative value (normally `b`).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRewardTable<T> {
    arms: usize,
    support: RewardSupport<T>,
    entries: Vec<T>,
    known: Vec<bool>,
}

/// An entry lying below the conditional mean it should bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceViolation {
    pub target: usize,
    pub source: usize,
    pub reward: f64,
    pub entry: f64,
    pub conditional_mean: f64,
}

impl<T: Scalar> PseudoRewardTable<T> {
    /// Builds a table from `f(target, source, support_index) -> (value, known)`.
    /// `f` is not consulted on the diagonal.
    pub fn from_fn(
        arms: usize,
        support: RewardSupport<T>,
        mut f: impl FnMut(usize, usize, usize) -> (T, bool),
    ) -> Result<Self> {
        if arms == 0 {
            return Err(Error::Validation("table needs at least one arm".into()));
        }
        let s = support.len();
        let mut entries = Vec::with_capacity(arms * arms * s);
        let mut known = Vec::with_capacity(arms * arms * s);
        for l in 0..arms {
            for k in 0..arms {
                for i in 0..s {
                    let (v, kn) = if l == k { (support.value(i), true) } else { f(l, k, i) };
                    if !v.is_finite() || v < T::zero() {
                        return Err(Error::Validation(format!(
                            "entry s({l}, {k})({}) = {v} is not a finite non-negative number",
                            support.value(i)
                        )));
                    }
                    entries.push(v);
                    known.push(kn);
                }
            }
        }
        Ok(Self { arms, support, entries, known })
    }

    /// Every off-diagonal entry equal to `b` and unknown: the no-side-information table.
    pub fn uninformative(arms: usize, support: RewardSupport<T>) -> Result<Self> {
        let b = support.max_reward();
        Self::from_fn(arms, support, |_, _, _| (b, false))
    }

    /// Tightest valid table: `E[R_l | R_k = r]`, computed in exact rational
    /// arithmetic. Values of `r` that arm `k` never takes get `b`, unknown.
    pub fn exact_from_joint(joint: &JointPmf<T>) -> Result<Self> {
        let cond = conditional_means(joint);
        let b = joint.support().max_reward();
        Self::from_fn(joint.arms(), joint.support().clone(), |l, k, i| match cond[k][i] {
            Some(ref means) => (means[l], true),
            None => (b, false),
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn support(&self) -> &RewardSupport<T> {
        &self.support
    }

    pub fn max_reward(&self) -> T {
        self.support.max_reward()
    }

    fn offset(&self, target: usize, source: usize, index: usize) -> usize {
        assert!(target < self.arms && source < self.arms && index < self.support.len());
        (target * self.arms + source) * self.support.len() + index
    }

    /// `s(target, source)(support[index])`.
    pub fn get(&self, target: usize, source: usize, index: usize) -> T {
        self.entries[self.offset(target, source, index)]
    }

    pub fn is_known(&self, target: usize, source: usize, index: usize) -> bool {
        self.known[self.offset(target, source, index)]
    }

    /// `s(target, source)(reward)` looked up by value.
    pub fn value(&self, target: usize, source: usize, reward: T) -> Result<T> {
        Ok(self.get(target, source, self.support.require_index(reward)?))
    }

    /// Row of `s(l, source)(support[index])` over all targets `l`.
    pub fn column(&self, source: usize, index: usize) -> Vec<T> {
        (0..self.arms).map(|l| self.get(l, source, index)).collect()
    }

    /// Returns a copy with one off-diagonal entry replaced.
    pub fn with_entry(&self, target: usize, source: usize, index: usize, value: T, known: bool) -> Result<Self> {
        if target == source {
            return Err(Error::Parameter("diagonal entries are fixed to the reward".into()));
        }
        if !value.is_finite() || value < T::zero() {
            return Err(Error::Validation(format!("entry {value} is not finite and non-negative")));
        }
        let mut out = self.clone();
        let o = out.offset(target, source, index);
        out.entries[o] = value;
        out.known[o] = known;
        Ok(out)
    }

    /// Replaces a uniformly random `ceil(p * n_offdiag)` subset of the
    /// off-diagonal entries with `b`, marking them unknown.
    pub fn pad_unknown(&self, fraction: T, seed: u64) -> Result<Self> {
        if !(fraction >= T::zero() && fraction <= T::one()) {
            return Err(Error::Parameter(format!("padding fraction must lie in [0, 1], got {fraction}")));
        }
        let offdiag: Vec<usize> = (0..self.entries.len())
            .filter(|&o| {
                let pair = o / self.support.len();
                pair / self.arms != pair % self.arms
            })
            .collect();
        // The 1e-9 slack keeps products such as 0.1 * 30 from rounding up to 4.
        let count = ((fraction.as_f64() * offdiag.len() as f64) - 1e-9).ceil().max(0.0) as usize;
        let count = count.min(offdiag.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        let b = self.max_reward();
        for pick in index::sample(&mut rng, offdiag.len(), count).into_vec() {
            out.entries[offdiag[pick]] = b;
            out.known[offdiag[pick]] = false;
        }
        Ok(out)
    }

    /// Adds `q` to every off-diagonal entry, padded ones included. No clipping at `b`.
    pub fn apply_safety_buffer(&self, q: T) -> Result<Self> {
        if !(q >= T::zero()) || !q.is_finite() {
            return Err(Error::Parameter(format!("safety buffer must be non-negative, got {q}")));
        }
        let mut out = self.clone();
        let s = self.support.len();
        for (o, v) in out.entries.iter_mut().enumerate() {
            let pair = o / s;
            if pair / self.arms != pair % self.arms {
                *v = *v + q;
            }
        }
        Ok(out)
    }

    /// Relabels arms: arm `k` of `self` becomes arm `perm[k]` of the result.
    pub fn permute_arms(&self, perm: &[usize]) -> Result<Self> {
        let mut inverse = vec![usize::MAX; self.arms];
        for (k, &p) in perm.iter().enumerate() {
            if p >= self.arms || inverse[p] != usize::MAX {
                return Err(Error::Parameter("not a permutation of the arms".into()));
            }
            inverse[p] = k;
        }
        if perm.len() != self.arms {
            return Err(Error::Parameter("not a permutation of the arms".into()));
        }
        Self::from_fn(self.arms, self.support.clone(), |l, k, i| {
            let (sl, sk) = (inverse[l], inverse[k]);
            (self.get(sl, sk, i), self.is_known(sl, sk, i))
        })
    }

    /// Every `(l, k, r)` with `P(R_k = r) > 0` whose entry is below
    /// `E[R_l | R_k = r] - 1e-9`.
    pub fn validate_dominance(&self, joint: &JointPmf<T>) -> Result<Vec<DominanceViolation>> {
        if joint.arms() != self.arms || joint.support() != &self.support {
            return Err(Error::Validation("table and joint differ in arms or support".into()));
        }
        let cond = conditional_means(joint);
        let mut out = Vec::new();
        for k in 0..self.arms {
            for (i, c) in cond[k].iter().enumerate() {
                let Some(means) = c else { continue };
                for (l, &m) in means.iter().enumerate() {
                    let entry = self.get(l, k, i);
                    if entry.as_f64() < m.as_f64() - 1e-9 {
                        out.push(DominanceViolation {
                            target: l,
                            source: k,
                            reward: self.support.value(i).as_f64(),
                            entry: entry.as_f64(),
                            conditional_mean: m.as_f64(),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Reads `target_arm,source_arm,reward,value,known`.
    ///
    /// Every off-diagonal `(target, source, reward)` must appear exactly
    /// once; diagonal rows may be omitted but must equal the reward when
    /// present. Without an explicit support, the support is the set of
    /// rewards in the file.
    pub fn read_csv(path: impl AsRef<Path>, support: Option<RewardSupport<T>>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv_open(path, e))?;
        let headers = reader.headers()?.clone();
        if headers.iter().map(str::trim).ne(["target_arm", "source_arm", "reward", "value", "known"]) {
            return Err(Error::Schema(format!(
                "{}: table header must be target_arm,source_arm,reward,value,known",
                path.display()
            )));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let arm = |i: usize| -> Result<usize> {
                record[i].trim().parse().map_err(|_| {
                    Error::Schema(format!("{}: bad arm index {:?}", path.display(), &record[i]))
                })
            };
            let (l, k) = (arm(0)?, arm(1)?);
            let r: T = parse_scalar(&record[2], path)?;
            let v: T = parse_scalar(&record[3], path)?;
            let known = match record[4].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Schema(format!("{}: known must be 0 or 1, got {other:?}", path.display())))
                }
            };
            rows.push((l, k, r, v, known));
        }
        let arms = rows.iter().map(|r| r.0.max(r.1) + 1).max().unwrap_or(0);
        let support = match support {
            Some(s) => s,
            None => RewardSupport::from_values(rows.iter().map(|r| r.2))?,
        };
        let mut cells: BTreeMap<(usize, usize, usize), (T, bool)> = BTreeMap::new();
        for (l, k, r, v, known) in rows {
            let i = support.index_of(r).ok_or_else(|| {
                Error::Validation(format!("{}: reward {r} is not in the support", path.display()))
            })?;
            if l == k && (v - support.value(i)).abs() > T::lit(1e-9) {
                return Err(Error::Validation(format!("{}: diagonal entry s({l},{l})({r}) = {v}", path.display())));
            }
            if cells.insert((l, k, i), (v, known)).is_some() {
                return Err(Error::Validation(format!("{}: duplicate entry ({l}, {k}, {r})", path.display())));
            }
        }
        let mut missing = None;
        let table = Self::from_fn(arms, support, |l, k, i| {
            cells.get(&(l, k, i)).copied().unwrap_or_else(|| {
                missing.get_or_insert((l, k, i));
                (T::zero(), false)
            })
        })?;
        if let Some((l, k, i)) = missing {
            return Err(Error::Validation(format!(
                "{}: missing entry ({l}, {k}, {})",
                path.display(),
                table.support.value(i)
            )));
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv_open(path, e))?;
        w.write_record(["target_arm", "source_arm", "reward", "value", "known"])?;
        for l in 0..self.arms {
            for k in 0..self.arms {
                for i in 0..self.support.len() {
                    w.write_record([
                        l.to_string(),
                        k.to_string(),
                        self.support.value(i).to_string(),
                        self.get(l, k, i).to_string(),
                        u8::from(self.is_known(l, k, i)).to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `cond[k][i] = Some(E[R_l | R_k = support[i]] for all l)` when that event
/// has positive mass. Sums are accumulated as exact rationals.
fn conditional_means<T: Scalar>(joint: &JointPmf<T>) -> Vec<Vec<Option<Vec<T>>>> {
    let arms = joint.arms();
    let s = joint.support().len();
    let rat = |x: T| BigRational::from_float(x.as_f64()).expect("finite value");
    let values: Vec<BigRational> = joint.support().values().iter().map(|&v| rat(v)).collect();
    let zero = || BigRational::from_integer(BigInt::zero());
    let mut mass = vec![vec![zero(); s]; arms];
    let mut weighted = vec![vec![vec![zero(); arms]; s]; arms];
    for (v, m) in joint.atoms() {
        let m = rat(*m);
        for k in 0..arms {
            mass[k][v[k]] += &m;
            for l in 0..arms {
                weighted[k][v[k]][l] += &m * &values[v[l]];
            }
        }
    }
    (0..arms)
        .map(|k| {
            (0..s)
                .map(|i| {
                    (!mass[k][i].is_zero()).then(|| {
                        weighted[k][i]
                            .iter()
                            .map(|w| T::lit((w / &mass[k][i]).to_f64().expect("finite ratio")))
                            .collect()
                    })
                })
                .collect()
        })
        .collect()
}

/// `u (1 - delta) + max_reward * delta`: turns a bound `u` that holds with
/// probability `1 - delta` into an unconditional one.
pub fn probabilistic_translation<T: Scalar>(u: T, delta: T, max_reward: T) -> Result<T> {
    crate::confidence::check_delta(delta)?;
    Ok(u * (T::one() - delta) + max_reward * delta)
}

/// Table for a latent source `X` with `lower[k][x] <= Y_k(x) <= upper[k][x]`:
///
/// `s(l, k)(r) = (1 - kappa)^2 max_{x : lower[k][x] <= r <= upper[k][x]} upper[l][x] + (1 - (1 - kappa)^2) M`,
///
/// and `M`, unknown, when no `x` is consistent with `r`.
pub fn latent_source_table<T: Scalar>(
    lower: &[Vec<T>],
    upper: &[Vec<T>],
    kappa: T,
    max_reward: T,
    support: RewardSupport<T>,
) -> Result<PseudoRewardTable<T>> {
    let arms = lower.len();
    if upper.len() != arms || arms == 0 {
        return Err(Error::Validation("lower and upper bounds need one row per arm".into()));
    }
    let xs = lower[0].len();
    if xs == 0 || lower.iter().chain(upper).any(|row| row.len() != xs) {
        return Err(Error::Validation("bound rows must share one non-empty X support".into()));
    }
    for k in 0..arms {
        for x in 0..xs {
            if !(lower[k][x] <= upper[k][x]) {
                return Err(Error::Validation(format!(
                    "crossed bounds for arm {k} at x index {x}: {} > {}",
                    lower[k][x], upper[k][x]
                )));
            }
        }
    }
    if !(kappa >= T::zero() && kappa < T::one()) {
        return Err(Error::Parameter(format!("kappa must lie in [0, 1), got {kappa}")));
    }
    let keep = (T::one() - kappa) * (T::one() - kappa);
    let tol = T::lit(1e-12);
    PseudoRewardTable::from_fn(arms, support.clone(), |l, k, i| {
        let r = support.value(i);
        let best = (0..xs)
            .filter(|&x| lower[k][x] - tol <= r && r <= upper[k][x] + tol)
            .map(|x| upper[l][x])
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
        match best {
            Some(g) => (keep * g + (T::one() - keep) * max_reward, true),
            None => (max_reward, false),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_table_for_two_arm_a() {
        let t = PseudoRewardTable::exact_from_joint(&instances::two_arm_joint_a()).unwrap();
        // Arms are 0-based: s(1, 0) is "s_{2,1}".
        assert_abs_diff_eq!(t.get(1, 0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(1, 0, 1), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 1, 0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 1, 1), 0.5, epsilon = 1e-15);
        assert!(t.validate_dominance(&instances::two_arm_joint_a()).unwrap().is_empty());
    }

    #[test]
    fn independent_joint_gives_constant_rows() {
        let s = RewardSupport::from_values([0.0, 0.5, 1.0]).unwrap();
        let j = JointPmf::product(s, &[vec![0.2, 0.3, 0.5], vec![0.6, 0.1, 0.3]]).unwrap();
        let t = PseudoRewardTable::exact_from_joint(&j).unwrap();
        let mu = j.means();
        for i in 0..3 {
            assert_abs_diff_eq!(t.get(0, 1, i), mu[0], epsilon = 1e-12);
            assert_abs_diff_eq!(t.get(1, 0, i), mu[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn deterministic_joint_and_unseen_rewards() {
        let s = RewardSupport::from_values([0.0, 1.0, 2.0]).unwrap();
        let j = JointPmf::deterministic(s, vec![2.0, 0.0]).unwrap();
        let t = PseudoRewardTable::exact_from_joint(&j).unwrap();
        assert_eq!(t.get(1, 0, 2), 0.0);
        assert_eq!(t.get(0, 1, 0), 2.0);
        assert!(t.is_known(1, 0, 2));
        assert_eq!(t.get(1, 0, 0), 2.0);
        assert!(!t.is_known(1, 0, 0));
    }

    #[test]
    fn padding_counts_and_determinism() {
        let s = RewardSupport::from_values([0.0, 0.5, 1.0]).unwrap();
        let j = JointPmf::product(s, &vec![vec![0.2, 0.3, 0.5]; 3]).unwrap();
        let t = PseudoRewardTable::exact_from_joint(&j).unwrap();
        assert_eq!(t.pad_unknown(0.0, 1).unwrap(), t);
        let p = t.pad_unknown(0.5, 9).unwrap();
        let unknown = (0..3)
            .flat_map(|l| (0..3).flat_map(move |k| (0..3).map(move |i| (l, k, i))))
            .filter(|&(l, k, i)| !p.is_known(l, k, i))
            .count();
        assert_eq!(unknown, 9);
        assert_eq!(p, t.pad_unknown(0.5, 9).unwrap());
        let full = t.pad_unknown(1.0, 4).unwrap();
        for l in 0..3 {
            for k in 0..3 {
                for i in 0..3 {
                    let want = if l == k { s_val(&t, i) } else { 1.0 };
                    assert_eq!(full.get(l, k, i), want);
                }
            }
        }
        assert!(t.pad_unknown(1.5, 0).is_err());
    }

    fn s_val(t: &PseudoRewardTable<f64>, i: usize) -> f64 {
        t.support().value(i)
    }

    #[test]
    fn safety_buffer_shifts_offdiagonal_only() {
        let t = instances::two_arm_table();
        assert_eq!(t.apply_safety_buffer(0.0).unwrap(), t);
        let q = t.apply_safety_buffer(0.1).unwrap();
        assert_abs_diff_eq!(q.get(1, 0, 0), 0.8, epsilon = 1e-15);
        assert_eq!(q.get(0, 0, 1), 1.0);
        let padded = t.pad_unknown(1.0, 0).unwrap().apply_safety_buffer(0.1).unwrap();
        assert_abs_diff_eq!(padded.get(0, 1, 0), 1.1, epsilon = 1e-15);
        assert!(t.apply_safety_buffer(-0.1).is_err());
    }

    #[test]
    fn translation_arithmetic() {
        assert_abs_diff_eq!(probabilistic_translation(0.5, 0.1, 2.0).unwrap(), 0.65, epsilon = 1e-15);
        assert_abs_diff_eq!(probabilistic_translation(0.5, 1e-12, 2.0).unwrap(), 0.5, epsilon = 1e-11);
        assert_abs_diff_eq!(probabilistic_translation(2.0, 0.37, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!(probabilistic_translation(0.5, 0.0, 2.0).is_err());
    }

    #[test]
    fn latent_source_entries() {
        // Arm 0 lives in [2, 4] when x = 0 and in [5, 6] when x = 1.
        let lower = vec![vec![2.0, 5.0], vec![1.0, 0.0]];
        let upper = vec![vec![4.0, 6.0], vec![3.0, 2.5]];
        let support = RewardSupport::from_values([1.0, 3.0, 4.5, 5.5]).unwrap();
        let t = latent_source_table(&lower, &upper, 0.0, 6.0, support.clone()).unwrap();
        // r = 5.5 is only consistent with x = 1, r = 3 only with x = 0.
        assert_eq!(t.get(1, 0, 3), 2.5);
        assert_eq!(t.get(1, 0, 1), 3.0);
        // r = 4.5 falls between the two ranges.
        assert_eq!(t.get(1, 0, 2), 6.0);
        assert!(!t.is_known(1, 0, 2));
        // r = 1 is impossible for arm 0.
        assert_eq!(t.get(1, 0, 0), 6.0);
        assert!(!t.is_known(1, 0, 0));
        // Arm 1 at r = 1 is consistent with both x.
        assert_eq!(t.get(0, 1, 0), 6.0);
        assert!(t.is_known(0, 1, 0));

        let lower = vec![vec![0.0], vec![0.0]];
        let upper = vec![vec![3.0], vec![3.0]];
        let s = RewardSupport::from_values([1.0, 5.0]).unwrap();
        let t = latent_source_table(&lower, &upper, 0.2, 5.0, s).unwrap();
        assert_abs_diff_eq!(t.get(1, 0, 0), 0.64 * 3.0 + 0.36 * 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.get(1, 0, 0), 3.72, epsilon = 1e-12);

        let crossed = vec![vec![4.0], vec![0.0]];
        assert!(matches!(
            latent_source_table(&crossed, &upper, 0.0, 5.0, support),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn dominance_flags_lowered_entry() {
        let j = instances::two_arm_joint_a();
        let t = instances::two_arm_table();
        assert!(t.validate_dominance(&j).unwrap().is_empty());
        let bad = t.with_entry(1, 0, 0, 0.4, true).unwrap();
        let v = bad.validate_dominance(&j).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].target, v[0].source, v[0].reward), (1, 0, 0.0));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = instances::two_arm_table().pad_unknown(0.5, 3).unwrap();
        t.write_csv(&path).unwrap();
        assert_eq!(PseudoRewardTable::read_csv(&path, None).unwrap(), t);

        std::fs::write(&path, "target_arm,source_arm,reward,value,known\n1,0,0,0.7,1\n").unwrap();
        assert!(matches!(PseudoRewardTable::<f64>::read_csv(&path, None), Err(Error::Validation(_))));
        std::fs::write(&path, "target,source,reward,value,known\n").unwrap();
        assert!(matches!(PseudoRewardTable::<f64>::read_csv(&path, None), Err(Error::Schema(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_joint() -> impl Strategy<Value = JointPmf<f64>> {
            prop::collection::vec(0.0f64..1.0, 27).prop_map(|w| {
                let total: f64 = w.iter().sum::<f64>() + 1e-9;
                let s = RewardSupport::from_values([0.0, 0.5, 1.0]).unwrap();
                let atoms = (0..27).map(|c| (vec![c % 3, (c / 3) % 3, c / 9], w[c] / total));
                let atoms: Vec<_> = atoms.collect();
                let sum: f64 = atoms.iter().map(|a| a.1).sum();
                let atoms = atoms.into_iter().map(|(v, m)| (v, m / sum));
                JointPmf::from_indices(s, atoms).unwrap()
            })
        }

        proptest! {
            #[test]
            fn pipeline_is_monotone(j in random_joint(), p in 0.0f64..=1.0, q in 0.0f64..0.5, seed in 0u64..1000) {
                let exact = PseudoRewardTable::exact_from_joint(&j).unwrap();
                let padded = exact.pad_unknown(p, seed).unwrap();
                let buffered = padded.apply_safety_buffer(q).unwrap();
                for l in 0..3 { for k in 0..3 { for i in 0..3 {
                    prop_assert!(exact.get(l, k, i) <= padded.get(l, k, i) + 1e-15);
                    prop_assert!(padded.get(l, k, i) <= buffered.get(l, k, i) + 1e-15);
                }}}
                prop_assert!(exact.validate_dominance(&j).unwrap().is_empty());
                prop_assert!(buffered.validate_dominance(&j).unwrap().is_empty());
            }

            #[test]
            fn buffer_and_full_padding_commute_with_relabeling(j in random_joint(), q in 0.0f64..0.5, full in any::<bool>()) {
                let perm = [2usize, 0, 1];
                let t = PseudoRewardTable::exact_from_joint(&j).unwrap();
                let p = if full { 1.0 } else { 0.0 };
                let a = t.pad_unknown(p, 5).unwrap().apply_safety_buffer(q).unwrap().permute_arms(&perm).unwrap();
                let b = t.permute_arms(&perm).unwrap().pad_unknown(p, 11).unwrap().apply_safety_buffer(q).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
