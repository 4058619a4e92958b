//! Correlated reward generators.
//!
//! Every pull draws a fresh joint realisation and reveals one coordinate;
//! the two pulls of a two-arm round therefore come from independent
//! realisations.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudoreward::{latent_source_table, JointPmf, PseudoRewardTable, RewardSupport};
use crate::rng::TrialRng;
use crate::scalar::{argmax_by, Scalar};

/// Points per interval in the latent-source reward grid.
pub const LATENT_GRID_POINTS: usize = 5;

/// Best arm and whether another arm's mean lies within `1e-12` of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestArm {
    pub arm: usize,
    pub tie: bool,
}

impl BestArm {
    pub fn from_means<T: Scalar>(means: &[T]) -> Self {
        let arm = argmax_by(means.iter().copied().enumerate()).expect("at least one arm");
        let top = means[arm].as_f64();
        let tie = means
            .iter()
            .enumerate()
            .any(|(k, m)| k != arm && (top - m.as_f64()).abs() <= 1e-12);
        Self { arm, tie }
    }
}

pub trait Environment<T: Scalar>: Send + Sync {
    fn arms(&self) -> usize;

    fn support(&self) -> &RewardSupport<T>;

    /// Draws a reward for `arm` and returns its support index.
    fn pull_index(&self, arm: usize, rng: &mut TrialRng) -> Result<usize>;

    fn pull(&self, arm: usize, rng: &mut TrialRng) -> Result<T> {
        Ok(self.support().value(self.pull_index(arm, rng)?))
    }

    /// `P(R_k = support[i])` per arm.
    fn marginals(&self) -> Vec<Vec<T>>;

    fn true_means(&self) -> Vec<T> {
        let support = self.support();
        self.marginals()
            .iter()
            .map(|m| m.iter().enumerate().map(|(i, &p)| p * support.value(i)).sum())
            .collect()
    }

    fn best_arm(&self) -> BestArm {
        BestArm::from_means(&self.true_means())
    }
}

fn check_arm(arm: usize, arms: usize) -> Result<()> {
    if arm < arms {
        Ok(())
    } else {
        Err(Error::Parameter(format!("arm {arm} out of range for {arms} arms")))
    }
}

/// Position of `u` in an increasing cumulative table, clamped to the last slot.
fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Samples full reward vectors from an explicit joint pmf.
#[derive(Debug, Clone)]
pub struct TabularEnv<T> {
    joint: JointPmf<T>,
    cumulative: Vec<f64>,
    means: Vec<T>,
}

impl<T: Scalar> TabularEnv<T> {
    pub fn new(joint: JointPmf<T>) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = joint
            .atoms()
            .iter()
            .map(|(_, m)| {
                acc += m.as_f64();
                acc
            })
            .collect();
        // Absorb rounding so that every u in [0, 1) lands on an atom.
        if let Some(last) = cumulative.last_mut() {
            *last = f64::INFINITY;
        }
        let means = joint.means();
        Self { joint, cumulative, means }
    }

    pub fn joint(&self) -> &JointPmf<T> {
        &self.joint
    }

    /// Draws one full reward vector as support indices.
    pub fn sample_vector(&self, rng: &mut TrialRng) -> &[usize] {
        let u: f64 = rng.gen();
        &self.joint.atoms()[pick(&self.cumulative, u)].0
    }
}

impl<T: Scalar> Environment<T> for TabularEnv<T> {
    fn arms(&self) -> usize {
        self.joint.arms()
    }

    fn support(&self) -> &RewardSupport<T> {
        self.joint.support()
    }

    fn pull_index(&self, arm: usize, rng: &mut TrialRng) -> Result<usize> {
        check_arm(arm, self.arms())?;
        Ok(self.sample_vector(rng)[arm])
    }

    fn marginals(&self) -> Vec<Vec<T>> {
        self.joint.marginals()
    }

    fn true_means(&self) -> Vec<T> {
        self.means.clone()
    }
}

/// Hidden `X` drawn per pull; arm `k` then pays a value uniform over a
/// five-point grid spanning `[lower[k][x], upper[k][x]]`.
#[derive(Debug, Clone)]
pub struct LatentSourceEnv<T> {
    x_support: Vec<T>,
    x_prob: Vec<T>,
    lower: Vec<Vec<T>>,
    upper: Vec<Vec<T>>,
    max_reward: T,
    support: RewardSupport<T>,
    /// `grid[k][x]`: support indices of the grid points.
    grid: Vec<Vec<[usize; LATENT_GRID_POINTS]>>,
    cumulative: Vec<f64>,
}

impl<T: Scalar> LatentSourceEnv<T> {
    /// `lower[k][x]` and `upper[k][x]` bound arm `k` when `X = x_support[x]`;
    /// `max_reward` is the `b` of the resulting support.
    pub fn new(
        x_support: Vec<T>,
        x_prob: Vec<T>,
        lower: Vec<Vec<T>>,
        upper: Vec<Vec<T>>,
        max_reward: T,
    ) -> Result<Self> {
        let xs = x_support.len();
        if xs == 0 || x_prob.len() != xs {
            return Err(Error::Validation("x support and x probabilities must be non-empty and aligned".into()));
        }
        if x_prob.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::Validation("x probabilities must be non-negative".into()));
        }
        let total: T = x_prob.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::Validation(format!("x probabilities sum to {total}, not 1")));
        }
        let arms = lower.len();
        if arms == 0 || upper.len() != arms || lower.iter().chain(&upper).any(|r| r.len() != xs) {
            return Err(Error::Validation("bounds must be arms x |X| matrices".into()));
        }
        let mut points = Vec::new();
        for k in 0..arms {
            for x in 0..xs {
                let (lo, hi) = (lower[k][x], upper[k][x]);
                if !(lo <= hi) || lo < T::zero() || hi > max_reward {
                    return Err(Error::Validation(format!(
                        "bounds for arm {k} at x index {x} must satisfy 0 <= {lo} <= {hi} <= {max_reward}"
                    )));
                }
                points.extend(grid_values(lo, hi));
            }
        }
        let mut values = points.clone();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        values.dedup();
        let support = RewardSupport::new(values, max_reward)?;
        let grid = (0..arms)
            .map(|k| {
                (0..xs)
                    .map(|x| {
                        let g = grid_values(lower[k][x], upper[k][x]);
                        std::array::from_fn(|j| support.index_of(g[j]).expect("grid point in support"))
                    })
                    .collect()
            })
            .collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = x_prob
            .iter()
            .map(|p| {
                acc += p.as_f64();
                acc
            })
            .collect();
        *cumulative.last_mut().expect("non-empty") = f64::INFINITY;
        Ok(Self { x_support, x_prob, lower, upper, max_reward, support, grid, cumulative })
    }

    pub fn x_support(&self) -> &[T] {
        &self.x_support
    }

    pub fn x_prob(&self) -> &[T] {
        &self.x_prob
    }

    /// The latent-source pseudo-reward table for these bounds.
    pub fn pseudo_reward_table(&self, kappa: T) -> Result<PseudoRewardTable<T>> {
        latent_source_table(&self.lower, &self.upper, kappa, self.max_reward, self.support.clone())
    }

    /// Exact joint law of the rewards, by enumerating `X` and the grids.
    /// Size grows as `|X| * 5^K`; meant for small instances.
    pub fn joint(&self) -> Result<JointPmf<T>> {
        let arms = self.arms();
        let mut atoms = Vec::new();
        let share = T::one() / T::count(LATENT_GRID_POINTS as u64);
        for (x, &px) in self.x_prob.iter().enumerate() {
            let marginals: Vec<Vec<T>> = (0..arms)
                .map(|k| {
                    let mut m = vec![T::zero(); self.support.len()];
                    for &i in &self.grid[k][x] {
                        m[i] = m[i] + share;
                    }
                    m
                })
                .collect();
            let part = JointPmf::product(self.support.clone(), &marginals)?;
            atoms.extend(part.atoms().iter().map(|(v, m)| (v.clone(), *m * px)));
        }
        JointPmf::from_indices(self.support.clone(), atoms)
    }
}

/// Five evenly spaced points from `lo` to exactly `hi`.
fn grid_values<T: Scalar>(lo: T, hi: T) -> [T; LATENT_GRID_POINTS] {
    let steps = T::count(LATENT_GRID_POINTS as u64 - 1);
    std::array::from_fn(|j| {
        if j == LATENT_GRID_POINTS - 1 {
            hi
        } else {
            lo + (hi - lo) * T::count(j as u64) / steps
        }
    })
}

impl<T: Scalar> Environment<T> for LatentSourceEnv<T> {
    fn arms(&self) -> usize {
        self.lower.len()
    }

    fn support(&self) -> &RewardSupport<T> {
        &self.support
    }

    fn pull_index(&self, arm: usize, rng: &mut TrialRng) -> Result<usize> {
        check_arm(arm, self.arms())?;
        let x = pick(&self.cumulative, rng.gen());
        let j = rng.gen_range(0..LATENT_GRID_POINTS);
        Ok(self.grid[arm][x][j])
    }

    fn marginals(&self) -> Vec<Vec<T>> {
        let share = T::one() / T::count(LATENT_GRID_POINTS as u64);
        (0..self.arms())
            .map(|k| {
                let mut m = vec![T::zero(); self.support.len()];
                for (x, &px) in self.x_prob.iter().enumerate() {
                    for &i in &self.grid[k][x] {
                        m[i] = m[i] + px * share;
                    }
                }
                m
            })
            .collect()
    }
}

/// Replays observed rewards: each pull is a uniform draw, with replacement,
/// from the arm's pool.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEnv<T> {
    support: RewardSupport<T>,
    /// `counts[k][i]`: occurrences of `support[i]` in arm `k`'s pool.
    counts: Vec<Vec<u64>>,
    totals: Vec<u64>,
    labels: Vec<String>,
}

impl<T: Scalar> DatasetEnv<T> {
    /// `counts[k][i]` is the number of pool entries of arm `k` equal to `support[i]`.
    pub fn from_counts(support: RewardSupport<T>, counts: Vec<Vec<u64>>, labels: Option<Vec<String>>) -> Result<Self> {
        let labels = labels.unwrap_or_else(|| (0..counts.len()).map(|k| k.to_string()).collect());
        if labels.len() != counts.len() {
            return Err(Error::Validation("one label per arm required".into()));
        }
        if counts.is_empty() {
            return Err(Error::Validation("dataset environment has no arms".into()));
        }
        for (k, c) in counts.iter().enumerate() {
            if c.len() != support.len() {
                return Err(Error::Validation(format!("pool of arm {k} does not match the support")));
            }
            if c.iter().all(|&n| n == 0) {
                return Err(Error::Validation(format!("arm {k} ({}) has an empty pool", labels[k])));
            }
        }
        let totals = counts.iter().map(|c| c.iter().sum()).collect();
        Ok(Self { support, counts, totals, labels })
    }

    /// Builds pools from raw reward lists.
    pub fn from_pools(support: RewardSupport<T>, pools: &[Vec<T>]) -> Result<Self> {
        let counts = pools
            .iter()
            .map(|pool| {
                let mut c = vec![0u64; support.len()];
                for &r in pool {
                    c[support.index_of(r).ok_or_else(|| {
                        Error::Validation(format!("pool value {r} is not in the support"))
                    })?] += 1;
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_counts(support, counts, None)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Writes `arm,value,count`, skipping zero counts.
    pub fn write_pools(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv_open(path, e))?;
        w.write_record(["arm", "value", "count"])?;
        for (k, c) in self.counts.iter().enumerate() {
            for (i, &n) in c.iter().enumerate() {
                if n > 0 {
                    w.write_record([k.to_string(), self.support.value(i).to_string(), n.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads `arm,value,count`.
    pub fn read_pools(path: impl AsRef<Path>, support: RewardSupport<T>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv_open(path, e))?;
        if r.headers()?.iter().map(str::trim).ne(["arm", "value", "count"]) {
            return Err(Error::Schema(format!("{}: pools header must be arm,value,count", path.display())));
        }
        let mut counts: Vec<Vec<u64>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let bad = || Error::Schema(format!("{}: malformed pools row {:?}", path.display(), rec));
            let arm: usize = rec[0].trim().parse().map_err(|_| bad())?;
            let value: f64 = rec[1].trim().parse().map_err(|_| bad())?;
            let n: u64 = rec[2].trim().parse().map_err(|_| bad())?;
            let i = support
                .index_of(T::lit(value))
                .ok_or_else(|| Error::Validation(format!("{}: value {value} not in support", path.display())))?;
            if counts.len() <= arm {
                counts.resize(arm + 1, vec![0; support.len()]);
            }
            counts[arm][i] += n;
        }
        Self::from_counts(support, counts, None)
    }
}

impl<T: Scalar> Environment<T> for DatasetEnv<T> {
    fn arms(&self) -> usize {
        self.counts.len()
    }

    fn support(&self) -> &RewardSupport<T> {
        &self.support
    }

    fn pull_index(&self, arm: usize, rng: &mut TrialRng) -> Result<usize> {
        check_arm(arm, self.arms())?;
        let mut u = rng.gen_range(0..self.totals[arm]);
        for (i, &c) in self.counts[arm].iter().enumerate() {
            if u < c {
                return Ok(i);
            }
            u -= c;
        }
        unreachable!("draw below pool total")
    }

    fn marginals(&self) -> Vec<Vec<T>> {
        self.counts
            .iter()
            .zip(&self.totals)
            .map(|(c, &n)| c.iter().map(|&x| T::count(x) / T::count(n)).collect())
            .collect()
    }

    /// Pool averages `sum(value * count) / total`.
    fn true_means(&self) -> Vec<T> {
        self.counts
            .iter()
            .zip(&self.totals)
            .map(|(c, &n)| {
                let s: T = c.iter().enumerate().map(|(i, &x)| T::count(x) * self.support.value(i)).sum();
                s / T::count(n)
            })
            .collect()
    }
}

/// Any of the built-in environments.
#[derive(Debug, Clone)]
pub enum AnyEnvironment<T> {
    Tabular(TabularEnv<T>),
    Latent(LatentSourceEnv<T>),
    Dataset(DatasetEnv<T>),
}

impl<T: Scalar> AnyEnvironment<T> {
    fn inner(&self) -> &dyn Environment<T> {
        match self {
            AnyEnvironment::Tabular(e) => e,
            AnyEnvironment::Latent(e) => e,
            AnyEnvironment::Dataset(e) => e,
        }
    }
}

impl<T: Scalar> Environment<T> for AnyEnvironment<T> {
    fn arms(&self) -> usize {
        self.inner().arms()
    }

    fn support(&self) -> &RewardSupport<T> {
        self.inner().support()
    }

    fn pull_index(&self, arm: usize, rng: &mut TrialRng) -> Result<usize> {
        self.inner().pull_index(arm, rng)
    }

    fn marginals(&self) -> Vec<Vec<T>> {
        self.inner().marginals()
    }

    fn true_means(&self) -> Vec<T> {
        self.inner().true_means()
    }
}
