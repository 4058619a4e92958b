//! Fixed-confidence best-arm identification policies.
//!
//! A policy is driven round by round: [`Policy::select`] names the arms to
//! pull, every one of them is reported back through [`Policy::observe`], and
//! [`Policy::eliminate_and_check_stop`] then prunes the active set and
//! evaluates the stopping rule. The first `K` rounds pull arms `0..K` once
//! each; the algorithm's own rules apply from then on. Ties are broken
//! towards the lowest arm index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::confidence::{check_delta, BoundFamily, ConfidenceSchedule};
use crate::error::{Error, Result};
use crate::scalar::{argmax_by, Scalar};
use crate::stats::ArmStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "racing")]
    Racing,
    #[serde(rename = "lil-ucb")]
    LilUcb,
    #[serde(rename = "lucb")]
    Lucb,
    #[serde(rename = "lucb++")]
    LucbPlusPlus,
    #[serde(rename = "c-lucb")]
    CLucb,
    #[serde(rename = "c-lucb++")]
    CLucbPlusPlus,
    #[serde(rename = "maxmin-lucb")]
    MaxminLucb,
    #[serde(rename = "2-lucb")]
    TwoLucb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Racing,
        Algorithm::LilUcb,
        Algorithm::Lucb,
        Algorithm::LucbPlusPlus,
        Algorithm::CLucb,
        Algorithm::CLucbPlusPlus,
        Algorithm::MaxminLucb,
        Algorithm::TwoLucb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Racing => "racing",
            Algorithm::LilUcb => "lil-ucb",
            Algorithm::Lucb => "lucb",
            Algorithm::LucbPlusPlus => "lucb++",
            Algorithm::CLucb => "c-lucb",
            Algorithm::CLucbPlusPlus => "c-lucb++",
            Algorithm::MaxminLucb => "maxmin-lucb",
            Algorithm::TwoLucb => "2-lucb",
        }
    }

    /// lil'UCB pairs with the lil-Jamieson width, everything else with howard-lil.
    pub fn default_family(self) -> BoundFamily {
        match self {
            Algorithm::LilUcb => BoundFamily::LilJamieson,
            _ => BoundFamily::HowardLil,
        }
    }

    /// Whether each post-initialisation round pulls two arms.
    pub fn is_two_pull(self) -> bool {
        !matches!(self, Algorithm::Racing | Algorithm::LilUcb)
    }

    /// Whether the algorithm reads the pseudo-reward table.
    pub fn uses_pseudo_rewards(self) -> bool {
        matches!(
            self,
            Algorithm::CLucb | Algorithm::CLucbPlusPlus | Algorithm::MaxminLucb | Algorithm::TwoLucb
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig<T> {
    pub delta: T,
    pub schedule: ConfidenceSchedule<T>,
    /// lil'UCB stopping factor.
    pub alpha: T,
}

impl<T: Scalar> PolicyConfig<T> {
    /// Default schedule for the algorithm on rewards in `[0, reward_range]`, `alpha = 9`.
    pub fn new(algorithm: Algorithm, delta: T, reward_range: T) -> Result<Self> {
        check_delta(delta)?;
        let schedule = ConfidenceSchedule::new(algorithm.default_family(), reward_range)?;
        Ok(Self { delta, schedule, alpha: T::lit(9.0) })
    }

    pub fn with_schedule(mut self, schedule: ConfidenceSchedule<T>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Result of [`Policy::eliminate_and_check_stop`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Continue { removed: Vec<usize> },
    Declared { arm: usize, removed: Vec<usize> },
}

impl StepOutcome {
    pub fn removed(&self) -> &[usize] {
        match self {
            StepOutcome::Continue { removed } | StepOutcome::Declared { removed, .. } => removed,
        }
    }

    pub fn declared(&self) -> Option<usize> {
        match self {
            StepOutcome::Declared { arm, .. } => Some(*arm),
            StepOutcome::Continue { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Policy<T> {
    algorithm: Algorithm,
    config: PolicyConfig<T>,
    arms: usize,
    active: Vec<bool>,
    next_init: usize,
    pending: Vec<usize>,
    last_selection: Vec<usize>,
    rounds: u64,
    declared: Option<usize>,
}

impl<T: Scalar> Policy<T> {
    pub fn new(algorithm: Algorithm, arms: usize, config: PolicyConfig<T>) -> Result<Self> {
        if arms < 2 {
            return Err(Error::Parameter(format!("need at least 2 arms, got {arms}")));
        }
        check_delta(config.delta)?;
        if !(config.alpha > T::zero()) {
            return Err(Error::Parameter(format!("alpha must be positive, got {}", config.alpha)));
        }
        Ok(Self {
            algorithm,
            config,
            arms,
            active: vec![true; arms],
            next_init: 0,
            pending: Vec::new(),
            last_selection: Vec::new(),
            rounds: 0,
            declared: None,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn config(&self) -> &PolicyConfig<T> {
        &self.config
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.arms).filter(|&k| self.active[k]).collect()
    }

    pub fn is_active(&self, arm: usize) -> bool {
        self.active[arm]
    }

    pub fn declared(&self) -> Option<usize> {
        self.declared
    }

    pub fn last_selection(&self) -> &[usize] {
        &self.last_selection
    }

    /// Completed rounds, initialisation rounds included.
    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn in_initialisation(&self) -> bool {
        self.next_init < self.arms
    }

    fn check_stats(&self, stats: &ArmStats<T>) -> Result<()> {
        if stats.arms() != self.arms {
            return Err(Error::Precondition(format!(
                "statistics cover {} arms, policy has {}",
                stats.arms(),
                self.arms
            )));
        }
        Ok(())
    }

    /// Arms to pull this round.
    pub fn select(&mut self, stats: &ArmStats<T>) -> Result<Vec<usize>> {
        if let Some(arm) = self.declared {
            return Err(Error::Lifecycle(format!("select after arm {arm} was declared")));
        }
        if !self.pending.is_empty() {
            return Err(Error::Lifecycle(format!("select while arms {:?} are unobserved", self.pending)));
        }
        self.check_stats(stats)?;
        let selection = if self.in_initialisation() {
            let arm = self.next_init;
            self.next_init += 1;
            vec![arm]
        } else {
            self.rule_selection(stats)?
        };
        self.pending = selection.clone();
        self.last_selection = selection.clone();
        Ok(selection)
    }

    fn rule_selection(&self, stats: &ArmStats<T>) -> Result<Vec<usize>> {
        let delta = self.config.delta;
        Ok(match self.algorithm {
            Algorithm::Racing => self.active(),
            Algorithm::LilUcb => {
                let ucb = (0..self.arms)
                    .map(|k| Ok((k, stats.ucb(k, &self.config.schedule, delta)?)))
                    .collect::<Result<Vec<_>>>()?;
                vec![argmax_by(ucb).expect("arms")]
            }
            _ => {
                let (m1, m2) = self.pair(stats)?;
                vec![m1, m2]
            }
        })
    }

    /// `(m1, m2)` of the two-pull rules, evaluated on the current statistics.
    fn pair(&self, stats: &ArmStats<T>) -> Result<(usize, usize)> {
        let delta = self.config.delta;
        let s = &self.config.schedule;
        let k = T::count(self.arms as u64);
        let two = T::lit(2.0);
        let all: Vec<usize> = (0..self.arms).collect();
        let active = self.active();
        let (first, second): (Vec<(usize, T)>, ArmScore<'_, T>) = match self.algorithm {
            Algorithm::Lucb => (
                scored(&active, |a| stats.mean(a))?,
                Box::new(move |a| stats.ucb(a, s, delta / k)),
            ),
            Algorithm::LucbPlusPlus => (
                scored(&all, |a| stats.mean(a))?,
                Box::new(move |a| stats.ucb(a, s, delta / two)),
            ),
            Algorithm::CLucb | Algorithm::CLucbPlusPlus => {
                let pseudo = stats.pseudo_ucb_mins()?;
                let d2 = if self.algorithm == Algorithm::CLucb { delta / (two * k) } else { delta / two };
                let first = active.iter().map(|&a| (a, pseudo[a])).collect();
                (first, Box::new(move |a| Ok(stats.ucb(a, s, d2)?.min(pseudo[a]))))
            }
            Algorithm::MaxminLucb => {
                let first = scored(&active, |a| {
                    (0..self.arms)
                        .map(|l| stats.empirical_pseudo_reward(a, l))
                        .try_fold(T::infinity(), |acc, v| Ok(acc.min(v?)))
                })?;
                let cross = stats.cross_ucb_mins(s, delta / (two * k))?;
                (first, Box::new(move |a| Ok(cross[a])))
            }
            Algorithm::TwoLucb => {
                let pseudo = stats.pseudo_ucb_mins()?;
                let first = active.iter().map(|&a| (a, pseudo[a])).collect();
                let cross = stats.cross_ucb_mins(s, delta / (two * k))?;
                (first, Box::new(move |a| Ok(cross[a])))
            }
            Algorithm::Racing | Algorithm::LilUcb => unreachable!("single-set rules"),
        };
        let m1 = argmax_by(first).ok_or_else(|| Error::Precondition("no active arm".into()))?;
        let pool = if self.algorithm == Algorithm::LucbPlusPlus { &all } else { &active };
        let rest = pool
            .iter()
            .filter(|&&a| a != m1)
            .map(|&a| Ok((a, second(a)?)))
            .collect::<Result<Vec<_>>>()?;
        let m2 = argmax_by(rest).ok_or_else(|| Error::Precondition("no second candidate arm".into()))?;
        Ok((m1, m2))
    }

    /// Reports the reward of a selected arm by value.
    pub fn observe(&mut self, stats: &mut ArmStats<T>, arm: usize, reward: T) -> Result<()> {
        let index = stats.table().support().require_index(reward)?;
        self.observe_index(stats, arm, index)
    }

    /// Reports the reward `support[index]` of a selected arm.
    pub fn observe_index(&mut self, stats: &mut ArmStats<T>, arm: usize, index: usize) -> Result<()> {
        self.check_stats(stats)?;
        let pos = self
            .pending
            .iter()
            .position(|&a| a == arm)
            .ok_or_else(|| Error::Lifecycle(format!("arm {arm} was not selected in this round")))?;
        stats.record_index(arm, index)?;
        self.pending.remove(pos);
        if self.pending.is_empty() {
            self.rounds += 1;
            stats.advance_round();
        }
        Ok(())
    }

    /// Applies the elimination rule and then the stopping rule.
    pub fn eliminate_and_check_stop(&mut self, stats: &ArmStats<T>) -> Result<StepOutcome> {
        if !self.pending.is_empty() {
            return Err(Error::Lifecycle(format!("round still waits for arms {:?}", self.pending)));
        }
        if let Some(arm) = self.declared {
            return Ok(StepOutcome::Declared { arm, removed: Vec::new() });
        }
        self.check_stats(stats)?;
        if (0..self.arms).any(|k| stats.pulls(k) == 0) {
            return Ok(StepOutcome::Continue { removed: Vec::new() });
        }
        let removed = self.eliminate(stats)?;
        let declared = self.stop_rule(stats)?;
        self.declared = declared;
        Ok(match declared {
            Some(arm) => StepOutcome::Declared { arm, removed },
            None => StepOutcome::Continue { removed },
        })
    }

    fn eliminate(&mut self, stats: &ArmStats<T>) -> Result<Vec<usize>> {
        let delta = self.config.delta;
        let s = &self.config.schedule;
        let k = T::count(self.arms as u64);
        let level = match self.algorithm {
            Algorithm::LilUcb | Algorithm::LucbPlusPlus => return Ok(Vec::new()),
            Algorithm::Racing | Algorithm::Lucb => delta / k,
            Algorithm::CLucb | Algorithm::MaxminLucb | Algorithm::TwoLucb => delta / (T::lit(2.0) * k),
            Algorithm::CLucbPlusPlus => delta / (T::lit(3.0) * k),
        };
        let active = self.active();
        let lower = scored(&active, |a| stats.lcb(a, s, level))?;
        let (best_lower_arm, best_lower) = lower
            .iter()
            .copied()
            .fold((usize::MAX, T::neg_infinity()), |acc, (a, l)| if l > acc.1 { (a, l) } else { acc });
        let upper: Vec<T> = if self.algorithm.uses_pseudo_rewards() {
            stats.cross_ucb_mins(s, level)?
        } else {
            (0..self.arms).map(|a| stats.ucb(a, s, level)).collect::<Result<_>>()?
        };
        let mut removed: Vec<usize> = active.iter().copied().filter(|&a| upper[a] < best_lower).collect();
        if removed.len() == active.len() {
            // Inconsistent pseudo-rewards can push every upper index below the
            // best lower index; keep the arm holding that lower index.
            removed.retain(|&a| a != best_lower_arm);
        }
        for &a in &removed {
            self.active[a] = false;
        }
        Ok(removed)
    }

    fn stop_rule(&self, stats: &ArmStats<T>) -> Result<Option<usize>> {
        let active = self.active();
        let delta = self.config.delta;
        let s = &self.config.schedule;
        let k = T::count(self.arms as u64);
        let two = T::lit(2.0);
        if active.len() == 1 && self.algorithm != Algorithm::LilUcb && self.algorithm != Algorithm::LucbPlusPlus {
            return Ok(Some(active[0]));
        }
        Ok(match self.algorithm {
            Algorithm::LilUcb => {
                let pulls = stats.all_pulls();
                let top = argmax_by(pulls.iter().map(|&n| T::count(n)).enumerate()).expect("arms");
                let rest: u64 = pulls.iter().enumerate().filter(|&(a, _)| a != top).map(|(_, n)| n).sum();
                (T::count(pulls[top]) >= self.config.alpha * T::count(rest)).then_some(top)
            }
            Algorithm::Lucb => {
                let (m1, m2) = self.pair(stats)?;
                (stats.lcb(m1, s, delta / k)? > stats.ucb(m2, s, delta / k)?).then_some(m1)
            }
            Algorithm::LucbPlusPlus => {
                let (m1, m2) = self.pair(stats)?;
                (stats.lcb(m1, s, delta / (two * k))? > stats.ucb(m2, s, delta / two)?).then_some(m1)
            }
            Algorithm::CLucbPlusPlus => {
                let (m1, m2) = self.pair(stats)?;
                let four = T::lit(4.0);
                (stats.lcb(m1, s, delta / (four * k))? > stats.ucb(m2, s, delta / four)?).then_some(m1)
            }
            Algorithm::Racing | Algorithm::CLucb | Algorithm::MaxminLucb | Algorithm::TwoLucb => None,
        })
    }
}

/// Per-arm score of the second pick in [`Policy::pair`].
type ArmScore<'a, T> = Box<dyn Fn(usize) -> Result<T> + 'a>;

fn scored<T: Scalar>(arms: &[usize], mut f: impl FnMut(usize) -> Result<T>) -> Result<Vec<(usize, T)>> {
    arms.iter().map(|&a| Ok((a, f(a)?))).collect()
}
