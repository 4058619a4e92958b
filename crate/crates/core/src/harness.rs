//! Monte-Carlo experiments: trials per (algorithm, delta) cell, keyed
//! aggregation and report files.
//!
//! Trial `i` of every cell draws from `rng::stream(master_seed, i)`, so
//! cells compare algorithms on common random numbers and the report does
//! not depend on scheduling or on the number of workers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{competitive_summary_for, CompetitiveSummary, DEFAULT_ZETA};
use crate::confidence::{BoundFamily, ConfidenceSchedule};
use crate::environment::{AnyEnvironment, DatasetEnv, Environment, LatentSourceEnv, TabularEnv};
use crate::error::{Error, Result};
use crate::instances;
use crate::policies::{Algorithm, Policy, PolicyConfig, StepOutcome};
use crate::pseudoreward::{JointPmf, PseudoRewardTable, RewardSupport};
use crate::rng;
use crate::scalar::Scalar;
use crate::stats::{ArmStats, PseudoUcbClock};

/// Exit status for a run in which some cell had every trial capped.
pub const EXIT_ALL_CAPPED: i32 = 4;

/// Built-in instances addressable from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    TwoArmA,
    TwoArmB,
    ThreeArm,
    FiveArm,
    EightArm,
}

impl Builtin {
    pub fn joint(self) -> JointPmf<f64> {
        match self {
            Builtin::TwoArmA => instances::two_arm_joint_a(),
            Builtin::TwoArmB => instances::two_arm_joint_b(),
            Builtin::ThreeArm => instances::three_arm_joint(),
            Builtin::FiveArm => instances::five_arm_joint(),
            Builtin::EightArm => instances::eight_arm_joint(),
        }
    }
}

/// Where rewards come from. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    Builtin { name: Builtin },
    /// `r_0,...,r_{K-1},mass` file; the support defaults to the values present.
    Joint {
        path: PathBuf,
        #[serde(default)]
        support: Option<Vec<f64>>,
    },
    Latent {
        x_support: Vec<f64>,
        x_prob: Vec<f64>,
        lower: Vec<Vec<f64>>,
        upper: Vec<Vec<f64>>,
        max_reward: f64,
    },
    /// `arm,value,count` pools file.
    Dataset { pools: PathBuf, support: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TableSource {
    /// Conditional means of the joint law.
    Exact,
    /// Every off-diagonal entry at `b`.
    Uninformative,
    /// The hand-written table of the two-arm example.
    TwoArm,
    File { path: PathBuf },
    /// Latent-source bound; needs a latent environment.
    Latent { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    #[serde(flatten)]
    pub source: TableSource,
    /// Fraction of unknown entries replaced by `b`.
    #[serde(default)]
    pub padding: f64,
    #[serde(default)]
    pub safety_buffer: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TableSpec {
    pub fn new(source: TableSource) -> Self {
        Self { source, padding: 0.0, safety_buffer: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub family: BoundFamily,
    #[serde(default)]
    pub kappa: Option<f64>,
}

fn default_trials() -> usize {
    10
}

fn default_sample_cap() -> u64 {
    10_000_000
}

fn default_zeta() -> f64 {
    DEFAULT_ZETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub table: TableSpec,
    pub algorithms: Vec<Algorithm>,
    pub deltas: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Confidence family per algorithm; others use their default.
    #[serde(default)]
    pub schedules: BTreeMap<Algorithm, ScheduleSpec>,
    /// lil'UCB stopping factor.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_sample_cap")]
    pub sample_cap: u64,
    /// Worker threads; 0 uses every core. Left out of serialized output so
    /// reports do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    #[serde(default)]
    pub pseudo_ucb_clock: PseudoUcbClock,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, table: TableSpec, algorithms: Vec<Algorithm>, deltas: Vec<f64>, trials: usize) -> Self {
        Self {
            env,
            table,
            algorithms,
            deltas,
            trials,
            master_seed: 0,
            schedules: BTreeMap::new(),
            alpha: None,
            sample_cap: default_sample_cap(),
            workers: 0,
            pseudo_ucb_clock: PseudoUcbClock::default(),
            zeta: DEFAULT_ZETA,
        }
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config: Self = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that does not need the environment.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() || self.deltas.is_empty() {
            return Err(Error::Config("need at least one algorithm and one delta".into()));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {d}")));
        }
        let mut seen = self.deltas.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate delta".into()));
        }
        let mut algs = self.algorithms.clone();
        algs.sort();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return Err(Error::Config("duplicate algorithm".into()));
        }
        if let Some(a) = self.alpha.filter(|a| !(*a > 0.0)) {
            return Err(Error::Config(format!("alpha must be positive, got {a}")));
        }
        if !(self.table.padding >= 0.0 && self.table.padding <= 1.0) {
            return Err(Error::Config(format!("padding must lie in [0, 1], got {}", self.table.padding)));
        }
        if !(self.table.safety_buffer >= 0.0) || !self.table.safety_buffer.is_finite() {
            return Err(Error::Config(format!("safety buffer must be non-negative, got {}", self.table.safety_buffer)));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::Config(format!("zeta must be positive, got {}", self.zeta)));
        }
        for (alg, spec) in &self.schedules {
            if spec.family == BoundFamily::LilKl && spec.kappa.is_none() {
                return Err(Error::Config(format!("{alg}: lil-kl needs kappa")));
            }
        }
        Ok(())
    }

    /// Path `p` relative to `base`, unless absolute.
    fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

/// A resolved experiment: configuration plus the environment and table it names.
#[derive(Debug, Clone)]
pub struct Experiment<T> {
    config: ExperimentConfig,
    env: Arc<AnyEnvironment<T>>,
    table: Arc<PseudoRewardTable<T>>,
}

impl<T: Scalar> Experiment<T> {
    /// Uses the given environment and table; the config's env and table
    /// specs are then only echoed in the report.
    pub fn new(config: ExperimentConfig, env: AnyEnvironment<T>, table: PseudoRewardTable<T>) -> Result<Self> {
        config.validate()?;
        if table.arms() != env.arms() {
            return Err(Error::Config(format!("table has {} arms, environment {}", table.arms(), env.arms())));
        }
        if table.support() != env.support() {
            return Err(Error::Config("table and environment supports differ".into()));
        }
        if config.sample_cap <= env.arms() as u64 {
            return Err(Error::Config(format!("sample_cap must exceed K = {}", env.arms())));
        }
        Ok(Self { config, env: Arc::new(env), table: Arc::new(table) })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn env(&self) -> &AnyEnvironment<T> {
        &self.env
    }

    pub fn table(&self) -> &PseudoRewardTable<T> {
        &self.table
    }

    fn policy_config(&self, algorithm: Algorithm, delta: f64) -> Result<PolicyConfig<T>> {
        let b = self.table.max_reward();
        let mut pc = PolicyConfig::new(algorithm, T::lit(delta), b)?;
        if let Some(spec) = self.config.schedules.get(&algorithm) {
            pc = pc.with_schedule(ConfidenceSchedule::with_kappa(spec.family, b, spec.kappa.map(T::lit))?);
        }
        if let Some(alpha) = self.config.alpha {
            pc = pc.with_alpha(T::lit(alpha));
        }
        Ok(pc)
    }

    /// One trial of `algorithm` at `delta` on stream `trial`.
    pub fn run_trial(&self, algorithm: Algorithm, delta: f64, trial: u64) -> Result<TrialResult> {
        let start = Instant::now();
        let arms = self.env.arms();
        let mut rng = rng::stream(self.config.master_seed, trial);
        let mut stats = ArmStats::new(Arc::clone(&self.table)).with_clock(self.config.pseudo_ucb_clock);
        let mut policy = Policy::new(algorithm, arms, self.policy_config(algorithm, delta)?)?;
        let cap = self.config.sample_cap;
        let mut capped = false;
        let declared = 'run: loop {
            for arm in policy.select(&stats)? {
                if stats.total_samples() >= cap {
                    capped = true;
                    break 'run None;
                }
                let i = self.env.pull_index(arm, &mut rng)?;
                policy.observe_index(&mut stats, arm, i)?;
            }
            if let StepOutcome::Declared { arm, .. } = policy.eliminate_and_check_stop(&stats)? {
                debug_assert!(policy.is_active(arm));
                break Some(arm);
            }
        };
        let best = self.env.best_arm();
        Ok(TrialResult {
            algorithm,
            delta,
            trial,
            declared,
            correct: declared == Some(best.arm),
            capped,
            total_samples: stats.total_samples(),
            rounds: policy.rounds(),
            pulls: stats.all_pulls().to_vec(),
            wall_time: start.elapsed(),
        })
    }

    /// Every trial of every cell, ordered by cell then trial index.
    pub fn run_trials(&self) -> Result<Vec<TrialResult>> {
        let c = &self.config;
        let jobs: Vec<(Algorithm, f64, u64)> = c
            .algorithms
            .iter()
            .flat_map(|&a| c.deltas.iter().flat_map(move |&d| (0..c.trials as u64).map(move |t| (a, d, t))))
            .collect();
        let run = || jobs.par_iter().map(|&(a, d, t)| self.run_trial(a, d, t)).collect::<Result<Vec<_>>>();
        if c.workers == 0 {
            run()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(c.workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", c.workers)))?
                .install(run)
        }
    }

    /// Competitive summary of the instance at each configured delta; `None`
    /// when the instance has no unique best arm.
    pub fn competitive_summaries(&self) -> Vec<CompetitiveSummary<T>> {
        self.config
            .deltas
            .iter()
            .filter_map(|&d| {
                competitive_summary_for(self.env.as_ref(), &self.table, T::lit(d), T::lit(self.config.zeta))
                    .map_err(|e| log::warn!("no competitive summary at delta {d}: {e}"))
                    .ok()
            })
            .collect()
    }

    pub fn run(&self) -> Result<ExperimentReport<T>> {
        let trials = self.run_trials()?;
        Ok(ExperimentReport::from_trials(self.config.clone(), self.competitive_summaries(), &trials))
    }
}

impl Experiment<f64> {
    /// Builds environment and table from the config's specs. Relative paths
    /// resolve against `base_dir`.
    pub fn from_config(config: ExperimentConfig, base_dir: impl AsRef<Path>) -> Result<Self> {
        config.validate()?;
        let base = base_dir.as_ref();
        let (env, joint) = match &config.env {
            EnvSpec::Builtin { name } => {
                let joint = name.joint();
                (AnyEnvironment::Tabular(TabularEnv::new(joint.clone())), Some(joint))
            }
            EnvSpec::Joint { path, support } => {
                let support = support.clone().map(RewardSupport::from_values).transpose()?;
                let joint = JointPmf::read_csv(ExperimentConfig::resolve(base, path), support)?;
                (AnyEnvironment::Tabular(TabularEnv::new(joint.clone())), Some(joint))
            }
            EnvSpec::Latent { x_support, x_prob, lower, upper, max_reward } => {
                let env = LatentSourceEnv::new(x_support.clone(), x_prob.clone(), lower.clone(), upper.clone(), *max_reward)?;
                (AnyEnvironment::Latent(env), None)
            }
            EnvSpec::Dataset { pools, support } => {
                let support = RewardSupport::from_values(support.iter().copied())?;
                let env = DatasetEnv::read_pools(ExperimentConfig::resolve(base, pools), support)?;
                (AnyEnvironment::Dataset(env), None)
            }
        };
        let spec = &config.table;
        let base_table = match (&spec.source, &env) {
            (TableSource::Exact, AnyEnvironment::Latent(latent)) => PseudoRewardTable::exact_from_joint(&latent.joint()?)?,
            (TableSource::Exact, _) => match &joint {
                Some(j) => PseudoRewardTable::exact_from_joint(j)?,
                None => return Err(Error::Config("an exact table needs a joint or latent environment".into())),
            },
            (TableSource::Uninformative, _) => PseudoRewardTable::uninformative(env.arms(), env.support().clone())?,
            (TableSource::TwoArm, _) => instances::two_arm_table(),
            (TableSource::File { path }, _) => {
                PseudoRewardTable::read_csv(ExperimentConfig::resolve(base, path), Some(env.support().clone()))?
            }
            (TableSource::Latent { kappa }, AnyEnvironment::Latent(latent)) => latent.pseudo_reward_table(*kappa)?,
            (TableSource::Latent { .. }, _) => {
                return Err(Error::Config("a latent table needs a latent environment".into()))
            }
        };
        let table = base_table.pad_unknown(spec.padding, spec.seed)?.apply_safety_buffer(spec.safety_buffer)?;
        Self::new(config, env, table)
    }

    /// Reads a config file and resolves it next to the file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let config = ExperimentConfig::from_path(path)?;
        Self::from_config(config, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub algorithm: Algorithm,
    pub delta: f64,
    /// Trial index, also the random stream index.
    pub trial: u64,
    pub declared: Option<usize>,
    pub correct: bool,
    /// The sample cap stopped the run; `declared` is `None`.
    pub capped: bool,
    pub total_samples: u64,
    pub rounds: u64,
    pub pulls: Vec<u64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Equality ignores `wall_time`.
impl PartialEq for TrialResult {
    fn eq(&self, other: &Self) -> bool {
        self.algorithm == other.algorithm
            && self.delta.to_bits() == other.delta.to_bits()
            && self.trial == other.trial
            && self.declared == other.declared
            && self.correct == other.correct
            && self.capped == other.capped
            && self.total_samples == other.total_samples
            && self.rounds == other.rounds
            && self.pulls == other.pulls
    }
}

/// Aggregate of one (algorithm, delta) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub delta: f64,
    /// Mean over all trials, capped ones included at their sample count.
    pub mean_samples: f64,
    /// Population standard deviation.
    pub std_samples: f64,
    pub success_rate: f64,
    pub trials: usize,
    pub capped_trials: usize,
    /// Every trial hit the cap.
    pub invalid: bool,
}

impl CellSummary {
    fn from_trials(algorithm: Algorithm, delta: f64, trials: &[&TrialResult]) -> Self {
        let m = trials.len();
        let samples: Vec<f64> = trials.iter().map(|t| t.total_samples as f64).collect();
        let mean = if m == 0 { 0.0 } else { samples.iter().sum::<f64>() / m as f64 };
        let var = if m == 0 { 0.0 } else { samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / m as f64 };
        let correct = trials.iter().filter(|t| t.correct).count();
        let capped = trials.iter().filter(|t| t.capped).count();
        Self {
            algorithm,
            delta,
            mean_samples: mean,
            std_samples: var.sqrt(),
            success_rate: if m == 0 { 0.0 } else { correct as f64 / m as f64 },
            trials: m,
            capped_trials: capped,
            invalid: m > 0 && capped == m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ExperimentReport<T> {
    pub config: ExperimentConfig,
    /// One summary per configured delta, when the instance admits one.
    pub competitive: Vec<CompetitiveSummary<T>>,
    /// Sorted by algorithm name, then delta descending.
    pub cells: Vec<CellSummary>,
}

const CSV_HEADER: [&str; 7] =
    ["algorithm", "delta", "mean_samples", "std_samples", "success_rate", "trials", "capped_trials"];

/// Report file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl<T: Scalar> ExperimentReport<T> {
    /// Folds trial results into cells. Trials are grouped by (algorithm,
    /// delta) and ordered by trial index, so the input order is irrelevant.
    pub fn from_trials(config: ExperimentConfig, competitive: Vec<CompetitiveSummary<T>>, trials: &[TrialResult]) -> Self {
        let mut groups: BTreeMap<(&'static str, u64), (Algorithm, f64, Vec<&TrialResult>)> = BTreeMap::new();
        for t in trials {
            // Delta descending: negate the bit-ordered key.
            let key = (t.algorithm.name(), u64::MAX - t.delta.to_bits());
            groups.entry(key).or_insert_with(|| (t.algorithm, t.delta, Vec::new())).2.push(t);
        }
        let cells = groups
            .into_values()
            .map(|(a, d, mut ts)| {
                ts.sort_by_key(|t| t.trial);
                CellSummary::from_trials(a, d, &ts)
            })
            .collect();
        Self { config, competitive, cells }
    }

    /// True when some cell had all of its trials capped.
    pub fn has_invalid_cell(&self) -> bool {
        self.cells.iter().any(|c| c.invalid)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for c in &self.cells {
            w.write_record([
                c.algorithm.name().to_string(),
                c.delta.to_string(),
                c.mean_samples.to_string(),
                c.std_samples.to_string(),
                c.success_rate.to_string(),
                c.trials.to_string(),
                c.capped_trials.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn emit(&self, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
        let path = path.as_ref();
        let text = match format {
            ReportFormat::Csv => self.to_csv_string()?,
            ReportFormat::Json => self.to_json_string()?,
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Process exit status for an error: 2 for bad inputs, 3 for I/O, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        return 3;
    }
    match err {
        Error::Config(_) | Error::Parameter(_) | Error::Validation(_) | Error::Schema(_) | Error::Json(_) | Error::Csv(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(env: EnvSpec, algorithms: Vec<Algorithm>, deltas: Vec<f64>, trials: usize) -> ExperimentConfig {
        ExperimentConfig::new(env, TableSpec::new(TableSource::Exact), algorithms, deltas, trials)
    }

    #[test]
    fn deterministic_env_declares_argmax() {
        let support = RewardSupport::from_values([0.0, 0.3, 0.6, 1.0]).unwrap();
        let joint = JointPmf::deterministic(support, vec![0.3, 1.0, 0.0, 0.6]).unwrap();
        let cfg = config(EnvSpec::Builtin { name: Builtin::FiveArm }, Algorithm::ALL.to_vec(), vec![0.1], 2);
        let table = PseudoRewardTable::exact_from_joint(&joint).unwrap();
        let exp = Experiment::new(cfg, AnyEnvironment::Tabular(TabularEnv::new(joint)), table).unwrap();
        for t in exp.run_trials().unwrap() {
            assert_eq!(t.declared, Some(1), "{}", t.algorithm);
            assert!(t.correct);
            assert_eq!(t.pulls.iter().sum::<u64>(), t.total_samples);
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let exp = Experiment::from_config(
            config(EnvSpec::Builtin { name: Builtin::ThreeArm }, vec![Algorithm::CLucb], vec![0.1], 1),
            ".",
        )
        .unwrap();
        let a = exp.run_trial(Algorithm::CLucb, 0.1, 7).unwrap();
        let b = exp.run_trial(Algorithm::CLucb, 0.1, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tight_cap_flags_trial() {
        let mut cfg = config(EnvSpec::Builtin { name: Builtin::EightArm }, vec![Algorithm::Lucb], vec![0.01], 2);
        cfg.sample_cap = 9;
        let exp = Experiment::from_config(cfg, ".").unwrap();
        let report = exp.run().unwrap();
        assert!(report.has_invalid_cell());
        assert_eq!(report.cells[0].capped_trials, 2);
        assert_eq!(report.cells[0].success_rate, 0.0);

        let mut cfg = config(EnvSpec::Builtin { name: Builtin::EightArm }, vec![Algorithm::Lucb], vec![0.01], 1);
        cfg.sample_cap = 8;
        assert!(matches!(Experiment::from_config(cfg, "."), Err(Error::Config(_))));
    }

    #[test]
    fn single_trial_has_zero_std() {
        let exp = Experiment::from_config(
            config(EnvSpec::Builtin { name: Builtin::ThreeArm }, vec![Algorithm::Racing], vec![0.1], 1),
            ".",
        )
        .unwrap();
        assert_eq!(exp.run().unwrap().cells[0].std_samples, 0.0);
    }

    #[test]
    fn fold_ignores_trial_order_and_sorts_rows() {
        let cfg = config(
            EnvSpec::Builtin { name: Builtin::ThreeArm },
            vec![Algorithm::Lucb, Algorithm::CLucb],
            vec![0.02, 0.1, 0.06, 0.01],
            3,
        );
        let exp = Experiment::from_config(cfg.clone(), ".").unwrap();
        let mut trials = exp.run_trials().unwrap();
        let forward = ExperimentReport::<f64>::from_trials(cfg.clone(), Vec::new(), &trials);
        trials.reverse();
        let backward = ExperimentReport::<f64>::from_trials(cfg, Vec::new(), &trials);
        assert_eq!(forward, backward);
        let rows: Vec<(&str, f64)> = forward.cells.iter().map(|c| (c.algorithm.name(), c.delta)).collect();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0], ("c-lucb", 0.1));
        assert_eq!(rows[3], ("c-lucb", 0.01));
        assert_eq!(rows[4], ("lucb", 0.1));
    }

    #[test]
    fn empty_report_is_header_only() {
        let cfg = config(EnvSpec::Builtin { name: Builtin::ThreeArm }, vec![Algorithm::Lucb], vec![0.1], 1);
        let report = ExperimentReport::<f64>::from_trials(cfg, Vec::new(), &[]);
        assert_eq!(report.to_csv_string().unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn json_round_trip() {
        let cfg = config(EnvSpec::Builtin { name: Builtin::TwoArmA }, vec![Algorithm::CLucb], vec![0.1], 2);
        let exp = Experiment::from_config(cfg, ".").unwrap();
        let report = exp.run().unwrap();
        assert_eq!(report.competitive.len(), 1);
        let back: ExperimentReport<f64> = serde_json::from_str(&report.to_json_string().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn config_parsing_and_validation() {
        let text = r#"
            algorithms = ["c-lucb", "lucb++"]
            deltas = [0.1, 0.01]
            trials = 5
            master_seed = 3
            [env]
            kind = "builtin"
            name = "five-arm"
            [table]
            kind = "uninformative"
            padding = 0.5
            [schedules."lucb++"]
            family = "kl"
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.table.source, TableSource::Uninformative);
        assert_eq!(cfg.schedules[&Algorithm::LucbPlusPlus].family, BoundFamily::Kl);
        assert_eq!(cfg.sample_cap, default_sample_cap());
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);

        let mut bad = cfg.clone();
        bad.deltas = vec![1.0];
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let mut bad = cfg.clone();
        bad.trials = 0;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.schedules.insert(Algorithm::Lucb, ScheduleSpec { family: BoundFamily::LilKl, kappa: None });
        assert!(bad.validate().is_err());
        assert!(toml::from_str::<ExperimentConfig>("algorithms = [\"nope\"]").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::io("p", std::io::Error::other("x"))), 3);
        assert_eq!(exit_code(&Error::Lifecycle("x".into())), 1);
    }
}
