use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use corrbai::analysis::{competitive_summary, lemma_bound_check, Lemma, DEFAULT_ZETA};
use corrbai::confidence::coverage_check;
use corrbai::harness::{exit_code, ReportFormat, EXIT_ALL_CAPPED};
use corrbai::ingest::{self, ArmSource, BuildOptions, EstimateMode, RatingSchema, SplitSpec};
use corrbai::{instances, BoundFamily, Environment, Error, Experiment, Joint, Result, Schedule, Support, Table, TabularEnv};

#[derive(Parser)]
#[command(name = "corrbai", version, about = "Best-arm identification with correlated arms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mean,
    MeanStd,
}

#[derive(Clone, Copy, ValueEnum)]
enum LemmaArg {
    Single,
    Min,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Learn a pseudo-reward table from a ratings file.
    BuildTable {
        #[arg(long)]
        ratings: PathBuf,
        /// `item,label` file; required unless --top-items is given.
        #[arg(long, required_unless_present = "top_items")]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Padding fraction.
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        /// Safety buffer.
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "mean")]
        mode: Mode,
        /// Use the n most rated items as arms instead of labels.
        #[arg(long, conflicts_with = "labels")]
        top_items: Option<usize>,
        /// Comma-separated rating values.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        support: Vec<f64>,
        /// Column names for user, item and rating.
        #[arg(long, value_delimiter = ',', default_value = "user,item,rating")]
        columns: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        train_fraction: f64,
        /// Write the test-half reward pools (`arm,value,count`) here.
        #[arg(long)]
        pools_out: Option<PathBuf>,
    },
    /// Print the competitive summary of a joint law and table as JSON.
    Analyze {
        #[arg(long)]
        joint: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_ZETA)]
        zeta: f64,
    },
    /// Monte-Carlo check of a confidence family's anytime coverage.
    ValidateBounds {
        #[arg(long)]
        family: BoundFamily,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 2000)]
        streams: usize,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        kappa: Option<f64>,
        /// Reward range `b`.
        #[arg(long, default_value_t = 1.0)]
        range: f64,
    },
    /// Tail rates of the pseudo-UCB index under uniform random pulls.
    LemmaCheck {
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<u64>,
        #[arg(long)]
        trials: u64,
        /// Joint law; the built-in five-arm instance when absent.
        #[arg(long, requires = "table")]
        joint: Option<PathBuf>,
        #[arg(long, requires = "joint")]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "both")]
        lemma: LemmaArg,
    },
}

fn print_json<S: serde::Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run_experiment(config: &Path, out: Option<PathBuf>, json: Option<PathBuf>, workers: Option<usize>) -> Result<i32> {
    let mut experiment = Experiment::from_path(config)?;
    if let Some(w) = workers {
        let mut c = experiment.config().clone();
        c.workers = w;
        experiment = Experiment::new(c, experiment.env().clone(), experiment.table().clone())?;
    }
    let report = experiment.run()?;
    match out {
        Some(path) => report.emit(path, ReportFormat::Csv)?,
        None => print!("{}", report.to_csv_string()?),
    }
    if let Some(path) = json {
        report.emit(path, ReportFormat::Json)?;
    }
    for cell in report.cells.iter().filter(|c| c.invalid) {
        log::error!("{} at delta {}: every trial hit the sample cap", cell.algorithm, cell.delta);
    }
    Ok(if report.has_invalid_cell() { EXIT_ALL_CAPPED } else { 0 })
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run { config, out, json, workers } => return run_experiment(&config, out, json, workers),
        Command::BuildTable {
            ratings,
            labels,
            out,
            p,
            q,
            seed,
            mode,
            top_items,
            support,
            columns,
            train_fraction,
            pools_out,
        } => {
            let support = Support::from_values(support)?;
            let [user, item, rating] = <[String; 3]>::try_from(columns)
                .map_err(|c| Error::Config(format!("--columns needs three names, got {}", c.len())))?;
            let arms = match (top_items, labels) {
                (Some(n), _) => ArmSource::TopItems(n),
                (None, Some(path)) => ArmSource::Labels(path),
                (None, None) => return Err(Error::Config("need --labels or --top-items".into())),
            };
            let opts = BuildOptions {
                schema: RatingSchema { user, item, rating },
                arms,
                split: SplitSpec { train_fraction, ..SplitSpec::default() },
                mode: match mode {
                    Mode::Mean => EstimateMode::MeanOnly,
                    Mode::MeanStd => EstimateMode::MeanPlusStd,
                },
                padding: p,
                safety_buffer: q,
                seed,
            };
            let built = ingest::build_from_files(&ratings, &support, &opts)?;
            built.table.write_csv(&out)?;
            if let Some(path) = pools_out {
                built.env.write_pools(path)?;
            }
            eprintln!(
                "{} arms ({}), {} rejected rows, {} unlabelled items, {} single-event cells",
                built.arm_labels.len(),
                built.arm_labels.join(", "),
                built.rejected,
                built.excluded_items.len(),
                built.single_event_cells
            );
        }
        Command::Analyze { joint, table, delta, zeta } => {
            let joint = Joint::read_csv(joint, None)?;
            let table = Table::read_csv(table, Some(joint.support().clone()))?;
            print_json(&competitive_summary(&joint, &table, delta, zeta)?)?;
        }
        Command::ValidateBounds { family, delta, streams, horizon, seed, kappa, range } => {
            let schedule = Schedule::with_kappa(family, range, kappa)?;
            print_json(&coverage_check(&schedule, delta, streams, horizon, seed)?)?;
        }
        Command::LemmaCheck { t, trials, joint, table, seed, lemma } => {
            let (joint, table) = match (joint, table) {
                (Some(j), Some(tb)) => {
                    let joint = Joint::read_csv(j, None)?;
                    let table = Table::read_csv(tb, Some(joint.support().clone()))?;
                    (joint, table)
                }
                _ => {
                    let joint = instances::five_arm_joint();
                    let table = Table::exact_from_joint(&joint)?;
                    (joint, table)
                }
            };
            let env = TabularEnv::new(joint);
            if env.best_arm().tie {
                log::warn!("the best arm is tied; the check uses the lowest index");
            }
            let lemmas: &[Lemma] = match lemma {
                LemmaArg::Single => &[Lemma::L3Single],
                LemmaArg::Min => &[Lemma::L4Min],
                LemmaArg::Both => &[Lemma::L3Single, Lemma::L4Min],
            };
            let mut rates = Vec::new();
            for &l in lemmas {
                rates.extend(lemma_bound_check(l, &env, &table, &t, trials, seed)?);
            }
            print_json(&rates)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
