//! `transmed`: simulation studies, estimation on CSV data, and oracle
//! truths from the command line.

mod config;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use transmed_core::dgp::Labeling;
use transmed_core::sim::{EffMode, Scenario, SimConfig};
use transmed_core::truth::truth_report;
use transmed_core::{CounterRng, Dataset, DgmSpec, EstimatorId};

#[derive(Parser)]
#[command(name = "transmed", version, about = "Transported mediation effect estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated simulation study and write summary tables.
    Simulate(SimulateArgs),
    /// Estimate SDE and SIE on a CSV dataset.
    Estimate(EstimateArgs),
    /// Print the enumerated truth report for a built-in DGM.
    Truth(TruthArgs),
    /// Sample a dataset from a built-in DGM and print it as CSV.
    Sample(SampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelingArg {
    Main,
    Appendix,
}

impl From<LabelingArg> for Labeling {
    fn from(v: LabelingArg) -> Labeling {
        match v {
            LabelingArg::Main => Labeling::Main,
            LabelingArg::Appendix => Labeling::Appendix,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    dgm: Option<u8>,
    #[arg(long, value_enum)]
    labeling: Option<LabelingArg>,
    /// Sample size per replication.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Bootstrap resamples per replication (0 disables).
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Misspecification scenario: none, y, yz, ym, ys, zms.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma list of iptw, ee_eff, ee_gen, tmle_eff, tmle_gen.
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    s_ref: Option<u8>,
    /// Probability clipping floor for weight denominators.
    #[arg(long)]
    clip: Option<f64>,
    /// Efficiency denominator: mean n·SE² (default) or empirical variance.
    #[arg(long)]
    eff_mode: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV with header S,W1,W2,A,Z,M,Y (Y empty where S=0).
    input: PathBuf,
    /// TOML config file supplying model terms; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the correct model terms of this built-in DGM.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    dgm: Option<u8>,
    #[arg(long, value_enum, default_value = "main")]
    labeling: LabelingArg,
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    s_ref: u8,
    #[arg(long, default_value_t = 0.0)]
    clip: f64,
    #[arg(long, default_value_t = 200)]
    boot: usize,
    /// Skip the bootstrap entirely.
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TruthArgs {
    #[arg(long)]
    dgm: u8,
    #[arg(long, value_enum, default_value = "main")]
    labeling: LabelingArg,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    s_ref: u8,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    dgm: u8,
    #[arg(long, value_enum, default_value = "main")]
    labeling: LabelingArg,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Config/usage problem: exit 2. Anything failing at run time: exit 1.
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Config(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            CliError::Runtime(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Truth(args) => cmd_truth(args),
        Command::Sample(args) => cmd_sample(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn parse_estimators(list: &str) -> Result<Vec<EstimatorId>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            EstimatorId::parse(s)
                .ok_or_else(|| CliError::Config(format!("unknown estimator `{s}`")))
        })
        .collect()
}

fn install_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            if t == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file = config::SimFile::load(args.config.as_deref())?;

    let scenario = match args.scenario.as_deref().or(file.scenario.as_deref()) {
        None => Scenario::None,
        Some(s) => Scenario::parse(s)
            .ok_or_else(|| CliError::Config(format!("unknown scenario `{s}`")))?,
    };
    let estimators = match args.estimators.as_deref().or(file.estimators.as_deref()) {
        None => EstimatorId::ALL.to_vec(),
        Some(list) => parse_estimators(list)?,
    };
    let eff_mode = match args.eff_mode.as_deref().or(file.eff_mode.as_deref()) {
        None | Some("mean_n_se2") => EffMode::MeanNSe2,
        Some("empirical_variance") => EffMode::EmpiricalVariance,
        Some(other) => {
            return Err(CliError::Config(format!("unknown efficiency mode `{other}`")))
        }
    };
    let labeling: Labeling = args
        .labeling
        .map(Labeling::from)
        .or(file.labeling()?)
        .unwrap_or(Labeling::Main);

    let config = SimConfig {
        dgm: args.dgm.or(file.dgm).unwrap_or(1),
        labeling,
        n: args.n.or(file.n).unwrap_or(5000),
        reps: args.reps.or(file.reps).unwrap_or(200),
        boot: args.boot.or(file.boot).unwrap_or(100),
        seed: args.seed.or(file.seed).unwrap_or(0),
        s_ref: args.s_ref.or(file.s_ref).unwrap_or(0),
        scenario,
        estimators,
        eff_mode,
        clip: args.clip.or(file.clip).unwrap_or(0.0),
    };
    if config.reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    if config.dgm_spec().is_none() {
        return Err(CliError::Config(format!("unknown DGM id {}", config.dgm)));
    }

    let started = std::time::Instant::now();
    let threads = args.threads.or(file.threads);
    let summary = install_pool(threads, || transmed_core::run_study(&config))?
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    output::write_simulation(&args.out, args.format, &config, &summary, started.elapsed())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let dataset = Dataset::load_csv(&args.input)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.input.display())))?;
    let terms = config::estimate_terms(&args)?;
    let estimators = match args.estimators.as_deref() {
        None => EstimatorId::ALL.to_vec(),
        Some(list) => parse_estimators(list)?,
    };
    let cfg = transmed_core::AnalysisConfig {
        terms_restricted: terms.0,
        terms_unrestricted: terms.1,
        estimators,
        s_ref: args.s_ref,
        clip: args.clip,
    };
    let boot = if args.no_bootstrap { 0 } else { args.boot };
    let rng = CounterRng::new(args.seed);
    let analysis = install_pool(args.threads, || {
        transmed_core::analyze_with_bootstrap(&dataset, &cfg, boot, &rng)
    })?
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let screen = dataset.validate();
    println!("{}", output::estimate_json(&analysis.effects, &screen));
    Ok(())
}

fn cmd_truth(args: TruthArgs) -> Result<(), CliError> {
    let dgm = DgmSpec::preset(args.dgm, args.labeling.into())
        .ok_or_else(|| CliError::Config(format!("unknown DGM id {}", args.dgm)))?;
    let report = truth_report(&dgm, args.s_ref);
    println!(
        "{}",
        serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Runtime(e.to_string()))?
    );
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let dgm = DgmSpec::preset(args.dgm, args.labeling.into())
        .ok_or_else(|| CliError::Config(format!("unknown DGM id {}", args.dgm)))?;
    let dataset = dgm
        .sample(args.n, CounterRng::new(args.seed))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv = dataset.write_csv();
    match args.out {
        None => print!("{csv}"),
        Some(path) => std::fs::write(&path, csv)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?,
    }
    Ok(())
}
