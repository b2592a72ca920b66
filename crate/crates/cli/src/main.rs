//! `polyaflow` command-line runner.
//!
//! Exit codes: 0 when every check passed, 1 when a check failed or a run
//! aborted, 2 for an invalid configuration or command line.

use clap::{Args, Parser, Subcommand};
use polyaflow::config::{resolve_seed, ExperimentConfig};
use polyaflow::mc::replicate;
use polyaflow::suites::{self, exit_limit_sweep, write_paths};
use polyaflow::{simulate_path, Error, RngStream};
use std::path::PathBuf;
use std::process::ExitCode;

const SEED_ENV: &str = "POLYAFLOW_SEED";

#[derive(Parser)]
#[command(
    name = "polyaflow",
    version,
    about = "Monotone Cox and Pólya flows: simulation and verification suites"
)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites named in the config; writes report.json, summary.csv, paths.jsonl.
    Run(RunArgs),
    /// List registered suites with the result each one checks.
    ListSuites {
        /// Also print the default configuration with every parameter.
        #[arg(long)]
        verbose: bool,
    },
    /// Simulate paths of the configured flow into paths.jsonl.
    Simulate(RunArgs),
    /// KS distance of (1-t) Y_t(B) from Gamma(rho(B), 1) for t sweeping toward 1.
    ExitLimit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed and POLYAFLOW_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory (overrides output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Reads and validates the config; `suites = false` drops the suite list
/// for subcommands that run none.
fn load(args: &RunArgs, suites: bool) -> Result<ExperimentConfig, Failure> {
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::parse(&text).map_err(|e| Failure::Invalid(e.to_string()))?;
    let env = std::env::var(SEED_ENV).ok();
    config.seed = resolve_seed(args.seed, env.as_deref(), config.seed).map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(n) = args.replicas {
        config.replicas = n;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if !suites {
        config.suite.clear();
    }
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(Failure::Invalid(problems.join("\n")));
    }
    Ok(config)
}

fn run(args: &RunArgs) -> Result<bool, Failure> {
    let config = load(args, true)?;
    let output = suites::run(&config)?;
    suites::write_outputs(&output, &config.output_dir)?;
    for r in output.reports() {
        println!("{r}");
    }
    let failed = output.reports().iter().filter(|r| !r.passed).count();
    println!(
        "{} reports, {failed} failed, {} path steps, {} monotonicity violations",
        output.reports().len(),
        output.path_steps(),
        output.violations()
    );
    Ok(output.passed())
}

fn simulate(args: &RunArgs) -> Result<bool, Failure> {
    let config = load(args, false)?;
    let stream = RngStream::new(config.seed, 0);
    let paths: Vec<_> = replicate(config.replicas, stream, 0, |rng| simulate_path(&config.flow, &config.grid, rng))
        .into_iter()
        .collect::<Result<_, _>>()?;
    std::fs::create_dir_all(&config.output_dir).map_err(Error::from)?;
    let file = std::fs::File::create(config.output_dir.join("paths.jsonl")).map_err(Error::from)?;
    write_paths(&paths, file)?;
    let bad: usize = paths.iter().map(|p| p.monotonicity_violations()).sum();
    println!("{} paths written, {bad} monotonicity violations", paths.len());
    Ok(bad == 0)
}

fn exit_limit(args: &RunArgs) -> Result<bool, Failure> {
    let config = load(args, false)?;
    let stream = RngStream::new(config.seed, 0);
    let rows = exit_limit_sweep(&config.flow.rho, &config.params.exit_sweep, config.replicas, stream)?;
    let mut csv = String::from("t,ks\n");
    for (t, ks) in &rows {
        csv.push_str(&format!("{t},{ks}\n"));
        println!("t = {t}: KS = {ks:.5}");
    }
    std::fs::create_dir_all(&config.output_dir).map_err(Error::from)?;
    std::fs::write(config.output_dir.join("exit_limit.csv"), csv).map_err(Error::from)?;
    Ok(true)
}

fn list(verbose: bool) {
    for s in suites::registry() {
        println!("{:<24} {}", s.name, s.description);
        println!("{:<24} checks: {}", "", s.anchor);
    }
    if verbose {
        println!("\n# default configuration\n{}", ExperimentConfig::default().to_toml());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::ListSuites { verbose } => {
            list(*verbose);
            Ok(true)
        }
        Command::Run(args) => run(args),
        Command::Simulate(args) => simulate(args),
        Command::ExitLimit(args) => exit_limit(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("invalid configuration:");
            for line in msg.lines() {
                eprintln!("  - {line}");
            }
            ExitCode::from(2)
        }
    }
}
