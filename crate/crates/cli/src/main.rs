use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sinr_coloring::engine::read_trace_file;
use sinr_coloring::harness::{self, trace_checks, ExperimentConfig, LambdaMode};
use sinr_coloring::params::{calibrate_lambda, derive_constants, theoretical_lambda, CalibrationOptions, SUCCESS_TARGET};
use sinr_coloring::sinr::{read_topology_file, Topology};
use sinr_coloring::{rng, Result};

#[derive(Parser)]
#[command(name = "sinrsim", version, about = "SINR network coloring simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write one CSV row per seed.
    Run(ExperimentArgs),
    /// Print the derived protocol constants as JSON.
    Constants {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Use this Δ^A instead of measuring it on the first seed's topology.
        #[arg(long)]
        delta_a: Option<usize>,
    },
    /// Calibrate λ on each seed's topology and print the reports as JSON.
    Calibrate(ExperimentArgs),
    /// Audit a recorded trace against its topology.
    CheckTrace {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        /// Active-interval length in slots; enables the density check.
        #[arg(long)]
        interval: Option<u64>,
    },
}

#[derive(Args, Default)]
struct ExperimentArgs {
    /// Flat key=value file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<String>,
    /// Side of the square area; when absent the area is fitted to --target-delta.
    #[arg(long)]
    area: Option<String>,
    #[arg(long)]
    target_delta: Option<String>,
    /// uniform-square, grid or poisson.
    #[arg(long)]
    placement: Option<String>,
    /// Read positions from a topology file instead of generating them.
    #[arg(long)]
    topology: Option<String>,
    /// sync, async, rand4delta or reduction.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    power: Option<String>,
    #[arg(long)]
    rb: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    c: Option<String>,
    /// `auto` or a positive number.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// For example `0..20` or `1,4,9`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    max_slots: Option<String>,
    /// Asynchronous wake-up spread in units of κ2.
    #[arg(long)]
    wake_spread: Option<String>,
    #[arg(long)]
    calibration_trials: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    deterministic: bool,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("n", &self.n),
            ("area", &self.area),
            ("target-delta", &self.target_delta),
            ("placement", &self.placement),
            ("topology", &self.topology),
            ("algo", &self.algo),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("noise", &self.noise),
            ("power", &self.power),
            ("rb", &self.rb),
            ("epsilon", &self.epsilon),
            ("c", &self.c),
            ("lambda", &self.lambda),
            ("k", &self.k),
            ("seeds", &self.seeds),
            ("max-slots", &self.max_slots),
            ("wake-spread", &self.wake_spread),
            ("calibration-trials", &self.calibration_trials),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.apply(key, v)?;
            }
        }
        config.trace |= self.trace;
        config.deterministic |= self.deterministic;
        config.validate()?;
        Ok(config)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(exp: &ExperimentArgs) -> Result<bool> {
    let config = exp.config()?;
    let reports = harness::run_experiment(&config)?;
    if config.out.is_none() {
        let rows: Vec<_> = reports.iter().map(|r| r.row.clone()).collect();
        harness::write_csv(std::io::stdout().lock(), &rows, !config.deterministic)?;
    }
    for r in reports.iter().filter(|r| !r.ok()) {
        eprintln!("seed {}: {}", r.row.seed, r.row.status);
        for f in &r.failures {
            eprintln!("  {f}");
        }
        for (v, e) in &r.protocol_errors {
            eprintln!("  node {v}: {e}");
        }
    }
    Ok(reports.iter().all(|r| r.ok()))
}

fn constants(exp: &ExperimentArgs, delta_a: Option<usize>) -> Result<bool> {
    let config = exp.config()?;
    let seed = config.seeds[0];
    let constants = match (delta_a, config.lambda) {
        (Some(d), LambdaMode::Value(lambda)) => derive_constants(config.n, d, config.c, lambda)?.with_k(config.k)?,
        _ => {
            let (topology, params) = harness::seed_topology(&config, seed)?;
            harness::seed_constants(&config, &topology, &params, seed)?.0
        }
    };
    print_json(&serde_json::json!({
        "constants": constants,
        "theoretical": theoretical_lambda(&config.params),
    }))?;
    Ok(true)
}

fn calibrate(exp: &ExperimentArgs) -> Result<bool> {
    let config = exp.config()?;
    let mut reports = Vec::new();
    for &seed in &config.seeds {
        let (topology, params) = harness::seed_topology(&config, seed)?;
        let p1 = derive_constants(topology.len().max(2), topology.delta_a(), config.c, 1.0)?.p1;
        let report = calibrate_lambda(
            &topology,
            &params,
            p1,
            SUCCESS_TARGET,
            config.calibration_trials,
            &mut rng::calibration_rng(seed),
            &CalibrationOptions::default(),
        )?;
        reports.push(serde_json::json!({ "seed": seed, "delta": topology.delta(), "report": report }));
    }
    print_json(&reports)?;
    Ok(true)
}

fn check_trace(trace: &PathBuf, topology: &PathBuf, interval: Option<u64>) -> Result<bool> {
    let file = read_topology_file(topology)?;
    let params = sinr_coloring::sinr::PhysicalParams { r_b: file.r_b, ..Default::default() };
    let topology = Topology::build(file.positions, &params)?;
    let events = read_trace_file(trace)?;
    let report = trace_checks(&topology, &events, interval)?;
    print_json(&report)?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(exp) => run(exp),
        Command::Constants { exp, delta_a } => constants(exp, *delta_a),
        Command::Calibrate(exp) => calibrate(exp),
        Command::CheckTrace { trace, topology, interval } => check_trace(trace, topology, *interval),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
