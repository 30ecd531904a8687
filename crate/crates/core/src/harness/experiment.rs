//! Per-seed experiment pipeline and CSV output.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{
    active_density_bound, max_leaders_within_2rb, max_same_color_per_region, AsyncObserver, MAX_ACTIVE_PER_REGION,
    MAX_LEADERS_NEAR, MAX_SAME_COLOR_PER_REGION,
};
use super::config::{Algo, ExperimentConfig, LambdaMode};
use super::decay::{conflict_counts, conflict_decay, DecayFit};
use super::placement::{generate_topology, generate_with_target_degree, PlacementSpec};
use super::validate::{random_greedy_coloring, validate_coloring, verify_mis, MisReport, ValidationReport};
use crate::coloring_async::AsyncColoring;
use crate::coloring_sync::{ColorReduction, Rand4Delta, SyncColoring};
use crate::engine::{run, write_trace_file, AuditReport, NodeProcess, Observer, RunOptions, RunResult, TraceEvent, WakeSchedule};
use crate::params::{calibrate_lambda, derive_constants, CalibrationOptions, CalibrationReport, ProtocolConstants, SUCCESS_TARGET};
use crate::sinr::{read_topology_file, write_topology_file, PhysicalParams, Topology};
use crate::{rng, Color, Error, NodeId, Result};

/// Outcome of the geometric invariant checks for one run. `None` fields did
/// not apply to the algorithm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometricReport {
    pub audit: AuditReport,
    /// Most MIS(1) winners within `2 r_B` of one node.
    pub leader_packing_max: Option<usize>,
    /// Most same-colored nodes in one broadcasting region, over the input
    /// coloring and the final coloring when valid.
    pub same_color_max: Option<usize>,
    /// Most nodes of one region inside their active interval in one slot.
    pub active_density_max: Option<usize>,
    /// Regions whose active count exceeded the per-region oracle bound, as
    /// `(center, observed, bound)`.
    pub density_excess: Vec<(NodeId, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub seed: u64,
    pub algo: Algo,
    pub n: usize,
    pub delta: usize,
    pub delta_a: usize,
    pub slots_total: u64,
    pub slots_p50: u64,
    pub slots_max: u64,
    pub palette_used: usize,
    pub valid: bool,
    pub decay_ratio: Option<f64>,
    pub audit_max: f64,
    pub status: String,
}

const COLUMNS: [&str; 13] = [
    "seed",
    "algo",
    "n",
    "delta",
    "delta_a",
    "slots_total",
    "slots_p50",
    "slots_max",
    "palette_used",
    "valid",
    "decay_ratio",
    "audit_max",
    "status",
];

impl CsvRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.algo.to_string(),
            self.n.to_string(),
            self.delta.to_string(),
            self.delta_a.to_string(),
            self.slots_total.to_string(),
            self.slots_p50.to_string(),
            self.slots_max.to_string(),
            self.palette_used.to_string(),
            self.valid.to_string(),
            self.decay_ratio.map(|r| r.to_string()).unwrap_or_default(),
            self.audit_max.to_string(),
            self.status.clone(),
        ]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedReport {
    pub row: CsvRow,
    pub constants: Option<ProtocolConstants>,
    pub calibration: Option<CalibrationReport>,
    pub validation: Option<ValidationReport>,
    pub mis: Option<MisReport>,
    pub geometric: Option<GeometricReport>,
    pub conflict_counts: Vec<usize>,
    pub decay: Option<DecayFit>,
    pub slots_elapsed: Vec<Option<u64>>,
    pub protocol_errors: Vec<(NodeId, String)>,
    /// Failed invariant checks, human readable.
    pub failures: Vec<String>,
    #[serde(skip)]
    pub topology: Option<Topology>,
    #[serde(skip)]
    pub trace: Option<Vec<TraceEvent>>,
}

impl SeedReport {
    pub fn ok(&self) -> bool {
        self.row.status == "ok"
    }
}

/// Loads or generates the topology of `seed`.
pub fn seed_topology(config: &ExperimentConfig, seed: u64) -> Result<(Topology, PhysicalParams)> {
    let mut params = config.params;
    if let Some(path) = &config.topology {
        let file = read_topology_file(path)?;
        params.r_b = file.r_b;
        return Ok((Topology::build(file.positions, &params)?, params));
    }
    let mut trng = rng::topology_rng(seed);
    let topology = match config.area {
        Some(side) => generate_topology(&PlacementSpec::new(config.placement, config.n, side), &params, &mut trng)?,
        None => generate_with_target_degree(config.placement, config.n, config.target_delta, &params, &mut trng)?,
    };
    Ok((topology, params))
}

/// Resolves λ and derives the protocol constants for `topology`. Networks
/// with fewer than two nodes use `n = 2` for the logarithms; without any
/// edge there is nothing to calibrate and λ = 1.
pub fn seed_constants(
    config: &ExperimentConfig,
    topology: &Topology,
    params: &PhysicalParams,
    seed: u64,
) -> Result<(ProtocolConstants, Option<CalibrationReport>)> {
    let n = topology.len().max(2);
    let delta_a = topology.delta_a();
    let (lambda, calibration) = match config.lambda {
        LambdaMode::Value(v) => (v, None),
        LambdaMode::Auto if topology.delta() == 0 => (1.0, None),
        LambdaMode::Auto => {
            let p1 = derive_constants(n, delta_a, config.c, 1.0)?.p1;
            let report = calibrate_lambda(
                topology,
                params,
                p1,
                SUCCESS_TARGET,
                config.calibration_trials,
                &mut rng::calibration_rng(seed),
                &CalibrationOptions::default(),
            )?;
            (report.lambda_emp, Some(report))
        }
    };
    let constants = derive_constants(n, delta_a, config.c, lambda)?.with_k(config.k)?;
    Ok((constants, calibration))
}

/// Slot cap used when the configuration sets none: twice the schedule
/// length (sync variants) or twice the worst-case path through the
/// asynchronous algorithm.
pub fn default_max_slots(algo: Algo, constants: &ProtocolConstants, delta: usize, wake_max: u64) -> u64 {
    let d = delta as u64;
    let k = constants;
    let budget = match algo {
        Algo::Sync => SyncColoring::total_slots(k, delta),
        Algo::Rand4Delta => k.phases * k.kappa0,
        Algo::Reduction => (4 * d + 1) * k.kappa2,
        Algo::Async => wake_max + 3 * k.kappa1 + (d + 1) * k.kappa2 + (d + 2) * k.active_interval + 4 * k.kappa2,
    };
    2 * budget.max(1)
}

struct Outcome {
    colors: Vec<Option<Color>>,
    slots_run: u64,
    slots_elapsed: Vec<Option<u64>>,
    timed_out: bool,
    protocol_errors: Vec<(NodeId, String)>,
    audit: AuditReport,
    trace: Option<Vec<TraceEvent>>,
}

impl Outcome {
    fn from_result<P: NodeProcess>(r: &mut RunResult<P>) -> Self {
        Self {
            colors: r.colors(),
            slots_run: r.slots_run,
            slots_elapsed: r.slots_elapsed.clone(),
            timed_out: r.timed_out(),
            protocol_errors: r.protocol_errors(),
            audit: r.audit.clone(),
            trace: r.trace.take(),
        }
    }
}

fn lower_median(values: &mut [u64]) -> u64 {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

fn execute<P: NodeProcess>(
    topology: &Topology,
    params: &PhysicalParams,
    processes: Vec<P>,
    wake: &WakeSchedule,
    options: &RunOptions,
    seed: u64,
    observers: &mut [&mut dyn Observer<P>],
) -> Result<RunResult<P>> {
    run(topology, params, processes, wake, options, &mut rng::channel_rng(seed), observers)
}

/// Runs one seed end to end. Errors are setup failures (bad topology file,
/// failed calibration); protocol failures are reported through the status.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    let (topology, params) = seed_topology(config, seed)?;
    let (constants, calibration) = seed_constants(config, &topology, &params, seed)?;
    let n = topology.len();
    let delta = topology.delta();
    let wake = match config.algo {
        Algo::Async => WakeSchedule::random(n, config.wake_spread * constants.kappa2, &mut rng::wake_rng(seed)),
        _ => WakeSchedule::synchronous(n),
    };
    let wake_max = wake.as_slice().iter().copied().max().unwrap_or(0);
    let max_slots = config.max_slots.unwrap_or_else(|| default_max_slots(config.algo, &constants, delta, wake_max));
    let mut options = RunOptions::new(max_slots);
    if config.trace {
        options = options.with_trace();
    }
    let node_rng = |v: NodeId| rng::node_rng(seed, v);

    let mut failures = Vec::new();
    let mut geometric = GeometricReport::default();
    let mut mis = None;
    let mut counts = Vec::new();
    let mut decay = None;
    let mut input_coloring: Option<Vec<Color>> = None;
    let palette_max = if config.algo == Algo::Rand4Delta { 4 * delta } else { delta };

    let mut outcome = match config.algo {
        Algo::Sync => {
            let procs = (0..n).map(|v| SyncColoring::new(v, delta, &constants, node_rng(v))).collect::<Result<Vec<_>>>()?;
            let mut r = execute(&topology, &params, procs, &wake, &options, seed, &mut [])?;
            let histories: Vec<&[Color]> = r.processes.iter().map(|p| p.rand4delta().history()).collect();
            counts = conflict_counts(&topology, &histories);
            Outcome::from_result(&mut r)
        }
        Algo::Rand4Delta => {
            let procs = (0..n).map(|v| Rand4Delta::new(v, delta, &constants, node_rng(v))).collect::<Result<Vec<_>>>()?;
            let mut r = execute(&topology, &params, procs, &wake, &options, seed, &mut [])?;
            let histories: Vec<&[Color]> = r.processes.iter().map(Rand4Delta::history).collect();
            counts = conflict_counts(&topology, &histories);
            Outcome::from_result(&mut r)
        }
        Algo::Reduction => {
            let input = random_greedy_coloring(&topology, 4 * delta, &mut rng::input_coloring_rng(seed));
            let procs = (0..n)
                .map(|v| ColorReduction::new(v, input[v], 4 * delta + 1, delta, &constants, node_rng(v)))
                .collect::<Result<Vec<_>>>()?;
            input_coloring = Some(input);
            let mut r = execute(&topology, &params, procs, &wake, &options, seed, &mut [])?;
            Outcome::from_result(&mut r)
        }
        Algo::Async => {
            let input = random_greedy_coloring(&topology, delta, &mut rng::input_coloring_rng(seed));
            let procs = (0..n)
                .map(|v| AsyncColoring::new(v, input[v], delta + 1, delta, &constants, node_rng(v)))
                .collect::<Result<Vec<_>>>()?;
            let mut observer = AsyncObserver::new(&topology, constants.active_interval);
            let mut r = execute(&topology, &params, procs, &wake, &options, seed, &mut [&mut observer])?;

            let leaders: Vec<NodeId> = (0..n).filter(|&v| r.processes[v].is_leader()).collect();
            let report = verify_mis(&topology, &leaders);
            if !report.passed() {
                failures.push(format!(
                    "MIS(1) winners: {} adjacent pairs, {} uncovered nodes",
                    report.adjacent_winners.len(),
                    report.uncovered.len()
                ));
            }
            mis = Some(report);
            if let Some(&l) = leaders.iter().find(|&&l| r.processes[l].color() != Some(0)) {
                failures.push(format!("leader {l} holds color {:?}, expected 0", r.processes[l].color()));
            }

            // Leader packing from the per-slot observer, cross-checked on the
            // final leader set (leaders never step down).
            let final_packing = max_leaders_within_2rb(&topology, &leaders).0;
            let packing = observer.packing.max.max(final_packing);
            if packing > MAX_LEADERS_NEAR {
                failures.push(format!("{packing} leaders within 2 r_B of node {:?}", observer.packing.witness));
            }
            geometric.leader_packing_max = Some(packing);

            let leader_of: Vec<Option<NodeId>> = r.processes.iter().map(|p| p.record().leader).collect();
            let bound = active_density_bound(&topology, &leader_of, &input);
            geometric.density_excess = (0..n)
                .filter(|&v| observer.density.region_max[v] > bound[v])
                .map(|v| (v, observer.density.region_max[v], bound[v]))
                .collect();
            if !geometric.density_excess.is_empty() {
                failures.push(format!("active density above the oracle bound in {} regions", geometric.density_excess.len()));
            }
            if observer.density.max > MAX_ACTIVE_PER_REGION {
                failures.push(format!("{} active nodes in one region", observer.density.max));
            }
            geometric.active_density_max = Some(observer.density.max);
            input_coloring = Some(input);
            Outcome::from_result(&mut r)
        }
    };

    let validation = validate_coloring(&topology, &outcome.colors, palette_max);
    let mut same_color = input_coloring.as_ref().map(|c| max_same_color_per_region(&topology, c).0);
    if validation.valid {
        let colors: Vec<Color> = outcome.colors.iter().map(|c| c.expect("valid implies colored")).collect();
        let m = max_same_color_per_region(&topology, &colors).0;
        same_color = Some(same_color.map_or(m, |s| s.max(m)));
    }
    if let Some(m) = same_color.filter(|&m| m > MAX_SAME_COLOR_PER_REGION) {
        failures.push(format!("{m} same-colored nodes in one broadcasting region"));
    }
    geometric.same_color_max = same_color;
    if !outcome.audit.passed() {
        failures.push(format!("probability audit: region sum {} > 1", outcome.audit.max_sum));
    }
    geometric.audit = outcome.audit.clone();
    if matches!(config.algo, Algo::Sync | Algo::Rand4Delta) {
        decay = Some(conflict_decay(&counts));
    }

    let status = if outcome.timed_out {
        "timeout"
    } else if !outcome.protocol_errors.is_empty() {
        "protocol-error"
    } else if !validation.valid {
        "invalid"
    } else if !failures.is_empty() {
        "check-failed"
    } else {
        "ok"
    };
    let mut elapsed: Vec<u64> = outcome.slots_elapsed.iter().flatten().copied().collect();
    let slots_max = elapsed.iter().copied().max().unwrap_or(0);
    let row = CsvRow {
        seed,
        algo: config.algo,
        n,
        delta,
        delta_a: topology.delta_a(),
        slots_total: outcome.slots_run,
        slots_p50: lower_median(&mut elapsed),
        slots_max,
        palette_used: validation.palette_used,
        valid: validation.valid,
        decay_ratio: decay.map(|d| d.ratio),
        audit_max: outcome.audit.max_sum,
        status: status.into(),
    };
    Ok(SeedReport {
        row,
        constants: Some(constants),
        calibration,
        validation: Some(validation),
        mis,
        geometric: Some(geometric),
        conflict_counts: counts,
        decay,
        slots_elapsed: std::mem::take(&mut outcome.slots_elapsed),
        protocol_errors: std::mem::take(&mut outcome.protocol_errors),
        failures,
        topology: Some(topology),
        trace: outcome.trace.take(),
    })
}

fn error_report(config: &ExperimentConfig, seed: u64, err: &Error) -> SeedReport {
    SeedReport {
        row: CsvRow {
            seed,
            algo: config.algo,
            n: config.n,
            delta: 0,
            delta_a: 0,
            slots_total: 0,
            slots_p50: 0,
            slots_max: 0,
            palette_used: 0,
            valid: false,
            decay_ratio: None,
            audit_max: 0.0,
            status: "error".into(),
        },
        constants: None,
        calibration: None,
        validation: None,
        mis: None,
        geometric: None,
        conflict_counts: Vec::new(),
        decay: None,
        slots_elapsed: Vec::new(),
        protocol_errors: Vec::new(),
        failures: vec![err.to_string()],
        topology: None,
        trace: None,
    }
}

/// Runs every seed of `config`, in parallel unless traces are recorded, and
/// returns the reports in seed-list order. With `config.out` set, writes
/// `results.csv` and, with tracing, `trace-<seed>.jsonl` plus
/// `topology-<seed>.txt` for each seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SeedReport>> {
    config.validate()?;
    let one = |&seed: &u64| run_seed(config, seed).unwrap_or_else(|e| error_report(config, seed, &e));
    let mut reports: Vec<SeedReport> = if config.trace {
        config.seeds.iter().map(one).collect()
    } else {
        config.seeds.par_iter().map(one).collect()
    };
    if let Some(dir) = &config.out {
        fs::create_dir_all(dir)?;
        let rows: Vec<CsvRow> = reports.iter().map(|r| r.row.clone()).collect();
        write_csv(fs::File::create(dir.join("results.csv"))?, &rows, !config.deterministic)?;
        if config.trace {
            for report in &mut reports {
                write_seed_files(dir, report)?;
            }
        }
    }
    Ok(reports)
}

fn write_seed_files(dir: &Path, report: &mut SeedReport) -> Result<()> {
    let seed = report.row.seed;
    if let Some(trace) = report.trace.take() {
        write_trace_file(&trace, dir.join(format!("trace-{seed}.jsonl")))?;
    }
    if let Some(topology) = &report.topology {
        write_topology_file(dir.join(format!("topology-{seed}.txt")), topology)?;
    }
    Ok(())
}

/// Writes the result rows. `timestamp` appends a column with the wall-clock
/// time in seconds since the Unix epoch.
pub fn write_csv<W: Write>(out: W, rows: &[CsvRow], timestamp: bool) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if timestamp {
        header.push("timestamp");
    }
    writer.write_record(&header)?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    for row in rows {
        let mut fields = row.fields();
        if timestamp {
            fields.push(now.to_string());
        }
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}
