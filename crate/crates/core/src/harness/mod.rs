//! Experiment harness: topology generation, validators, invariant checks and
//! the per-seed pipeline behind the CLI.

pub mod checks;
pub mod config;
pub mod decay;
pub mod experiment;
pub mod placement;
pub mod validate;

pub use self::checks::{
    active_density_bound, max_leaders_within_2rb, max_same_color_per_region, trace_checks, ActiveDensity,
    AsyncObserver, LeaderPacking, TraceCheckReport, MAX_ACTIVE_PER_REGION, MAX_LEADERS_NEAR, MAX_SAME_COLOR_PER_REGION,
};
pub use self::config::{parse_seeds, Algo, ExperimentConfig, LambdaMode};
pub use self::decay::{conflict_counts, conflict_decay, DecayFit};
pub use self::experiment::{
    default_max_slots, run_experiment, run_seed, seed_constants, seed_topology, write_csv, CsvRow, GeometricReport,
    SeedReport,
};
pub use self::placement::{generate_topology, generate_with_target_degree, Placement, PlacementSpec};
pub use self::validate::{random_greedy_coloring, validate_coloring, verify_mis, MisReport, ValidationReport};
