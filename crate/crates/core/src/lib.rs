//! Dispersed federated learning over vehicular networks.
//!
//! The crate covers the full pipeline: seeded network [`scenario`]s, closed-form
//! per-link quantities and the weighted packet-error/latency cost in [`link`],
//! a block successive upper-bound minimization [`solver`] for the joint
//! association / resource-block / power problem, comparison [`baselines`], a
//! desk-scale two-tier federated training loop in [`dfl`], and the experiment
//! harness in [`bench`] that backs the `dflbench` binary.

pub mod baselines;
pub mod bench;
pub mod dfl;
mod error;
pub mod link;
pub mod matching;
pub mod scenario;
pub mod solver;

pub use baselines::{random_feasible_allocation, run_baseline, BaselineKind};
pub use bench::{
    emit_csv, emit_plot, run_experiment, ExperimentSpec, PlotKind, ResultTable, Scheme,
};
pub use error::{Error, Result};
pub use link::{
    check_feasibility, global_cost, latency, per, rate, sinr, Allocation, ConstraintKind,
    CostBreakdown, CostWeights, Violation,
};
pub use scenario::{gain_model, generate_scenario, Point, Scenario, ScenarioConfig};
pub use solver::{initial_allocation, solve, Block, SolverConfig, SolverTrace};
