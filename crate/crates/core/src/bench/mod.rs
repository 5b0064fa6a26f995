//! Seeded experiment sweeps: run every (sweep point, scheme, seed) cell,
//! collect per-run rows plus across-seed mean rows, and write them out.

pub mod plot;
pub mod table;

use std::cmp::Ordering;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineKind};
use crate::dfl::{run_dfl, FLConfig};
use crate::error::{Error, Result};
use crate::link::CostWeights;
use crate::scenario::{generate_scenario, ScenarioConfig};
use crate::solver::{solve, IterationRecord, SolverConfig, SolverTrace};

pub use plot::{emit_plot, render_svg, PlotKind};
pub use table::{emit_csv, RawTable, ResultRow, ResultTable, SeedCell, CSV_HEADER};

/// Environment variable that replaces the spec's base seed.
pub const SEED_ENV: &str = "DFLBENCH_SEED";

pub const RESULTS_FILE: &str = "results.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const DFL_LOSS_FILE: &str = "dfl_loss.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Proposed,
    Baseline(BaselineKind),
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Baseline(k) => k.name(),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "proposed" {
            return Ok(Scheme::Proposed);
        }
        s.parse::<BaselineKind>()
            .map(Scheme::Baseline)
            .map_err(|_| format!("unknown scheme '{s}'"))
    }
}

impl TryFrom<String> for Scheme {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Mu,
    /// Values are alpha; beta is `1 - alpha`.
    AlphaBeta,
    NumCars,
    NumRsus,
    #[default]
    None,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Mu => "mu",
            SweepAxis::AlphaBeta => "alpha_beta",
            SweepAxis::NumCars => "num_cars",
            SweepAxis::NumRsus => "num_rsus",
            SweepAxis::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Proposed]
}

fn default_num_seeds() -> usize {
    30
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Its `seed` is the base seed; run `i` uses `seed + i`.
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    /// Emit one row per outer iteration instead of one per run.
    #[serde(default)]
    pub per_iteration: bool,
    /// When present, each run also trains a DFL model under its PERs.
    #[serde(default)]
    pub fl: Option<FLConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            solver: SolverConfig::default(),
            schemes: default_schemes(),
            sweep: Sweep::default(),
            num_seeds: default_num_seeds(),
            per_iteration: false,
            fl: None,
            output_dir: default_output_dir(),
        }
    }
}

/// One sweep point with the configs it resolves to.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: Option<f64>,
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::validation(format!(
            "{} sweep value must be a positive integer, got {v}",
            axis.name()
        )))
    }
}

impl ExperimentSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Apply [`SEED_ENV`] if it is set.
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.scenario.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::validation(format!("{SEED_ENV} is not a u64: '{v}'")))?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.num_seeds as u64).map(|i| self.scenario.seed.wrapping_add(i))
    }

    /// Sweep points in ascending value order (a single `None` point when
    /// nothing is swept). Each point's configs are validated.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let axis = self.sweep.axis;
        if axis == SweepAxis::None {
            if !self.sweep.values.is_empty() {
                return Err(Error::validation("sweep values given without a sweep axis"));
            }
            self.scenario.validate()?;
            self.solver.validate()?;
            return Ok(vec![SweepPoint {
                value: None,
                scenario: self.scenario.clone(),
                solver: self.solver.clone(),
            }]);
        }
        if self.sweep.values.is_empty() {
            return Err(Error::validation(format!(
                "sweep over {} has no values",
                axis.name()
            )));
        }
        let mut values = self.sweep.values.clone();
        values.sort_by(f64::total_cmp);
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("duplicate sweep values"));
        }
        values
            .into_iter()
            .map(|v| {
                if !v.is_finite() {
                    return Err(Error::validation(format!("non-finite sweep value {v}")));
                }
                let mut scenario = self.scenario.clone();
                let mut solver = self.solver.clone();
                match axis {
                    SweepAxis::Mu => solver.mu = v,
                    SweepAxis::AlphaBeta => solver.weights = CostWeights::from_alpha(v)?,
                    SweepAxis::NumCars => scenario.num_cars = as_count(axis, v)?,
                    SweepAxis::NumRsus => scenario.num_rsus = as_count(axis, v)?,
                    SweepAxis::None => unreachable!(),
                }
                scenario.validate()?;
                solver.validate()?;
                Ok(SweepPoint {
                    value: Some(v),
                    scenario,
                    solver,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_seeds < 1 {
            return Err(Error::validation("num_seeds >= 1 violated"));
        }
        if self.schemes.is_empty() {
            return Err(Error::validation("scheme list is empty"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::validation(format!("scheme {s} listed twice")));
            }
        }
        if let Some(fl) = &self.fl {
            fl.validate()?;
        }
        self.points().map(|_| ())
    }
}

/// A run that failed; the fixed results header has no room for it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub sweep_value: Option<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub sweep_value: Option<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    pub round: usize,
    pub global_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub sweep_param: String,
    pub table: ResultTable,
    pub failures: Vec<RunFailure>,
    pub dfl_loss: Vec<LossRow>,
}

struct RunOutcome {
    trace: Option<SolverTrace>,
    loss_curve: Option<Vec<f64>>,
    failures: Vec<RunFailure>,
}

fn run_one(spec: &ExperimentSpec, point: &SweepPoint, scheme: Scheme, seed: u64) -> RunOutcome {
    let fail = |stage, e: Error| RunFailure {
        sweep_value: point.value,
        scheme,
        seed,
        stage,
        message: e.to_string(),
    };
    let scenario = match generate_scenario(&ScenarioConfig {
        seed,
        ..point.scenario.clone()
    }) {
        Ok(s) => s,
        Err(e) => {
            return RunOutcome {
                trace: None,
                loss_curve: None,
                failures: vec![fail("scenario", e)],
            }
        }
    };
    let result = match scheme {
        Scheme::Proposed => solve(&scenario, &point.solver, None),
        Scheme::Baseline(kind) => Ok(run_baseline(&scenario, kind, &point.solver, seed)),
    };
    let (alloc, _, trace) = match result {
        Ok(r) => r,
        Err(e) => {
            return RunOutcome {
                trace: None,
                loss_curve: None,
                failures: vec![fail("solve", e)],
            }
        }
    };
    let mut failures = Vec::new();
    let loss_curve = spec.fl.as_ref().and_then(|fl| {
        let cfg = FLConfig {
            seed: fl.seed.wrapping_add(seed),
            ..fl.clone()
        };
        match run_dfl(&scenario, &alloc, &cfg) {
            Ok(run) => Some(run.loss_curve),
            Err(e) => {
                failures.push(fail("dfl", e));
                None
            }
        }
    });
    RunOutcome {
        trace: Some(trace),
        loss_curve,
        failures,
    }
}

fn cmp_value(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => a.is_some().cmp(&b.is_some()),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Iteration record `it`, holding the final value once a run has stopped.
fn record_at(trace: &SolverTrace, it: usize) -> &IterationRecord {
    &trace.iterations[it.min(trace.iterations.len() - 1)]
}

/// Run every cell of the experiment on the current rayon pool.
///
/// Rows are ordered by sweep value, scheme name, seed and iteration; each
/// (sweep value, scheme) group ends with its mean rows. Failed runs are
/// reported in [`ExperimentOutput::failures`] and the rest still run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let points = spec.points()?;
    let mut schemes = spec.schemes.clone();
    schemes.sort_by_key(|s| s.name());
    let seeds: Vec<u64> = spec.seeds().collect();

    let mut cells: Vec<(usize, Scheme, u64)> = Vec::new();
    for p in 0..points.len() {
        for &scheme in &schemes {
            cells.extend(seeds.iter().map(|&seed| (p, scheme, seed)));
        }
    }
    let outcomes: Vec<RunOutcome> = cells
        .par_iter()
        .map(|&(p, scheme, seed)| run_one(spec, &points[p], scheme, seed))
        .collect();

    let sweep_param = spec.sweep.axis.name().to_string();
    let mut out = ExperimentOutput {
        sweep_param: sweep_param.clone(),
        table: ResultTable::default(),
        failures: Vec::new(),
        dfl_loss: Vec::new(),
    };
    let group_len = seeds.len();
    for (group, chunk) in cells.chunks(group_len).zip(outcomes.chunks(group_len)) {
        let (p, scheme, _) = group[0];
        let value = points[p].value;
        let row = |seed, it: usize, rec: &IterationRecord, converged, iters_used| ResultRow {
            sweep_param: sweep_param.clone(),
            sweep_value: value,
            scheme: scheme.name().to_string(),
            seed,
            iteration: it,
            per_sum: rec.per_sum,
            latency_sum: rec.latency_sum,
            c_global: rec.total,
            converged,
            iters_used,
        };
        let mut traces = Vec::new();
        for (&(_, _, seed), outcome) in group.iter().zip(chunk) {
            out.failures.extend(outcome.failures.iter().cloned());
            if let Some(curve) = &outcome.loss_curve {
                out.dfl_loss
                    .extend(
                        curve
                            .iter()
                            .enumerate()
                            .map(|(round, &global_loss)| LossRow {
                                sweep_value: value,
                                scheme,
                                seed,
                                round,
                                global_loss,
                            }),
                    );
            }
            let Some(trace) = &outcome.trace else {
                continue;
            };
            let used = trace.iterations_used;
            let its = if spec.per_iteration {
                0..=used
            } else {
                used..=used
            };
            for it in its {
                out.table.rows.push(row(
                    SeedCell::Seed(seed),
                    it,
                    record_at(trace, it),
                    trace.converged,
                    used,
                ));
            }
            traces.push(trace);
        }
        if traces.is_empty() {
            continue;
        }
        let max_used = traces.iter().map(|t| t.iterations_used).max().unwrap_or(0);
        let all_converged = traces.iter().all(|t| t.converged);
        let its = if spec.per_iteration {
            0..=max_used
        } else {
            max_used..=max_used
        };
        for it in its {
            let rec = IterationRecord {
                iteration: it,
                per_sum: mean(traces.iter().map(|t| record_at(t, it).per_sum)),
                latency_sum: mean(traces.iter().map(|t| record_at(t, it).latency_sum)),
                total: mean(traces.iter().map(|t| record_at(t, it).total)),
            };
            out.table
                .rows
                .push(row(SeedCell::Mean, it, &rec, all_converged, max_used));
        }
    }
    // the iteration-major mean rows follow the per-seed rows of their group
    let key = |r: &ResultRow| (r.seed == SeedCell::Mean, r.seed, r.iteration);
    out.table.rows.sort_by(|a, b| {
        cmp_value(a.sweep_value, b.sweep_value)
            .then_with(|| a.scheme.cmp(&b.scheme))
            .then_with(|| key(a).cmp(&key(b)))
    });
    Ok(out)
}

fn value_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file));
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl ExperimentOutput {
    /// Write `results.csv`, plus `errors.csv` and `dfl_loss.csv` when there
    /// is anything to put in them. Returns the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        if !self.table.rows.is_empty() {
            let path = dir.join(RESULTS_FILE);
            emit_csv(&self.table, &path)?;
            written.push(path);
        }
        if !self.failures.is_empty() {
            let path = dir.join(ERRORS_FILE);
            write_csv(
                &path,
                &[
                    "sweep_param",
                    "sweep_value",
                    "scheme",
                    "seed",
                    "stage",
                    "error",
                ],
                self.failures.iter().map(|f| {
                    [
                        self.sweep_param.clone(),
                        value_cell(f.sweep_value),
                        f.scheme.to_string(),
                        f.seed.to_string(),
                        f.stage.to_string(),
                        f.message.clone(),
                    ]
                }),
            )?;
            written.push(path);
        }
        if !self.dfl_loss.is_empty() {
            let path = dir.join(DFL_LOSS_FILE);
            write_csv(
                &path,
                &[
                    "sweep_param",
                    "sweep_value",
                    "scheme",
                    "seed",
                    "round",
                    "global_loss",
                ],
                self.dfl_loss.iter().map(|l| {
                    [
                        self.sweep_param.clone(),
                        value_cell(l.sweep_value),
                        l.scheme.to_string(),
                        l.seed.to_string(),
                        l.round.to_string(),
                        table::format_float(l.global_loss),
                    ]
                }),
            )?;
            written.push(path);
        }
        Ok(written)
    }
}
