//! Block successive upper-bound minimization of the global cost over
//! association, resource-block assignment and transmit power.
//!
//! Each outer iteration updates the blocks in the fixed order
//! association -> resource blocks -> power. Every update minimizes the
//! objective plus a proximal term `mu/2 ||v - v_prev||^2` that touches the
//! objective at the current iterate, so the recorded cost never increases.
//! Iteration stops once `|C_k - C_{k+1}| / |C_k| <= epsilon`.

mod blocks;
pub mod projection;

use serde::{Deserialize, Serialize};

pub use blocks::{
    block_update_assoc, block_update_power, block_update_rb, initial_allocation,
    rb_first_allocation, rsu_first_allocation,
};

use crate::error::{Error, Result};
use crate::link::{check_feasibility, global_cost, Allocation, CostBreakdown, CostWeights};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Proximal penalty constant.
    pub mu: f64,
    /// Relative-change stopping tolerance.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub inner_pgd_iters: usize,
    /// Initial power step, in units of the per-car power cap.
    pub pgd_step_init: f64,
    pub weights: CostWeights,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu: 1e-4,
            epsilon: 1e-3,
            max_outer_iters: 50,
            inner_pgd_iters: 100,
            pgd_step_init: 1.0,
            weights: CostWeights::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::validation(format!("mu > 0 violated: {}", self.mu)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::validation(format!(
                "epsilon > 0 violated: {}",
                self.epsilon
            )));
        }
        if self.max_outer_iters < 1 || self.inner_pgd_iters < 1 {
            return Err(Error::validation("iteration counts must be >= 1"));
        }
        if !(self.pgd_step_init > 0.0 && self.pgd_step_init.is_finite()) {
            return Err(Error::validation(format!(
                "pgd_step_init > 0 violated: {}",
                self.pgd_step_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Assoc,
    Rb,
    Power,
}

/// Cost right after one block update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub iteration: usize,
    pub block: Block,
    pub cost: f64,
}

/// Cost at the end of an outer iteration; iteration 0 is the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub per_sum: f64,
    pub latency_sum: f64,
    pub total: f64,
}

impl IterationRecord {
    fn new(iteration: usize, cost: &CostBreakdown) -> Self {
        Self {
            iteration,
            per_sum: cost.per_sum,
            latency_sum: cost.latency_sum,
            total: cost.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<BlockRecord>,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_used: usize,
    pub allocation: Allocation,
}

impl SolverTrace {
    /// Starting cost followed by the cost after every block update.
    pub fn objective_sequence(&self) -> Vec<f64> {
        std::iter::once(self.iterations[0].total)
            .chain(self.records.iter().map(|r| r.cost))
            .collect()
    }

    /// Whether the objective sequence never rises by more than `rel_slack * |C_0|`.
    pub fn is_monotone(&self, rel_slack: f64) -> bool {
        let seq = self.objective_sequence();
        let slack = rel_slack * seq[0].abs();
        seq.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// The relative-change stopping test between consecutive outer iterations.
pub fn stopping_test(previous: f64, next: f64, epsilon: f64) -> bool {
    if previous == 0.0 || (previous.is_infinite() && next.is_infinite()) {
        return true;
    }
    if previous.is_infinite() {
        return false;
    }
    ((previous - next) / previous).abs() <= epsilon
}

/// Run the block iteration over `blocks` from `init`.
///
/// Shared by [`solve`] and the single-block baselines. An update that would
/// raise the cost (possible only through rounding) is discarded.
pub(crate) fn run_blocks(
    scenario: &Scenario,
    config: &SolverConfig,
    init: Allocation,
    blocks: &[Block],
) -> (Allocation, CostBreakdown, SolverTrace) {
    let w = &config.weights;
    let mut alloc = init;
    let mut cost = global_cost(scenario, &alloc, w);
    let mut trace = SolverTrace {
        records: Vec::new(),
        iterations: vec![IterationRecord::new(0, &cost)],
        converged: false,
        iterations_used: 0,
        allocation: alloc.clone(),
    };
    if cost.total == 0.0 {
        trace.converged = true;
        return (alloc, cost, trace);
    }
    for k in 1..=config.max_outer_iters {
        let previous = cost.total;
        for &block in blocks {
            let candidate = match block {
                Block::Assoc => block_update_assoc(scenario, &alloc, config),
                Block::Rb => block_update_rb(scenario, &alloc, config),
                Block::Power => block_update_power(scenario, &alloc, config),
            };
            let candidate_cost = global_cost(scenario, &candidate, w);
            if candidate_cost.total <= cost.total {
                alloc = candidate;
                cost = candidate_cost;
            }
            trace.records.push(BlockRecord {
                iteration: k,
                block,
                cost: cost.total,
            });
        }
        trace.iterations.push(IterationRecord::new(k, &cost));
        trace.iterations_used = k;
        if stopping_test(previous, cost.total, config.epsilon) {
            trace.converged = true;
            break;
        }
    }
    trace.allocation = alloc.clone();
    (alloc, cost, trace)
}

/// The starting points used when no start is supplied: the nearest-RSU
/// start and the two link-cost starts.
pub fn default_starts(scenario: &Scenario, weights: &CostWeights) -> [Allocation; 3] {
    [
        initial_allocation(scenario),
        rb_first_allocation(scenario, weights),
        rsu_first_allocation(scenario, weights),
    ]
}

/// Run the block iteration from each start and keep the lowest final cost
/// (the earliest start on ties).
pub(crate) fn run_best_of(
    scenario: &Scenario,
    config: &SolverConfig,
    starts: impl IntoIterator<Item = Allocation>,
    blocks: &[Block],
) -> (Allocation, CostBreakdown, SolverTrace) {
    starts
        .into_iter()
        .map(|start| run_blocks(scenario, config, start, blocks))
        .reduce(|best, next| {
            if next.1.total < best.1.total {
                next
            } else {
                best
            }
        })
        .expect("at least one start")
}

/// Minimize the global cost over all three blocks.
///
/// Starts from `init` when given (it must be feasible with every car holding
/// one RSU and one RB). Otherwise the iteration runs from each of
/// [`default_starts`] and the best result is returned, since cyclic block
/// updates can stall where only a joint RSU-and-RB move would help.
pub fn solve(
    scenario: &Scenario,
    config: &SolverConfig,
    init: Option<&Allocation>,
) -> Result<(Allocation, CostBreakdown, SolverTrace)> {
    config.validate()?;
    let blocks = [Block::Assoc, Block::Rb, Block::Power];
    match init {
        Some(a) => {
            a.check_shape(scenario)?;
            let violations = check_feasibility(scenario, a);
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(Error::contract(format!(
                    "initial allocation infeasible: {}",
                    list.join(", ")
                )));
            }
            if !a.is_fully_associated() {
                return Err(Error::contract(
                    "initial allocation must give every car one RSU and one RB",
                ));
            }
            Ok(run_blocks(scenario, config, a.clone(), &blocks))
        }
        None => Ok(run_best_of(
            scenario,
            config,
            default_starts(scenario, &config.weights),
            &blocks,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioConfig};

    #[test]
    fn stopping_rule() {
        assert!(stopping_test(0.0, 0.0, 1e-3));
        assert!(stopping_test(1.0, 0.9995, 1e-3));
        assert!(!stopping_test(1.0, 0.99, 1e-3));
        assert!(!stopping_test(f64::INFINITY, 2.0, 1e-3));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig {
            mu: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            epsilon: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            max_outer_iters: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn solve_table_scale() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap();
        let (alloc, cost, trace) = solve(&s, &SolverConfig::default(), None).unwrap();
        assert!(check_feasibility(&s, &alloc).is_empty());
        assert!(alloc.is_fully_associated());
        assert!(trace.is_monotone(1e-9));
        assert_eq!(trace.allocation, alloc);
        assert_eq!(trace.iterations.last().unwrap().total, cost.total);
        assert!(cost.total < trace.iterations[0].total);
    }

    #[test]
    fn rejects_infeasible_init() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap();
        let mut a = initial_allocation(&s);
        a.rb[1] = a.rb[0].clone();
        assert!(matches!(
            solve(&s, &SolverConfig::default(), Some(&a)),
            Err(Error::Contract(_))
        ));
        let partial = Allocation::empty(s.num_cars(), s.num_rsus(), s.num_rbs());
        assert!(matches!(
            solve(&s, &SolverConfig::default(), Some(&partial)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn no_worse_than_either_start() {
        for seed in 0..5 {
            let s = generate_scenario(&ScenarioConfig {
                seed,
                ..Default::default()
            })
            .unwrap();
            let cfg = SolverConfig::default();
            let (_, best, _) = solve(&s, &cfg, None).unwrap();
            for start in default_starts(&s, &cfg.weights) {
                let (_, c, _) = solve(&s, &cfg, Some(&start)).unwrap();
                assert!(best.total <= c.total);
            }
        }
    }

    #[test]
    fn deterministic() {
        let s = generate_scenario(&ScenarioConfig {
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        let a = solve(&s, &SolverConfig::default(), None).unwrap();
        let b = solve(&s, &SolverConfig::default(), None).unwrap();
        assert_eq!(a, b);
    }
}
