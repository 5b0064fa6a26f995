//! Comparison schemes: each optimizes a single block and randomizes the rest.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::link::{Allocation, CostBreakdown};
use crate::scenario::Scenario;
use crate::solver::{default_starts, run_best_of, run_blocks, Block, SolverConfig, SolverTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Optimized association; random RBs and random power.
    BaselineA,
    /// Optimized power; random association and random RBs.
    BaselineP,
    /// Optimized RBs; random association and random power.
    BaselineR,
    /// Optimized association and RBs with power frozen at the equal split,
    /// from the same starting points as the full solver.
    EqualPower,
    /// Everything random.
    Random,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::BaselineA,
        BaselineKind::BaselineP,
        BaselineKind::BaselineR,
        BaselineKind::EqualPower,
        BaselineKind::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::BaselineA => "baseline_a",
            BaselineKind::BaselineP => "baseline_p",
            BaselineKind::BaselineR => "baseline_r",
            BaselineKind::EqualPower => "equal_power",
            BaselineKind::Random => "random",
        }
    }

    fn blocks(&self) -> &'static [Block] {
        match self {
            BaselineKind::BaselineA => &[Block::Assoc],
            BaselineKind::BaselineP => &[Block::Power],
            BaselineKind::BaselineR => &[Block::Rb],
            BaselineKind::EqualPower => &[Block::Assoc, Block::Rb],
            BaselineKind::Random => &[],
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown baseline '{s}'"))
    }
}

/// Random perfect car-to-RB matching, random capacity-respecting association
/// and powers uniform on `(0, P_m]`, scaled down to the budget if needed.
pub fn random_feasible_allocation(scenario: &Scenario, seed: u64) -> Allocation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep these draws apart from the scenario's own stream for the same seed
    rng.set_stream(1);
    let n = scenario.num_cars();

    let mut rbs: Vec<usize> = (0..scenario.num_rbs()).collect();
    rbs.shuffle(&mut rng);
    let rb_of: Vec<Option<usize>> = rbs[..n].iter().map(|&r| Some(r)).collect();

    let mut slots: Vec<usize> = (0..scenario.num_rsus())
        .flat_map(|m| std::iter::repeat_n(m, scenario.capacity()))
        .collect();
    slots.shuffle(&mut rng);
    let rsu_of: Vec<Option<usize>> = slots[..n].iter().map(|&m| Some(m)).collect();

    let p_max = scenario.car_max_power_w;
    let mut power: Vec<f64> = (0..n)
        .map(|_| p_max * (1.0 - rng.random::<f64>()))
        .collect();
    let total: f64 = power.iter().sum();
    if total > scenario.power_budget_w {
        let scale = scenario.power_budget_w / total;
        power.iter_mut().for_each(|p| *p *= scale);
    }
    Allocation::from_indices(
        scenario.num_rsus(),
        scenario.num_rbs(),
        &rsu_of,
        &rb_of,
        power,
    )
}

/// Run one comparison scheme. The random blocks are drawn from `seed`; the
/// optimized blocks iterate with the same tolerance and iteration cap as the
/// full solver.
pub fn run_baseline(
    scenario: &Scenario,
    kind: BaselineKind,
    config: &SolverConfig,
    seed: u64,
) -> (Allocation, CostBreakdown, SolverTrace) {
    match kind {
        BaselineKind::EqualPower => run_best_of(
            scenario,
            config,
            default_starts(scenario, &config.weights),
            kind.blocks(),
        ),
        _ => run_blocks(
            scenario,
            config,
            random_feasible_allocation(scenario, seed),
            kind.blocks(),
        ),
    }
}
