//! Closed-form per-link quantities (SINR, rate, packet error rate, latency),
//! the weighted global cost of an allocation and constraint checking.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Relative slack allowed on the power constraints when checking feasibility.
pub const POWER_TOLERANCE: f64 = 1e-9;

/// Decision variables: car-RSU association, car-RB assignment, per-car power.
///
/// `assoc[n][m]` and `rb[n][r]` are 0/1 entries; `power[n]` is in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub assoc: Vec<Vec<u8>>,
    pub rb: Vec<Vec<u8>>,
    pub power: Vec<f64>,
}

impl Allocation {
    /// All-zero allocation: nobody associated, no RBs, zero power.
    pub fn empty(num_cars: usize, num_rsus: usize, num_rbs: usize) -> Self {
        Self {
            assoc: vec![vec![0; num_rsus]; num_cars],
            rb: vec![vec![0; num_rbs]; num_cars],
            power: vec![0.0; num_cars],
        }
    }

    /// Build from per-car RSU and RB indices.
    pub fn from_indices(
        num_rsus: usize,
        num_rbs: usize,
        rsu_of: &[Option<usize>],
        rb_of: &[Option<usize>],
        power: Vec<f64>,
    ) -> Self {
        let mut alloc = Self::empty(rsu_of.len(), num_rsus, num_rbs);
        for (n, m) in rsu_of.iter().enumerate() {
            if let Some(m) = m {
                alloc.assoc[n][*m] = 1;
            }
        }
        for (n, r) in rb_of.iter().enumerate() {
            if let Some(r) = r {
                alloc.rb[n][*r] = 1;
            }
        }
        alloc.power = power;
        alloc
    }

    pub fn num_cars(&self) -> usize {
        self.power.len()
    }

    /// First RSU car `n` is associated with.
    pub fn rsu_of(&self, n: usize) -> Option<usize> {
        self.assoc[n].iter().position(|&v| v != 0)
    }

    /// First resource block assigned to car `n`.
    pub fn rb_of(&self, n: usize) -> Option<usize> {
        self.rb[n].iter().position(|&v| v != 0)
    }

    /// The `(rsu, rb)` pair car `n` transmits on, if it has both.
    pub fn link_of(&self, n: usize) -> Option<(usize, usize)> {
        Some((self.rsu_of(n)?, self.rb_of(n)?))
    }

    /// True when every car has exactly one RSU and exactly one RB.
    pub fn is_fully_associated(&self) -> bool {
        self.assoc
            .iter()
            .chain(&self.rb)
            .all(|row| row.iter().map(|&v| v as usize).sum::<usize>() == 1)
    }

    /// Checks that matrix and vector dimensions match the scenario.
    pub fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        let (n, m, r) = (scenario.num_cars(), scenario.num_rsus(), scenario.num_rbs());
        let ok = self.power.len() == n
            && self.assoc.len() == n
            && self.rb.len() == n
            && self.assoc.iter().all(|row| row.len() == m)
            && self.rb.iter().all(|row| row.len() == r);
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "allocation shape does not match scenario (N={n}, M={m}, R={r})"
            )))
        }
    }
}

/// Weights of the packet-error and latency terms; `alpha + beta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct CostWeights {
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawWeights> for CostWeights {
    type Error = Error;
    fn try_from(raw: RawWeights) -> Result<Self> {
        CostWeights::new(raw.alpha, raw.beta)
    }
}

impl From<CostWeights> for RawWeights {
    fn from(w: CostWeights) -> Self {
        RawWeights {
            alpha: w.alpha,
            beta: w.beta,
        }
    }
}

impl CostWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(alpha) || !unit(beta) || (alpha + beta - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "cost weights need alpha, beta in [0,1] with alpha + beta = 1, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// `(alpha, 1 - alpha)`.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0 - alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub per_car_per: Vec<f64>,
    /// Seconds; `f64::INFINITY` marks an associated car with zero rate.
    pub per_car_latency: Vec<f64>,
    pub per_sum: f64,
    pub latency_sum: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn has_infinite_latency(&self) -> bool {
        self.per_car_latency.iter().any(|t| t.is_infinite())
    }
}

/// `log2(1 + x)`, accurate for the tiny SINRs of badly placed links.
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Packet error probability of a transmission with received signal power
/// `signal_w` against `interference_noise_w`.
pub fn per_of(waterfall: f64, interference_noise_w: f64, signal_w: f64) -> f64 {
    if signal_w <= 0.0 {
        return 1.0;
    }
    -(-waterfall * interference_noise_w / signal_w).exp_m1()
}

/// Upload time of `bits` at SINR `gamma` over `bandwidth_hz`.
pub fn latency_of(bits: f64, bandwidth_hz: f64, gamma: f64) -> f64 {
    let eta = bandwidth_hz * log2_1p(gamma);
    if eta > 0.0 {
        bits / eta
    } else {
        f64::INFINITY
    }
}

/// SINR of car `n` received at RSU `m` on resource block `r`.
pub fn sinr(scenario: &Scenario, alloc: &Allocation, n: usize, m: usize, r: usize) -> Result<f64> {
    alloc.check_shape(scenario)?;
    if alloc.assoc[n][m] != 1 || alloc.rb[n][r] != 1 {
        return Err(Error::contract(format!(
            "sinr requires car {n} associated with RSU {m} on RB {r}"
        )));
    }
    Ok(link_sinr(scenario, n, m, r, alloc.power[n]))
}

/// Achievable rate in bit/s at SINR `gamma` over one resource block.
pub fn rate(scenario: &Scenario, gamma: f64) -> f64 {
    scenario.config.rb_bandwidth_hz * log2_1p(gamma)
}

/// Packet error rate of car `n`; zero when it has no RSU or no RB.
pub fn per(scenario: &Scenario, alloc: &Allocation, n: usize) -> f64 {
    match alloc.link_of(n) {
        Some((m, r)) => link_per(scenario, n, m, r, alloc.power[n]),
        None => 0.0,
    }
}

/// Upload latency of car `n` in seconds; zero when unassociated.
pub fn latency(scenario: &Scenario, alloc: &Allocation, n: usize) -> f64 {
    match alloc.link_of(n) {
        Some((m, r)) => link_latency(scenario, n, m, r, alloc.power[n]),
        None => 0.0,
    }
}

pub fn global_cost(
    scenario: &Scenario,
    alloc: &Allocation,
    weights: &CostWeights,
) -> CostBreakdown {
    let n = alloc.num_cars();
    let per_car_per: Vec<f64> = (0..n).map(|i| per(scenario, alloc, i)).collect();
    let per_car_latency: Vec<f64> = (0..n).map(|i| latency(scenario, alloc, i)).collect();
    let per_sum: f64 = per_car_per.iter().sum();
    let latency_sum: f64 = per_car_latency.iter().sum();
    CostBreakdown {
        total: weighted_total(weights, per_sum, latency_sum),
        per_car_per,
        per_car_latency,
        per_sum,
        latency_sum,
    }
}

fn weighted_total(w: &CostWeights, per_sum: f64, latency_sum: f64) -> f64 {
    // 0 * inf would be NaN when latency is switched off
    let lat = if w.beta == 0.0 {
        0.0
    } else {
        w.beta * latency_sum
    };
    w.alpha * per_sum + lat
}

pub fn link_sinr(scenario: &Scenario, n: usize, m: usize, r: usize, power: f64) -> f64 {
    power * scenario.gain_car_rsu[n][m] / scenario.interference_plus_noise(m, r)
}

pub fn link_per(scenario: &Scenario, n: usize, m: usize, r: usize, power: f64) -> f64 {
    per_of(
        scenario.config.waterfall_threshold,
        scenario.interference_plus_noise(m, r),
        power * scenario.gain_car_rsu[n][m],
    )
}

pub fn link_latency(scenario: &Scenario, n: usize, m: usize, r: usize, power: f64) -> f64 {
    latency_of(
        scenario.config.model_size_bits,
        scenario.config.rb_bandwidth_hz,
        link_sinr(scenario, n, m, r, power),
    )
}

/// Weighted cost contribution of car `n` if it transmitted on `(m, r)` with `power`.
pub fn link_cost(
    scenario: &Scenario,
    weights: &CostWeights,
    n: usize,
    m: usize,
    r: usize,
    power: f64,
) -> f64 {
    let per = link_per(scenario, n, m, r, power);
    let lat = link_latency(scenario, n, m, r, power);
    weighted_total(weights, per, lat)
}

/// Analytic derivative of [`link_cost`] with respect to `power`.
pub fn link_cost_dpower(
    scenario: &Scenario,
    weights: &CostWeights,
    n: usize,
    m: usize,
    r: usize,
    power: f64,
) -> f64 {
    if power <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let cfg = &scenario.config;
    let inr = scenario.interference_plus_noise(m, r);
    let h = scenario.gain_car_rsu[n][m];
    // q = 1 - exp(-c/p)  =>  dq/dp = -(c/p^2) exp(-c/p)
    let c = cfg.waterfall_threshold * inr / h;
    let dper = -(c / (power * power)) * (-c / power).exp();
    // T = Q ln2 / (W ln(1 + s p))  =>  dT/dp = -Q ln2 s / (W (1 + s p) ln(1 + s p)^2)
    let s = h / inr;
    let ln = (s * power).ln_1p();
    let dlat = -cfg.model_size_bits * std::f64::consts::LN_2 * s
        / (cfg.rb_bandwidth_hz * (1.0 + s * power) * ln * ln);
    weights.alpha * dper
        + if weights.beta == 0.0 {
            0.0
        } else {
            weights.beta * dlat
        }
}

/// Gradient of the global cost with respect to every car's power, holding
/// association and RB assignment fixed. Unlinked cars get a zero entry.
pub fn power_gradient(scenario: &Scenario, alloc: &Allocation, weights: &CostWeights) -> Vec<f64> {
    (0..alloc.num_cars())
        .map(|n| match alloc.link_of(n) {
            Some((m, r)) => link_cost_dpower(scenario, weights, n, m, r, alloc.power[n]),
            None => 0.0,
        })
        .collect()
}

/// The constraints of the joint allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// `0 <= p_n <= P_m` for each car.
    PowerRange,
    /// `sum p_n <= P_max`.
    PowerBudget,
    /// At most one car per resource block.
    RbExclusive,
    /// At most one RSU per car.
    SingleRsu,
    /// At most one resource block per car.
    SingleRb,
    /// At most `R` resource blocks assigned in total.
    RbTotal,
    /// At most `capacity` cars per RSU.
    RsuCapacity,
    AssocBinary,
    RbBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    /// Offending car, RSU or RB index; `None` for network-wide constraints.
    pub index: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{:?}[{i}]", self.constraint),
            None => write!(f, "{:?}", self.constraint),
        }
    }
}

/// Lists every violated constraint; empty iff the allocation is feasible.
pub fn check_feasibility(scenario: &Scenario, alloc: &Allocation) -> Vec<Violation> {
    use ConstraintKind::*;
    let mut out = Vec::new();
    if alloc.check_shape(scenario).is_err() {
        // treat a malformed allocation as violating binary structure everywhere
        out.push(Violation {
            constraint: AssocBinary,
            index: None,
        });
        return out;
    }
    let push =
        |out: &mut Vec<Violation>, constraint, index| out.push(Violation { constraint, index });
    let p_max = scenario.car_max_power_w;
    for (n, &p) in alloc.power.iter().enumerate() {
        if !(p >= 0.0 && p <= p_max * (1.0 + POWER_TOLERANCE)) {
            push(&mut out, PowerRange, Some(n));
        }
    }
    let budget = scenario.power_budget_w;
    let total: f64 = alloc.power.iter().sum();
    if total.is_nan() || total > budget * (1.0 + POWER_TOLERANCE) {
        push(&mut out, PowerBudget, None);
    }
    for r in 0..scenario.num_rbs() {
        let col: usize = alloc.rb.iter().map(|row| row[r] as usize).sum();
        if col > 1 {
            push(&mut out, RbExclusive, Some(r));
        }
    }
    for (n, row) in alloc.assoc.iter().enumerate() {
        if row.iter().map(|&v| v as usize).sum::<usize>() > 1 {
            push(&mut out, SingleRsu, Some(n));
        }
    }
    for (n, row) in alloc.rb.iter().enumerate() {
        if row.iter().map(|&v| v as usize).sum::<usize>() > 1 {
            push(&mut out, SingleRb, Some(n));
        }
    }
    let rb_total: usize = alloc.rb.iter().flatten().map(|&v| v as usize).sum();
    if rb_total > scenario.num_rbs() {
        push(&mut out, RbTotal, None);
    }
    for m in 0..scenario.num_rsus() {
        let col: usize = alloc.assoc.iter().map(|row| row[m] as usize).sum();
        if col > scenario.capacity() {
            push(&mut out, RsuCapacity, Some(m));
        }
    }
    for (n, row) in alloc.assoc.iter().enumerate() {
        if row.iter().any(|&v| v > 1) {
            push(&mut out, AssocBinary, Some(n));
        }
    }
    for (n, row) in alloc.rb.iter().enumerate() {
        if row.iter().any(|&v| v > 1) {
            push(&mut out, RbBinary, Some(n));
        }
    }
    out
}
