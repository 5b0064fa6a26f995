//! Single-block updates of the proximal upper bound.
//!
//! With the other two blocks fixed the cost separates per car, so the binary
//! blocks are solved exactly as assignment problems whose edge costs include
//! the switching surcharge `mu/2 * hamming(row, previous row)`. The power
//! block runs monotone projected-gradient descent on the smooth bound.

use crate::link::{link_cost, link_cost_dpower, Allocation, CostWeights};
use crate::matching::{min_cost_assignment, min_cost_b_matching};
use crate::scenario::Scenario;

use super::projection::project_box_budget;
use super::SolverConfig;

/// Squared distance between a binary row and the unit vector `e_col`.
fn hamming_to_unit(row: &[u8], col: usize) -> f64 {
    let ones: usize = row.iter().map(|&v| v as usize).sum();
    let hit = row[col] as usize;
    // entries equal to one elsewhere, plus the target entry if it was zero
    ((ones - hit) + (1 - hit.min(1))) as f64
}

fn linked_or_panic(current: &Allocation, n: usize) -> (usize, usize) {
    current
        .link_of(n)
        .unwrap_or_else(|| panic!("car {n} must be fully associated before a block update"))
}

/// Exact minimizer of the proximal bound over car-to-RSU associations.
pub fn block_update_assoc(
    scenario: &Scenario,
    current: &Allocation,
    config: &SolverConfig,
) -> Allocation {
    let w = &config.weights;
    let costs: Vec<Vec<f64>> = (0..scenario.num_cars())
        .map(|n| {
            let r = current
                .rb_of(n)
                .unwrap_or_else(|| panic!("car {n} has no resource block"));
            let p = current.power[n];
            (0..scenario.num_rsus())
                .map(|m| {
                    link_cost(scenario, w, n, m, r, p)
                        + 0.5 * config.mu * hamming_to_unit(&current.assoc[n], m)
                })
                .collect()
        })
        .collect();
    let capacity = vec![scenario.capacity(); scenario.num_rsus()];
    let choice = min_cost_b_matching(&costs, &capacity);
    let mut next = current.clone();
    for (n, m) in choice.into_iter().enumerate() {
        next.assoc[n].iter_mut().for_each(|v| *v = 0);
        next.assoc[n][m] = 1;
    }
    next
}

/// Exact minimizer of the proximal bound over one-to-one car-to-RB matchings.
pub fn block_update_rb(
    scenario: &Scenario,
    current: &Allocation,
    config: &SolverConfig,
) -> Allocation {
    let w = &config.weights;
    let costs: Vec<Vec<f64>> = (0..scenario.num_cars())
        .map(|n| {
            let m = current
                .rsu_of(n)
                .unwrap_or_else(|| panic!("car {n} is not associated"));
            let p = current.power[n];
            (0..scenario.num_rbs())
                .map(|r| {
                    link_cost(scenario, w, n, m, r, p)
                        + 0.5 * config.mu * hamming_to_unit(&current.rb[n], r)
                })
                .collect()
        })
        .collect();
    let choice = min_cost_assignment(&costs);
    let mut next = current.clone();
    for (n, r) in choice.into_iter().enumerate() {
        next.rb[n].iter_mut().for_each(|v| *v = 0);
        next.rb[n][r] = 1;
    }
    next
}

/// Proximal power objective `C(P) + mu/2 ||P - anchor||^2` and its gradient.
struct PowerBound<'a> {
    scenario: &'a Scenario,
    config: &'a SolverConfig,
    links: Vec<(usize, usize)>,
    anchor: Vec<f64>,
}

impl PowerBound<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        let w = &self.config.weights;
        let cost: f64 = self
            .links
            .iter()
            .enumerate()
            .map(|(n, &(m, r))| link_cost(self.scenario, w, n, m, r, p[n]))
            .sum();
        let prox: f64 = p
            .iter()
            .zip(&self.anchor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        cost + 0.5 * self.config.mu * prox
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let w = &self.config.weights;
        self.links
            .iter()
            .enumerate()
            .map(|(n, &(m, r))| {
                link_cost_dpower(self.scenario, w, n, m, r, p[n])
                    + self.config.mu * (p[n] - self.anchor[n])
            })
            .collect()
    }
}

/// Monotone projected-gradient descent on the proximal power bound.
///
/// Steps are taken along the gradient normalized to unit max-norm and scaled
/// by `step * P_m`; a step is accepted only if it lowers the bound, otherwise
/// the step is halved. After an accepted step the step size doubles again,
/// capped at `pgd_step_init`.
pub fn block_update_power(
    scenario: &Scenario,
    current: &Allocation,
    config: &SolverConfig,
) -> Allocation {
    let n_cars = scenario.num_cars();
    let bound = PowerBound {
        scenario,
        config,
        links: (0..n_cars).map(|n| linked_or_panic(current, n)).collect(),
        anchor: current.power.clone(),
    };
    let p_max = scenario.car_max_power_w;
    let budget = scenario.power_budget_w;

    let mut p = current.power.clone();
    let mut value = bound.value(&p);
    let mut step = config.pgd_step_init;
    let min_step = 1e-14 * config.pgd_step_init;
    'outer: for _ in 0..config.inner_pgd_iters {
        let grad = bound.gradient(&p);
        let scale = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if !(scale.is_finite() && scale > 0.0) {
            break;
        }
        loop {
            let trial: Vec<f64> = p
                .iter()
                .zip(&grad)
                .map(|(pi, gi)| pi - step * p_max * gi / scale)
                .collect();
            let trial = project_box_budget(&trial, p_max, budget);
            let trial_value = bound.value(&trial);
            if trial_value < value {
                let gain = value - trial_value;
                p = trial;
                value = trial_value;
                step = (2.0 * step).min(config.pgd_step_init);
                if gain <= 1e-15 * value.abs() {
                    break 'outer;
                }
                break;
            }
            step *= 0.5;
            if step < min_step {
                break 'outer;
            }
        }
    }
    let mut next = current.clone();
    next.power = p;
    next
}

/// Nearest-RSU association (greedy by distance, respecting capacity), car `n`
/// on resource block `n`, and the equal power split.
pub fn initial_allocation(scenario: &Scenario) -> Allocation {
    let (n_cars, n_rsus) = (scenario.num_cars(), scenario.num_rsus());
    let mut pairs: Vec<(f64, usize, usize)> = (0..n_cars)
        .flat_map(|n| {
            (0..n_rsus).map(move |m| {
                (
                    scenario.car_positions[n].distance(&scenario.rsu_positions[m]),
                    n,
                    m,
                )
            })
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut rsu_of = vec![None; n_cars];
    let mut load = vec![0usize; n_rsus];
    for (_, n, m) in pairs {
        if rsu_of[n].is_none() && load[m] < scenario.capacity() {
            rsu_of[n] = Some(m);
            load[m] += 1;
        }
    }
    let rb_of: Vec<Option<usize>> = (0..n_cars).map(Some).collect();
    Allocation::from_indices(
        n_rsus,
        scenario.num_rbs(),
        &rsu_of,
        &rb_of,
        vec![scenario.equal_power(); n_cars],
    )
}

fn equal_power_link_costs(scenario: &Scenario, weights: &CostWeights) -> Vec<Vec<Vec<f64>>> {
    let p = scenario.equal_power();
    (0..scenario.num_cars())
        .map(|n| {
            (0..scenario.num_rsus())
                .map(|m| {
                    (0..scenario.num_rbs())
                        .map(|r| link_cost(scenario, weights, n, m, r, p))
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn from_choices(scenario: &Scenario, rsu: Vec<usize>, rb: Vec<usize>) -> Allocation {
    let rsu_of: Vec<Option<usize>> = rsu.into_iter().map(Some).collect();
    let rb_of: Vec<Option<usize>> = rb.into_iter().map(Some).collect();
    let power = vec![scenario.equal_power(); scenario.num_cars()];
    Allocation::from_indices(
        scenario.num_rsus(),
        scenario.num_rbs(),
        &rsu_of,
        &rb_of,
        power,
    )
}

/// Start chosen from equal-power link costs, RBs first: each car-RB pair is
/// priced at its cheapest RSU, RBs are matched on those prices, then RSUs
/// are matched under their capacity given the chosen RBs.
pub fn rb_first_allocation(scenario: &Scenario, weights: &CostWeights) -> Allocation {
    let c = equal_power_link_costs(scenario, weights);
    let rb_costs: Vec<Vec<f64>> = (0..scenario.num_cars())
        .map(|n| {
            (0..scenario.num_rbs())
                .map(|r| c[n].iter().map(|row| row[r]).fold(f64::INFINITY, f64::min))
                .collect()
        })
        .collect();
    let rb = min_cost_assignment(&rb_costs);
    let assoc_costs: Vec<Vec<f64>> = (0..scenario.num_cars())
        .map(|n| c[n].iter().map(|row| row[rb[n]]).collect())
        .collect();
    let rsu = min_cost_b_matching(
        &assoc_costs,
        &vec![scenario.capacity(); scenario.num_rsus()],
    );
    from_choices(scenario, rsu, rb)
}

/// The mirror of [`rb_first_allocation`]: RSUs are matched on each car's
/// cheapest RB per RSU, then RBs given the chosen RSUs.
pub fn rsu_first_allocation(scenario: &Scenario, weights: &CostWeights) -> Allocation {
    let c = equal_power_link_costs(scenario, weights);
    let assoc_costs: Vec<Vec<f64>> = c
        .iter()
        .map(|car| {
            car.iter()
                .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
                .collect()
        })
        .collect();
    let rsu = min_cost_b_matching(
        &assoc_costs,
        &vec![scenario.capacity(); scenario.num_rsus()],
    );
    let rb_costs: Vec<Vec<f64>> = (0..scenario.num_cars())
        .map(|n| c[n][rsu[n]].clone())
        .collect();
    let rb = min_cost_assignment(&rb_costs);
    from_choices(scenario, rsu, rb)
}
