//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so every line is shown.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use dfl_core::baselines::random_feasible_allocation;
use dfl_core::bench::{run_experiment, ExperimentOutput, ExperimentSpec, Scheme, Sweep, SweepAxis};
use dfl_core::dfl::{
    generate_datasets, run_dfl_with_per, weighted_aggregate, FLConfig, ModelWeights,
};
use dfl_core::link::power_gradient;
use dfl_core::{
    generate_scenario, global_cost, latency, per, rate, sinr, solve, Allocation, BaselineKind,
    CostWeights, Point, Scenario, ScenarioConfig, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn table_scale(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        num_cars: 30,
        num_rsus: 6,
        num_rbs: Some(30),
        seed,
        ..Default::default()
    }
}

fn spec(schemes: Vec<Scheme>) -> ExperimentSpec {
    ExperimentSpec {
        scenario: table_scale(1),
        schemes,
        num_seeds: 30,
        ..Default::default()
    }
}

/// Mean final cost of `scheme` at sweep value `value`.
fn mean_cost(out: &ExperimentOutput, scheme: &str, value: Option<f64>) -> f64 {
    out.table
        .mean_rows()
        .find(|r| r.scheme == scheme && r.sweep_value == value)
        .unwrap_or_else(|| panic!("no mean row for {scheme} at {value:?}"))
        .c_global
}

// --- 1 -------------------------------------------------------------------

fn random_case(rng: &mut ChaCha8Rng) -> (Scenario, Allocation, CostWeights) {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=3);
    let r = n + rng.random_range(0..=2);
    let config = ScenarioConfig {
        num_cars: n,
        num_rsus: m,
        num_rbs: Some(r),
        num_cellular: Some(r),
        rb_bandwidth_hz: rng.random_range(1e4..1e6),
        noise_psd_dbm_hz: rng.random_range(-180.0..-160.0),
        car_max_power_dbm: rng.random_range(10.0..30.0),
        total_power_budget_dbm: 45.0,
        cellular_power_dbm: rng.random_range(0.0..30.0),
        waterfall_threshold: rng.random_range(0.1..5.0),
        model_size_bits: rng.random_range(1e3..1e6),
        rsu_capacity: Some(n),
        ..Default::default()
    };
    let pts = |k: usize, rng: &mut ChaCha8Rng| -> Vec<Point> {
        (0..k)
            .map(|_| Point {
                x: rng.random_range(0.0..1000.0),
                y: rng.random_range(0.0..1000.0),
            })
            .collect()
    };
    let gains = |rows: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| {
                (0..m)
                    .map(|_| 10f64.powf(rng.random_range(-14.0..-6.0)))
                    .collect()
            })
            .collect()
    };
    let (cars, rsus, cells) = (pts(n, rng), pts(m, rng), pts(r, rng));
    let (gc, gy) = (gains(n, rng), gains(r, rng));
    let s = Scenario::from_parts(config, cars, rsus, cells, gc, gy).unwrap();
    let mut rbs: Vec<usize> = (0..r).collect();
    for i in (1..r).rev() {
        rbs.swap(i, rng.random_range(0..=i));
    }
    let rsu_of: Vec<Option<usize>> = (0..n).map(|_| Some(rng.random_range(0..m))).collect();
    let rb_of: Vec<Option<usize>> = rbs[..n].iter().map(|&x| Some(x)).collect();
    let pmax = watts(s.config.car_max_power_dbm);
    let power = (0..n).map(|_| pmax * rng.random_range(0.01..1.0)).collect();
    let a = Allocation::from_indices(m, r, &rsu_of, &rb_of, power);
    let w = CostWeights::from_alpha(rng.random_range(0.0..=1.0)).unwrap();
    (s, a, w)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (s, a, w) = random_case(&mut rng);
        let c = &s.config;
        let noise = watts(c.noise_psd_dbm_hz) * c.rb_bandwidth_hz;
        let py = watts(c.cellular_power_dbm);
        let (mut per_sum, mut lat_sum) = (0.0, 0.0);
        for n in 0..s.num_cars() {
            let m = a.assoc[n].iter().position(|&v| v == 1).unwrap();
            let r = a.rb[n].iter().position(|&v| v == 1).unwrap();
            let p = a.power[n];
            let h = s.gain_car_rsu[n][m];
            // cellular user r owns resource block r
            let inr = s.gain_cell_rsu[r][m] * py + noise;
            let gamma = p * h / inr;
            let eta = c.rb_bandwidth_hz * gamma.ln_1p() / std::f64::consts::LN_2;
            // ln_1p and expm1 keep full precision for tiny SINRs and exponents
            let q = -(-c.waterfall_threshold * inr / (p * h)).exp_m1();
            let t = c.model_size_bits / eta;
            per_sum += q;
            lat_sum += t;
            let got = sinr(&s, &a, n, m, r).unwrap();
            worst = worst
                .max(rel_err(got, gamma))
                .max(rel_err(rate(&s, got), eta))
                .max(rel_err(per(&s, &a, n), q))
                .max(rel_err(latency(&s, &a, n), t));
        }
        let total = w.alpha() * per_sum + w.beta() * lat_sum;
        worst = worst.max(rel_err(global_cost(&s, &a, &w).total, total));
    }
    let secs = start.elapsed();
    outcome(
        worst <= 1e-12 && secs < Duration::from_secs(1),
        format!(
            "max rel err {worst:.2e} over 1000 cases in {:.3}s",
            secs.as_secs_f64()
        ),
    )
}

// --- 2, 3 ----------------------------------------------------------------

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for seed in 1..=30 {
        let s = generate_scenario(&table_scale(seed)).unwrap();
        let (_, _, trace) = solve(&s, &SolverConfig::default(), None).unwrap();
        if !trace.is_monotone(1e-9) {
            bad.push(seed);
        }
    }
    let secs = start.elapsed();
    outcome(
        bad.is_empty() && secs < Duration::from_secs(120),
        format!("non-monotone seeds {bad:?}, {:.2}s", secs.as_secs_f64()),
    )
}

fn criterion_3() -> Outcome {
    let cfg = SolverConfig {
        epsilon: 1e-3,
        mu: 1e-4,
        ..Default::default()
    };
    let mut fast = 0;
    let mut iters = Vec::new();
    for seed in 1..=30 {
        let s = generate_scenario(&table_scale(seed)).unwrap();
        let (_, _, trace) = solve(&s, &cfg, None).unwrap();
        if trace.converged && trace.iterations_used <= 10 {
            fast += 1;
        }
        iters.push(trace.iterations_used);
    }
    let mean = iters.iter().sum::<usize>() as f64 / 30.0;
    outcome(
        fast >= 27,
        format!("{fast}/30 stopped within 10 iterations (mean {mean:.1})"),
    )
}

// --- 4 -------------------------------------------------------------------

/// Minimum cost over every feasible association, RB assignment and power
/// level `P_m * k / 8`, k = 1..=8.
fn exhaustive_min(s: &Scenario, w: &CostWeights) -> f64 {
    let (n, m, r) = (s.num_cars(), s.num_rsus(), s.num_rbs());
    let pmax = s.car_max_power_w;
    let levels: Vec<f64> = (1..=8).map(|k| pmax * k as f64 / 8.0).collect();
    let mut best = f64::INFINITY;
    let mut assoc = vec![0usize; n];
    loop {
        let load_ok = (0..m).all(|j| assoc.iter().filter(|&&x| x == j).count() <= s.capacity());
        if load_ok {
            // injective RB choices
            let mut rbs = vec![0usize; n];
            loop {
                let distinct = (0..n).all(|i| (0..i).all(|k| rbs[k] != rbs[i]));
                if distinct {
                    let mut lv = vec![0usize; n];
                    loop {
                        let power: Vec<f64> = lv.iter().map(|&k| levels[k]).collect();
                        if power.iter().sum::<f64>() <= s.power_budget_w {
                            let ro: Vec<_> = assoc.iter().map(|&x| Some(x)).collect();
                            let bo: Vec<_> = rbs.iter().map(|&x| Some(x)).collect();
                            let a = Allocation::from_indices(m, r, &ro, &bo, power);
                            best = best.min(global_cost(s, &a, w).total);
                        }
                        if !odometer(&mut lv, 8) {
                            break;
                        }
                    }
                }
                if !odometer(&mut rbs, r) {
                    break;
                }
            }
        }
        if !odometer(&mut assoc, m) {
            break;
        }
    }
    best
}

fn odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let cfg = ScenarioConfig {
            num_cars: 1 + (i % 3) as usize,
            num_rsus: 2,
            num_rbs: Some(3),
            num_cellular: Some(3),
            seed: 500 + i,
            ..Default::default()
        };
        let s = generate_scenario(&cfg).unwrap();
        let solver = SolverConfig::default();
        let (_, cost, _) = solve(&s, &solver, None).unwrap();
        let best = exhaustive_min(&s, &solver.weights);
        worst = worst.max(cost.total / best);
    }
    let secs = start.elapsed();
    outcome(
        worst <= 1.10 && secs < Duration::from_secs(60),
        format!(
            "worst BSUM/exhaustive ratio {worst:.4} in {:.2}s",
            secs.as_secs_f64()
        ),
    )
}

// --- 5 - 8 ---------------------------------------------------------------

fn criterion_5() -> Outcome {
    let out = run_experiment(&spec(vec![
        Scheme::Proposed,
        Scheme::Baseline(BaselineKind::BaselineA),
        Scheme::Baseline(BaselineKind::BaselineP),
        Scheme::Baseline(BaselineKind::BaselineR),
    ]))
    .unwrap();
    let c = |name| mean_cost(&out, name, None);
    let (p, a, bp, br) = (
        c("proposed"),
        c("baseline_a"),
        c("baseline_p"),
        c("baseline_r"),
    );
    let separated = p <= 0.95 * a;
    let r_largest = br > a && br > bp;
    outcome(
        separated && r_largest,
        format!(
            "proposed {p:.4}, A {a:.4}, P {bp:.4}, R {br:.4}; proposed >=5% below A: {separated}; R largest: {r_largest}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut sp = spec(vec![Scheme::Proposed]);
    sp.sweep = Sweep {
        axis: SweepAxis::Mu,
        values: vec![1e-4, 1e-2, 1e-1],
    };
    let out = run_experiment(&sp).unwrap();
    let c: Vec<f64> = [1e-4, 1e-2, 1e-1]
        .iter()
        .map(|&v| mean_cost(&out, "proposed", Some(v)))
        .collect();
    outcome(
        c[0] <= c[1] && c[1] <= c[2],
        format!("mu 1e-4: {:.4}, 1e-2: {:.4}, 1e-1: {:.4}", c[0], c[1], c[2]),
    )
}

fn criterion_7() -> Outcome {
    let mut sp = spec(vec![Scheme::Proposed]);
    sp.scenario = ScenarioConfig {
        num_cars: 36,
        num_rbs: Some(36),
        seed: 1,
        ..Default::default()
    };
    sp.sweep = Sweep {
        axis: SweepAxis::NumRsus,
        values: vec![4.0, 6.0, 8.0],
    };
    let out = run_experiment(&sp).unwrap();
    let c: Vec<f64> = [4.0, 6.0, 8.0]
        .iter()
        .map(|&v| mean_cost(&out, "proposed", Some(v)))
        .collect();
    outcome(
        c[0] >= c[1] && c[1] >= c[2],
        format!("M=4: {:.4}, M=6: {:.4}, M=8: {:.4}", c[0], c[1], c[2]),
    )
}

fn criterion_8() -> Outcome {
    let out = run_experiment(&spec(vec![
        Scheme::Proposed,
        Scheme::Baseline(BaselineKind::EqualPower),
    ]))
    .unwrap();
    let (p, e) = (
        mean_cost(&out, "proposed", None),
        mean_cost(&out, "equal_power", None),
    );
    outcome(e >= p, format!("equal_power {e:.4} vs proposed {p:.4}"))
}

// --- 9 -------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for point in 0..100u64 {
        let s = generate_scenario(&ScenarioConfig {
            seed: 900 + point / 10,
            ..table_scale(0)
        })
        .unwrap();
        let a = random_feasible_allocation(&s, point);
        let w = CostWeights::default();
        let grad = power_gradient(&s, &a, &w);
        #[allow(clippy::needless_range_loop)]
        for n in 0..s.num_cars() {
            let h = 1e-6 * a.power[n];
            let mut up = a.clone();
            let mut down = a.clone();
            up.power[n] += h;
            down.power[n] -= h;
            let (cu, cd) = (global_cost(&s, &up, &w), global_cost(&s, &down, &w));
            // difference the cost term by term so the other cars' (unchanged)
            // terms cannot swamp this car's change in rounding error
            let diff: f64 = (0..s.num_cars())
                .map(|k| {
                    w.alpha() * (cu.per_car_per[k] - cd.per_car_per[k])
                        + w.beta() * (cu.per_car_latency[k] - cd.per_car_latency[k])
                })
                .sum();
            let fd = diff / (2.0 * h);
            worst = worst.max(rel_err(grad[n], fd));
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-5,
        format!("max rel err {worst:.2e} over {checked} partials at 100 points"),
    )
}

// --- 10, 11 --------------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let cfg = FLConfig {
            local_iters: 1,
            subglobal_iters: 1,
            seed,
            ..Default::default()
        };
        let num_cars = 4 + seed as usize % 3;
        let (data, _) = generate_datasets(num_cars, &cfg).unwrap();
        let run = run_dfl_with_per(&vec![0.0; num_cars], &data, &cfg).unwrap();

        // flat FedAvg over every device, one gradient step each
        let devices: Vec<_> = data.iter().flatten().collect();
        let dim = devices[0].inputs[0].len();
        let mut w = vec![0.0; dim];
        for rec in &run.rounds {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for d in &devices {
                let k = d.inputs.len() as f64;
                let mut g = vec![0.0; dim];
                for (x, y) in d.inputs.iter().zip(&d.outputs) {
                    let resid: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - y;
                    for j in 0..dim {
                        g[j] += resid * x[j] / k;
                    }
                }
                for j in 0..dim {
                    num[j] += k * (w[j] - cfg.learning_rate * g[j]);
                }
                den += k;
            }
            w = num.iter().map(|v| v / den).collect();
            let err = rec
                .global
                .0
                .iter()
                .zip(&w)
                .map(|(a, b)| rel_err(*a, *b))
                .fold(0.0, f64::max);
            worst = worst.max(err);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max rel deviation {worst:.2e} across 10 seeds"),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut patterns = 0;
    for n in 1..=4usize {
        for _ in 0..25 {
            let dim = rng.random_range(1..=4);
            let models: Vec<ModelWeights> = (0..n)
                .map(|_| ModelWeights((0..dim).map(|_| rng.random_range(-10.0..10.0)).collect()))
                .collect();
            let sizes: Vec<f64> = (0..n).map(|_| rng.random_range(1..200) as f64).collect();
            for bits in 0..(1u32 << n) {
                let mask: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                let parts: Vec<_> = (0..n).map(|i| (&models[i], sizes[i], mask[i])).collect();
                let got = weighted_aggregate(&parts).unwrap();
                let den: f64 = (0..n).filter(|&i| mask[i]).map(|i| sizes[i]).sum();
                patterns += 1;
                match got {
                    None => worst = worst.max(if den == 0.0 { 0.0 } else { 1.0 }),
                    Some(w) => {
                        for j in 0..dim {
                            let num: f64 = (0..n)
                                .filter(|&i| mask[i])
                                .map(|i| sizes[i] * models[i].0[j])
                                .sum();
                            worst = worst.max(rel_err(w.0[j], num / den));
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max rel err {worst:.2e} over {patterns} mask patterns"),
    )
}

// --- 12, 13 --------------------------------------------------------------

fn criterion_12() -> Outcome {
    let mut sp = spec(vec![
        Scheme::Proposed,
        Scheme::Baseline(BaselineKind::BaselineR),
    ]);
    sp.fl = Some(FLConfig::default());
    let out = run_experiment(&sp).unwrap();
    let final_loss = |scheme: &str| {
        let finals: Vec<f64> = out
            .dfl_loss
            .iter()
            .filter(|l| l.scheme.name() == scheme && l.round == FLConfig::default().global_rounds)
            .map(|l| l.global_loss)
            .collect();
        assert_eq!(finals.len(), 30, "{scheme}");
        finals.iter().sum::<f64>() / 30.0
    };
    let (p, r) = (final_loss("proposed"), final_loss("baseline_r"));
    outcome(
        out.failures.is_empty() && p <= 1.05 * r,
        format!("final loss proposed {p:.6} vs baseline_r {r:.6}"),
    )
}

fn criterion_13() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("spec.json");
    std::fs::write(
        &config,
        r#"{"schemes": ["proposed", "baseline_a", "random"], "num_seeds": 4, "per_iteration": true,
            "sweep": {"axis": "mu", "values": [0.0001, 0.01]},
            "fl": {"global_rounds": 3}}"#,
    )
    .unwrap();
    let mut files = Vec::new();
    for (run, jobs) in [(1, "1"), (2, "4")] {
        let out = dir.path().join(format!("run{run}"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_dflbench"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--jobs", jobs])
            .env_remove("DFLBENCH_SEED")
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        files.push([
            std::fs::read(out.join("results.csv")).unwrap(),
            std::fs::read(out.join("dfl_loss.csv")).unwrap(),
        ]);
    }
    let same = files[0] == files[1];
    outcome(
        same,
        format!(
            "results.csv {} bytes, dfl_loss.csv {} bytes, identical: {same}",
            files[0][0].len(),
            files[0][1].len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        ("formula oracles", criterion_1),
        ("monotone descent", criterion_2),
        ("convergence speed", criterion_3),
        ("exhaustive-oracle proximity", criterion_4),
        ("scheme ordering", criterion_5),
        ("mu trend", criterion_6),
        ("RSU trend", criterion_7),
        ("equal-power ablation", criterion_8),
        ("power-gradient check", criterion_9),
        ("DFL FedAvg equivalence", criterion_10),
        ("error-masked aggregation", criterion_11),
        ("loss-degradation trend", criterion_12),
        ("reproducibility", criterion_13),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{verdict}] {name}: {}", result.detail);
        if !result.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 13 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
