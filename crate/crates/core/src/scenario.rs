//! Seeded vehicular network snapshots: node placement, channel gains and
//! radio parameters converted to linear units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest fading sample used by [`gain_model`]; keeps every gain positive.
pub const FADING_FLOOR: f64 = 1e-6;
/// Distances below this are clamped before evaluating path loss.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Radio and topology parameters of one scenario.
///
/// Optional counts resolve against the others: `num_rbs` defaults to the
/// number of cars, `num_cellular` to the number of resource blocks and
/// `rsu_capacity` to `ceil(num_cars / num_rsus)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub area_side_m: f64,
    pub num_cars: usize,
    pub num_rsus: usize,
    pub num_cellular: Option<usize>,
    pub num_rbs: Option<usize>,
    pub rb_bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub car_max_power_dbm: f64,
    pub total_power_budget_dbm: f64,
    pub cellular_power_dbm: f64,
    pub waterfall_threshold: f64,
    pub model_size_bits: f64,
    pub rsu_capacity: Option<usize>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side_m: 1000.0,
            num_cars: 30,
            num_rsus: 6,
            num_cellular: None,
            num_rbs: None,
            rb_bandwidth_hz: 180e3,
            noise_psd_dbm_hz: -174.0,
            car_max_power_dbm: 24.0,
            total_power_budget_dbm: 30.0,
            cellular_power_dbm: 20.0,
            waterfall_threshold: 1.0,
            model_size_bits: 40_000.0,
            rsu_capacity: None,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn rbs(&self) -> usize {
        self.num_rbs.unwrap_or(self.num_cars)
    }

    pub fn cellular(&self) -> usize {
        self.num_cellular.unwrap_or_else(|| self.rbs())
    }

    /// Per-RSU association limit.
    pub fn capacity(&self) -> usize {
        self.rsu_capacity
            .unwrap_or_else(|| self.num_cars.div_ceil(self.num_rsus.max(1)))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_cars;
        let m = self.num_rsus;
        let r = self.rbs();
        let y = self.cellular();
        if n < 1 {
            return Err(Error::validation("num_cars (N) >= 1 violated: N=0"));
        }
        if m < 1 {
            return Err(Error::validation("num_rsus (M) >= 1 violated: M=0"));
        }
        if r < n {
            return Err(Error::validation(format!(
                "R >= N violated: num_rbs R={r}, num_cars N={n}"
            )));
        }
        if y != r {
            return Err(Error::validation(format!(
                "Y = R violated: num_cellular Y={y}, num_rbs R={r}"
            )));
        }
        let cap = self.capacity();
        if cap.saturating_mul(m) < n {
            return Err(Error::validation(format!(
                "rsu_capacity * M >= N violated: {cap} * {m} < {n}"
            )));
        }
        let positive = [
            ("area_side_m", self.area_side_m),
            ("rb_bandwidth_hz", self.rb_bandwidth_hz),
            ("waterfall_threshold", self.waterfall_threshold),
            ("model_size_bits", self.model_size_bits),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} > 0 violated: {v}")));
            }
        }
        let finite_dbm = [
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("car_max_power_dbm", self.car_max_power_dbm),
            ("total_power_budget_dbm", self.total_power_budget_dbm),
            ("cellular_power_dbm", self.cellular_power_dbm),
        ];
        for (name, v) in finite_dbm {
            if !v.is_finite() || dbm_to_watts(v) <= 0.0 {
                return Err(Error::validation(format!(
                    "{name} must convert to a positive power, got {v} dBm"
                )));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Path loss in dB at `distance_m`, LTE macro model `128.1 + 37.6 log10(d_km)`.
pub fn path_loss_db(distance_m: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    128.1 + 37.6 * (d / 1000.0).log10()
}

/// Linear power gain of a link at `distance_m` with a unit-mean fading sample.
///
/// Distance is clamped to 1 m, fading is floored at [`FADING_FLOOR`] and the
/// result is capped at 1, so the gain always lies in `(0, 1]`.
pub fn gain_model(distance_m: f64, fading_draw: f64) -> f64 {
    let fading = if fading_draw.is_nan() {
        FADING_FLOOR
    } else {
        fading_draw.max(FADING_FLOOR)
    };
    (10f64.powf(-path_loss_db(distance_m) / 10.0) * fading).min(1.0)
}

/// Immutable network snapshot. All powers are in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub car_positions: Vec<Point>,
    pub rsu_positions: Vec<Point>,
    pub cellular_positions: Vec<Point>,
    /// `gain_car_rsu[n][m]`, flat across resource blocks.
    pub gain_car_rsu: Vec<Vec<f64>>,
    /// `gain_cell_rsu[y][m]`.
    pub gain_cell_rsu: Vec<Vec<f64>>,
    /// Cellular user occupying each resource block.
    pub rb_owner: Vec<usize>,
    pub noise_power_w: f64,
    pub car_max_power_w: f64,
    pub power_budget_w: f64,
    pub cellular_power_w: f64,
}

impl Scenario {
    /// Assemble a scenario from explicit geometry and gains. Resource block `r`
    /// is owned by cellular user `r`.
    pub fn from_parts(
        config: ScenarioConfig,
        car_positions: Vec<Point>,
        rsu_positions: Vec<Point>,
        cellular_positions: Vec<Point>,
        gain_car_rsu: Vec<Vec<f64>>,
        gain_cell_rsu: Vec<Vec<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        let (n, m, y) = (config.num_cars, config.num_rsus, config.cellular());
        if car_positions.len() != n || rsu_positions.len() != m || cellular_positions.len() != y {
            return Err(Error::validation("position counts do not match config"));
        }
        let shape_ok =
            |g: &Vec<Vec<f64>>, rows: usize| g.len() == rows && g.iter().all(|row| row.len() == m);
        if !shape_ok(&gain_car_rsu, n) || !shape_ok(&gain_cell_rsu, y) {
            return Err(Error::validation("gain matrix shape does not match config"));
        }
        let in_range = |g: &Vec<Vec<f64>>| g.iter().flatten().all(|&h| h > 0.0 && h <= 1.0);
        if !in_range(&gain_car_rsu) || !in_range(&gain_cell_rsu) {
            return Err(Error::validation("every gain must lie in (0, 1]"));
        }
        let noise_power_w = dbm_to_watts(config.noise_psd_dbm_hz) * config.rb_bandwidth_hz;
        Ok(Self {
            rb_owner: (0..config.rbs()).collect(),
            noise_power_w,
            car_max_power_w: dbm_to_watts(config.car_max_power_dbm),
            power_budget_w: dbm_to_watts(config.total_power_budget_dbm),
            cellular_power_w: dbm_to_watts(config.cellular_power_dbm),
            config,
            car_positions,
            rsu_positions,
            cellular_positions,
            gain_car_rsu,
            gain_cell_rsu,
        })
    }

    pub fn num_cars(&self) -> usize {
        self.config.num_cars
    }

    pub fn num_rsus(&self) -> usize {
        self.config.num_rsus
    }

    pub fn num_rbs(&self) -> usize {
        self.rb_owner.len()
    }

    pub fn capacity(&self) -> usize {
        self.config.capacity()
    }

    /// Interference-plus-noise power seen at RSU `rsu` on resource block `rb`.
    pub fn interference_plus_noise(&self, rsu: usize, rb: usize) -> f64 {
        let owner = self.rb_owner[rb];
        self.gain_cell_rsu[owner][rsu] * self.cellular_power_w + self.noise_power_w
    }

    /// Power assigned to every car by the equal-split rule.
    pub fn equal_power(&self) -> f64 {
        self.car_max_power_w
            .min(self.power_budget_w / self.num_cars() as f64)
    }
}

/// Build a scenario from its configuration. Deterministic in `config.seed`.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let side = config.area_side_m;

    let m = config.num_rsus;
    let cols = (m as f64).sqrt().ceil() as usize;
    let rows = m.div_ceil(cols);
    let (cell_w, cell_h) = (side / cols as f64, side / rows as f64);
    let rsus: Vec<Point> = (0..m)
        .map(|i| {
            let (c, r) = (i % cols, i / cols);
            let jx: f64 = rng.random_range(-0.25..0.25);
            let jy: f64 = rng.random_range(-0.25..0.25);
            Point {
                x: (c as f64 + 0.5 + jx) * cell_w,
                y: (r as f64 + 0.5 + jy) * cell_h,
            }
        })
        .collect();

    let mut uniform_points = |count: usize| -> Vec<Point> {
        (0..count)
            .map(|_| Point {
                x: rng.random_range(0.0..side),
                y: rng.random_range(0.0..side),
            })
            .collect()
    };
    let cars = uniform_points(config.num_cars);
    let cells = uniform_points(config.cellular());

    let mut link_gains = |from: &[Point]| -> Vec<Vec<f64>> {
        from.iter()
            .map(|p| {
                rsus.iter()
                    .map(|q| {
                        let fading: f64 = Exp1.sample(&mut rng);
                        gain_model(p.distance(q), fading)
                    })
                    .collect()
            })
            .collect()
    };
    let gain_car_rsu = link_gains(&cars);
    let gain_cell_rsu = link_gains(&cells);

    Scenario::from_parts(
        config.clone(),
        cars,
        rsus,
        cells,
        gain_car_rsu,
        gain_cell_rsu,
    )
}
