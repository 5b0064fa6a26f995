//! Desk-scale dispersed federated learning.
//!
//! Devices inside each car run full-batch gradient descent on a linear
//! regression loss and aggregate to a per-car sub-global model. Cars upload
//! their sub-global models to the RSUs over links that drop the update with
//! the car's packet error rate; the surviving updates form the global model,
//! which is broadcast back to every device.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{global_cost, Allocation, CostWeights};
use crate::scenario::Scenario;

const MASK_SALT: u64 = 0x6d61_736b_5f73_6565;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FLConfig {
    pub global_rounds: usize,
    pub subglobal_iters: usize,
    pub local_iters: usize,
    pub learning_rate: f64,
    pub devices_per_car: usize,
    /// Inclusive `[min, max]` number of samples per device.
    pub samples_per_device: [usize; 2],
    pub feature_dim: usize,
    pub label_noise_std: f64,
    pub seed: u64,
}

impl Default for FLConfig {
    fn default() -> Self {
        Self {
            global_rounds: 10,
            subglobal_iters: 2,
            local_iters: 2,
            learning_rate: 0.05,
            devices_per_car: 3,
            samples_per_device: [20, 60],
            feature_dim: 5,
            label_noise_std: 0.1,
            seed: 7,
        }
    }
}

impl FLConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("global_rounds", self.global_rounds),
            ("subglobal_iters", self.subglobal_iters),
            ("local_iters", self.local_iters),
            ("devices_per_car", self.devices_per_car),
            ("feature_dim", self.feature_dim),
            ("samples_per_device[0]", self.samples_per_device[0]),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::validation(format!("{name} >= 1 violated")));
            }
        }
        if self.samples_per_device[1] < self.samples_per_device[0] {
            return Err(Error::validation(
                "samples_per_device must be [min, max] with min <= max",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation(format!(
                "learning_rate > 0 violated: {}",
                self.learning_rate
            )));
        }
        if !(self.label_noise_std >= 0.0 && self.label_noise_std.is_finite()) {
            return Err(Error::validation("label_noise_std >= 0 violated"));
        }
        Ok(())
    }
}

/// Flat model parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights(pub Vec<f64>);

impl ModelWeights {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(w, x)| w * x).sum()
    }

    pub fn max_abs_diff(&self, other: &ModelWeights) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDataset {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl DeviceDataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(Error::contract(format!(
                "dataset needs >= 1 sample and matching lengths, got {} inputs / {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::contract("dataset inputs have mixed dimensions"));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn size(&self) -> usize {
        self.outputs.len()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    fn samples(&self) -> impl Iterator<Item = (&Vec<f64>, f64)> {
        self.inputs.iter().zip(self.outputs.iter().copied())
    }

    /// Mean of `1/2 (x.w - y)^2` over the samples.
    pub fn loss(&self, w: &ModelWeights) -> f64 {
        self.samples()
            .map(|(x, y)| 0.5 * (w.predict(x) - y).powi(2))
            .sum::<f64>()
            / self.size() as f64
    }

    /// Gradient of [`DeviceDataset::loss`].
    pub fn gradient(&self, w: &ModelWeights) -> Vec<f64> {
        let mut g = vec![0.0; w.dim()];
        for (x, y) in self.samples() {
            let residual = w.predict(x) - y;
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += residual * xi;
            }
        }
        let k = self.size() as f64;
        g.iter_mut().for_each(|gi| *gi /= k);
        g
    }
}

/// Devices of one car.
pub type CarDatasets = Vec<DeviceDataset>;

fn check_dim(w: &ModelWeights, data: &DeviceDataset) -> Result<()> {
    if w.dim() != data.dim() {
        return Err(Error::contract(format!(
            "model dimension {} does not match data dimension {}",
            w.dim(),
            data.dim()
        )));
    }
    Ok(())
}

/// `iters` full-batch gradient steps on the device's mean squared loss.
pub fn local_update(
    weights: &ModelWeights,
    data: &DeviceDataset,
    lr: f64,
    iters: usize,
) -> Result<ModelWeights> {
    check_dim(weights, data)?;
    let mut w = weights.clone();
    for _ in 0..iters {
        let g = data.gradient(&w);
        for (wi, gi) in w.0.iter_mut().zip(&g) {
            *wi -= lr * gi;
        }
        if w.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { lr });
        }
    }
    Ok(w)
}

/// Size-weighted mean of the models whose mask is set:
/// `sum(k * w * mask) / sum(k * mask)`.
///
/// Returns `Ok(None)` when no model survives.
pub fn weighted_aggregate(models: &[(&ModelWeights, f64, bool)]) -> Result<Option<ModelWeights>> {
    let Some((first, _, _)) = models.first() else {
        return Ok(None);
    };
    let dim = first.dim();
    if models.iter().any(|(w, _, _)| w.dim() != dim) {
        return Err(Error::contract("aggregated models differ in dimension"));
    }
    let mut survivors = models.iter().filter(|(_, size, keep)| *keep && *size > 0.0);
    if let (Some((only, _, _)), None) = (survivors.next(), survivors.next()) {
        // k * w / k is not always w in floating point
        return Ok(Some((*only).clone()));
    }
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (w, size, _) in models.iter().filter(|(_, _, keep)| *keep) {
        for (a, wi) in acc.iter_mut().zip(&w.0) {
            *a += size * wi;
        }
        total += size;
    }
    if total <= 0.0 {
        return Ok(None);
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(Some(ModelWeights(acc)))
}

/// Mean loss over the union of all device samples.
pub fn global_loss<'a>(
    weights: &ModelWeights,
    datasets: impl IntoIterator<Item = &'a DeviceDataset>,
) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for d in datasets {
        sum += d.loss(weights) * d.size() as f64;
        count += d.size();
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Smallest and largest eigenvalue of the pooled loss Hessian
/// `(1/K) sum x x^T`, i.e. the strong-convexity and smoothness constants.
pub fn curvature_bounds<'a>(datasets: impl IntoIterator<Item = &'a DeviceDataset>) -> (f64, f64) {
    let mut h: Option<DMatrix<f64>> = None;
    let mut count = 0usize;
    for d in datasets {
        let dim = d.dim();
        let acc = h.get_or_insert_with(|| DMatrix::zeros(dim, dim));
        for x in &d.inputs {
            for i in 0..dim {
                for j in 0..dim {
                    acc[(i, j)] += x[i] * x[j];
                }
            }
        }
        count += d.size();
    }
    let Some(h) = h else {
        return (0.0, 0.0);
    };
    let eig = SymmetricEigen::new(h / count as f64).eigenvalues;
    (eig.min(), eig.max())
}

/// Synthetic regression data: a standard-normal ground truth, standard-normal
/// features and Gaussian label noise. Car `n` draws from its own stream so
/// its data does not depend on the number of cars.
pub fn generate_datasets(
    num_cars: usize,
    cfg: &FLConfig,
) -> Result<(Vec<CarDatasets>, ModelWeights)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let truth = ModelWeights(
        (0..cfg.feature_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
    );
    let [lo, hi] = cfg.samples_per_device;
    let cars = (0..num_cars)
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(n as u64 + 1);
            (0..cfg.devices_per_car)
                .map(|_| {
                    let k = rng.random_range(lo..=hi);
                    let inputs: Vec<Vec<f64>> = (0..k)
                        .map(|_| {
                            (0..cfg.feature_dim)
                                .map(|_| StandardNormal.sample(&mut rng))
                                .collect()
                        })
                        .collect();
                    let outputs = inputs
                        .iter()
                        .map(|x| {
                            let noise: f64 = StandardNormal.sample(&mut rng);
                            truth.predict(x) + cfg.label_noise_std * noise
                        })
                        .collect();
                    DeviceDataset::new(inputs, outputs)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cars, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub global: ModelWeights,
    /// Cars whose sub-global update arrived intact.
    pub survivors: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DflRun {
    pub final_model: ModelWeights,
    /// Global loss before training followed by the loss after every round.
    pub loss_curve: Vec<f64>,
    pub rounds: Vec<RoundRecord>,
}

fn car_size(car: &CarDatasets) -> f64 {
    car.iter().map(|d| d.size() as f64).sum()
}

/// Sub-global iterations of one car starting from the global model.
fn subglobal_model(
    global: &ModelWeights,
    car: &CarDatasets,
    cfg: &FLConfig,
) -> Result<ModelWeights> {
    let mut sub = global.clone();
    for _ in 0..cfg.subglobal_iters {
        let locals = car
            .iter()
            .map(|d| local_update(&sub, d, cfg.learning_rate, cfg.local_iters))
            .collect::<Result<Vec<_>>>()?;
        let parts: Vec<(&ModelWeights, f64, bool)> = locals
            .iter()
            .zip(car)
            .map(|(w, d)| (w, d.size() as f64, true))
            .collect();
        // intra-car links are lossless, so there is always a survivor
        sub = weighted_aggregate(&parts)?.expect("car has at least one device");
    }
    Ok(sub)
}

/// Run training where car `n`'s upload is lost with probability `per[n]`.
pub fn run_dfl_with_per(per: &[f64], datasets: &[CarDatasets], cfg: &FLConfig) -> Result<DflRun> {
    cfg.validate()?;
    if per.len() != datasets.len() {
        return Err(Error::contract(format!(
            "{} packet error rates for {} cars",
            per.len(),
            datasets.len()
        )));
    }
    if datasets.iter().any(|c| c.is_empty()) {
        return Err(Error::contract("every car needs at least one device"));
    }
    let dim = datasets[0][0].dim();
    let all = || datasets.iter().flatten();
    let mut global = ModelWeights::zeros(dim);
    let mut mask_rngs: Vec<ChaCha8Rng> = (0..datasets.len())
        .map(|n| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ MASK_SALT);
            rng.set_stream(n as u64 + 1);
            rng
        })
        .collect();

    let mut loss_curve = vec![global_loss(&global, all())];
    let mut rounds = Vec::with_capacity(cfg.global_rounds);
    for round in 1..=cfg.global_rounds {
        let subs = datasets
            .par_iter()
            .map(|car| subglobal_model(&global, car, cfg))
            .collect::<Result<Vec<_>>>()?;
        let masks: Vec<bool> = mask_rngs
            .iter_mut()
            .zip(per)
            .map(|(rng, &q)| rng.random::<f64>() >= q)
            .collect();
        let parts: Vec<(&ModelWeights, f64, bool)> = subs
            .iter()
            .zip(datasets)
            .zip(&masks)
            .map(|((w, car), &keep)| (w, car_size(car), keep))
            .collect();
        if let Some(next) = weighted_aggregate(&parts)? {
            global = next;
        }
        let loss = global_loss(&global, all());
        loss_curve.push(loss);
        rounds.push(RoundRecord {
            round,
            global: global.clone(),
            survivors: masks.iter().filter(|&&m| m).count(),
            loss,
        });
    }
    Ok(DflRun {
        final_model: global,
        loss_curve,
        rounds,
    })
}

/// Train with the packet error rates implied by `alloc` on generated data.
pub fn run_dfl(scenario: &Scenario, alloc: &Allocation, cfg: &FLConfig) -> Result<DflRun> {
    alloc.check_shape(scenario)?;
    if !alloc.is_fully_associated() {
        return Err(Error::contract(
            "training needs every car associated with one RB",
        ));
    }
    let per = global_cost(scenario, alloc, &CostWeights::default()).per_car_per;
    let (datasets, _) = generate_datasets(scenario.num_cars(), cfg)?;
    run_dfl_with_per(&per, &datasets, cfg)
}
