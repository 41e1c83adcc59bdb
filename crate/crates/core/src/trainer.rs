//! Unsupervised backpropagation: learning latent rows and network weights
//! together by per-element stochastic gradient descent.
//!
//! [`ubp_train`] runs three phases. First the latent matrix is fitted
//! through a throwaway single-layer network, then a fresh network is fitted
//! with the latent matrix frozen, and finally both are refined together
//! without regularization. [`nlpca_train`] skips straight to the last phase.
//!
//! Every phase uses the same learning-rate schedule: the rate is halved
//! whenever an epoch improves the error by a relative amount below `gamma`,
//! and the phase ends once it drops to `eta_floor`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::mlp::{MlpModel, Topology, INIT_STD};

/// Independent random streams derived from one seed.
pub(crate) mod stream {
    pub const LATENT_INIT: u64 = 1;
    pub const TEMP_INIT: u64 = 2;
    pub const WEIGHT_INIT: u64 = 3;
    pub const EPOCH_ORDER: u64 = 4;
    pub const HOLDOUT: u64 = 5;
    pub const CLUSTER_INIT: u64 = 6;
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Learning-rate decay schedule shared by every SGD learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta_start: f64,
    pub eta_floor: f64,
    pub gamma: f64,
    pub max_epochs: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            eta_start: 0.01,
            eta_floor: 0.0001,
            gamma: 0.00001,
            max_epochs: 10_000,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_floor > 0.0 && self.eta_floor < self.eta_start) {
            return Err(Error::arg(format!(
                "need 0 < eta_floor < eta_start, got {} and {}",
                self.eta_floor, self.eta_start
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::arg("gamma must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::arg("max_epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta_start: f64,
    pub eta_floor: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub latent_t: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub max_epochs_per_phase: usize,
    /// Fraction of known cells held out to score convergence; 0 scores on
    /// the training cells themselves.
    #[serde(default)]
    pub holdout_fraction: f64,
    /// Compute the input gradient before the weight update instead of after.
    #[serde(default)]
    pub h_before_w: bool,
    /// Run the latent and weight pre-training phases.
    #[serde(default = "yes")]
    pub pretrain: bool,
    /// Standard deviation of the initial latent entries.
    #[serde(default = "default_latent_std")]
    pub latent_init_std: f64,
}

fn default_latent_std() -> f64 {
    INIT_STD
}

fn yes() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        let s = Schedule::default();
        TrainConfig {
            eta_start: s.eta_start,
            eta_floor: s.eta_floor,
            gamma: s.gamma,
            lambda: 0.0001,
            latent_t: 2,
            hidden: Vec::new(),
            seed: 0,
            max_epochs_per_phase: s.max_epochs,
            holdout_fraction: 0.0,
            h_before_w: false,
            pretrain: true,
            latent_init_std: INIT_STD,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            eta_start: self.eta_start,
            eta_floor: self.eta_floor,
            gamma: self.gamma,
            max_epochs: self.max_epochs_per_phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule().validate()?;
        if !(self.lambda >= 0.0) {
            return Err(Error::arg("lambda must be non-negative"));
        }
        if self.latent_t == 0 {
            return Err(Error::arg("latent_t must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::arg("hidden layers need at least one unit"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::arg("holdout_fraction must lie in [0, 1)"));
        }
        if !(self.latent_init_std.is_finite() && self.latent_init_std > 0.0) {
            return Err(Error::arg("latent_init_std must be positive"));
        }
        Ok(())
    }
}

/// The `n x t` matrix of latent rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMatrix {
    rows: usize,
    dims: usize,
    values: Vec<f64>,
}

impl LatentMatrix {
    pub fn zeros(rows: usize, dims: usize) -> Self {
        LatentMatrix {
            rows,
            dims,
            values: vec![0.0; rows * dims],
        }
    }

    pub fn from_values(rows: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dims {
            return Err(Error::arg("latent values do not match the requested shape"));
        }
        Ok(LatentMatrix { rows, dims, values })
    }

    /// Entries drawn from `Normal(0, std)`.
    pub fn random<R: Rng + ?Sized>(rows: usize, dims: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("valid normal");
        LatentMatrix {
            rows,
            dims,
            values: (0..rows * dims).map(|_| normal.sample(rng)).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dims..(r + 1) * self.dims]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.dims..(r + 1) * self.dims]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_mean(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self.row(r)[c]).sum::<f64>() / self.rows as f64
    }

    pub fn column_range(&self, c: usize) -> (f64, f64) {
        (0..self.rows)
            .map(|r| self.row(r)[c])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// One line of training progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: u8,
    pub epoch: usize,
    pub rmse: f64,
    pub eta: f64,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "phase={} epoch={} rmse={} eta={}",
            self.phase, self.epoch, self.rmse, self.eta
        )
    }
}

/// Known entries of an encoded matrix, split into cells used for gradient
/// steps and cells used to score convergence (the same cells unless a
/// holdout is requested).
#[derive(Debug, Clone)]
pub struct KnownCells {
    train: Vec<(usize, usize, f64)>,
    score: Vec<(usize, usize, f64)>,
}

impl KnownCells {
    pub fn new(x: &EncodedMatrix) -> Self {
        let all = x.known_entries();
        KnownCells {
            score: all.clone(),
            train: all,
        }
    }

    /// Moves a random `fraction` of the known cells into a scoring set.
    pub fn with_holdout(x: &EncodedMatrix, fraction: f64, seed: u64) -> Self {
        if fraction <= 0.0 {
            return Self::new(x);
        }
        let mut all = x.known_entries();
        all.shuffle(&mut stream_rng(seed, stream::HOLDOUT));
        let held = ((all.len() as f64) * fraction).round() as usize;
        let held = held.min(all.len().saturating_sub(1));
        let score = all.split_off(all.len() - held);
        let mut train = all;
        train.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let score = if score.is_empty() { train.clone() } else { score };
        KnownCells { train, score }
    }

    pub fn train(&self) -> &[(usize, usize, f64)] {
        &self.train
    }

    pub fn score(&self) -> &[(usize, usize, f64)] {
        &self.score
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }
}

/// Per-epoch knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochParams {
    pub eta: f64,
    pub lambda: f64,
    pub update_inputs: bool,
    pub h_before_w: bool,
}

/// Root-mean-squared error of the model over `cells`.
pub fn rmse(cells: &[(usize, usize, f64)], model: &mut MlpModel, latent: &LatentMatrix) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::arg("no known cells to score"));
    }
    let mut sse = 0.0;
    for &(r, c, x) in cells {
        let e = x - model.forward_single_output(latent.row(r), c)?;
        sse += e * e;
    }
    Ok((sse / cells.len() as f64).sqrt())
}

/// One pass over every training cell in a fresh random order. Each cell
/// triggers a forward pass into its output unit, a weight step
/// `W <- W - eta (g + lambda W)` and, when `update_inputs` is set, a latent
/// step `v <- v - eta (h + lambda v)`. Returns the RMSE over the scoring
/// cells afterwards.
pub fn train_epoch<R: Rng + ?Sized>(
    cells: &KnownCells,
    model: &mut MlpModel,
    latent: &mut LatentMatrix,
    params: EpochParams,
    rng: &mut R,
) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::arg("no known cells to train on"));
    }
    check_shapes(model, latent, cells)?;
    let order = epoch_order(cells.train.len(), rng);
    let mut h = vec![0.0; latent.dims()];
    for &k in &order {
        let (r, c, x) = cells.train[k];
        model.forward_single_output(latent.row(r), c)?;
        model.backprop_deltas(c, x)?;
        if params.update_inputs && params.h_before_w {
            model.input_gradient_into(&mut h)?;
        }
        model.descend(params.eta, params.lambda)?;
        if params.update_inputs {
            if !params.h_before_w {
                model.input_gradient_into(&mut h)?;
            }
            for (v, hi) in latent.row_mut(r).iter_mut().zip(&h) {
                *v -= params.eta * (hi + params.lambda * *v);
            }
        }
    }
    rmse(&cells.score, model, latent)
}

/// A uniformly random permutation of `0..len`.
pub fn epoch_order<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    order
}

fn check_shapes(model: &MlpModel, latent: &LatentMatrix, cells: &KnownCells) -> Result<()> {
    if model.inputs() != latent.dims() {
        return Err(Error::arg(format!(
            "network takes {} inputs but latent rows have {} values",
            model.inputs(),
            latent.dims()
        )));
    }
    for &(r, c, _) in cells.train.iter().chain(&cells.score) {
        if r >= latent.n_rows() || c >= model.outputs() {
            return Err(Error::arg(format!("cell ({r}, {c}) is outside the model's shape")));
        }
    }
    Ok(())
}

/// Summary of one run of the decay schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub final_rmse: f64,
    pub epochs: usize,
    pub halvings: usize,
    /// `(epoch, rmse, eta)` per epoch, `eta` being the rate used for it.
    pub trace: Vec<(usize, f64, f64)>,
}

/// Drives `epoch(eta) -> score` until the rate decays to the floor or the
/// epoch cap is hit. The previous score starts at infinity, so the first
/// epoch never decays the rate.
pub fn run_schedule<F>(schedule: &Schedule, mut epoch: F) -> Result<PhaseOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    schedule.validate()?;
    let mut eta = schedule.eta_start;
    let mut previous = f64::INFINITY;
    let mut out = PhaseOutcome {
        final_rmse: f64::INFINITY,
        epochs: 0,
        halvings: 0,
        trace: Vec::new(),
    };
    while eta > schedule.eta_floor && out.epochs < schedule.max_epochs {
        let score = epoch(eta)?;
        out.epochs += 1;
        out.trace.push((out.epochs, score, eta));
        out.final_rmse = score;
        if relative_improvement(score, previous) < schedule.gamma {
            eta /= 2.0;
            out.halvings += 1;
        }
        previous = score;
    }
    Ok(out)
}

/// `1 - s / s'`, taken as 1 before any score exists and as 0 once the
/// previous score is already zero.
fn relative_improvement(score: f64, previous: f64) -> f64 {
    if previous.is_infinite() {
        1.0
    } else if previous > 0.0 {
        1.0 - score / previous
    } else {
        0.0
    }
}

/// Trains `model` (and `latent`, if `update_inputs`) until the schedule
/// converges.
#[allow(clippy::too_many_arguments)]
pub fn run_phase<R: Rng + ?Sized>(
    cells: &KnownCells,
    model: &mut MlpModel,
    latent: &mut LatentMatrix,
    config: &TrainConfig,
    update_inputs: bool,
    regularized: bool,
    rng: &mut R,
) -> Result<PhaseOutcome> {
    let lambda = if regularized { config.lambda } else { 0.0 };
    run_schedule(&config.schedule(), |eta| {
        train_epoch(
            cells,
            model,
            latent,
            EpochParams {
                eta,
                lambda,
                update_inputs,
                h_before_w: config.h_before_w,
            },
            rng,
        )
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: TrainConfig,
    #[serde(rename = "V")]
    pub latent: LatentMatrix,
    pub model: MlpModel,
    pub history: Vec<EpochRecord>,
}

impl TrainedModel {
    /// Network outputs for latent row `r`.
    pub fn decode_row(&self, r: usize) -> Result<Vec<f64>> {
        if r >= self.latent.n_rows() {
            return Err(Error::arg(format!(
                "row {r} out of range for {} latent rows",
                self.latent.n_rows()
            )));
        }
        self.model.predict(self.latent.row(r))
    }

    /// Predictions for every row, row-major.
    pub fn reconstruct(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.latent.n_rows() * self.model.outputs());
        for r in 0..self.latent.n_rows() {
            out.extend(self.decode_row(r)?);
        }
        Ok(out)
    }

    /// Final RMSE over the known entries of `x`.
    pub fn rmse(&self, x: &EncodedMatrix) -> Result<f64> {
        let mut m = self.model.clone();
        rmse(&x.known_entries(), &mut m, &self.latent)
    }

    /// Decodes a `steps x steps` grid of latent points spanning `bounds`
    /// along latent dimensions `dims`, holding every other dimension at its
    /// column mean. Points are ordered with `dims.0` varying slowest. Without
    /// explicit bounds each axis spans the observed range of its column.
    pub fn sample_latent_grid(
        &self,
        dims: (usize, usize),
        steps: usize,
        bounds: Option<[(f64, f64); 2]>,
    ) -> Result<LatentGrid> {
        let t = self.latent.dims();
        if t < 2 {
            return Err(Error::arg("grid sampling needs at least two latent dimensions"));
        }
        if dims.0 >= t || dims.1 >= t || dims.0 == dims.1 {
            return Err(Error::arg(format!("dims {dims:?} must be distinct and below {t}")));
        }
        if steps < 2 {
            return Err(Error::arg("grid needs at least 2 steps per axis"));
        }
        let bounds = bounds.unwrap_or([self.latent.column_range(dims.0), self.latent.column_range(dims.1)]);
        let base: Vec<f64> = (0..t).map(|c| self.latent.column_mean(c)).collect();
        let at = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / (steps - 1) as f64;
        let mut points = Vec::with_capacity(steps * steps);
        for a in 0..steps {
            for b in 0..steps {
                let mut v = base.clone();
                v[dims.0] = at(bounds[0], a);
                v[dims.1] = at(bounds[1], b);
                let outputs = self.model.predict(&v)?;
                points.push(GridPoint { latent: v, outputs });
            }
        }
        Ok(LatentGrid { dims, steps, points })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub latent: Vec<f64>,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    pub dims: (usize, usize),
    pub steps: usize,
    pub points: Vec<GridPoint>,
}

impl LatentGrid {
    pub fn point(&self, a: usize, b: usize) -> &GridPoint {
        &self.points[a * self.steps + b]
    }
}

/// Three-phase training (or the joint phase alone when
/// `config.pretrain` is false).
pub fn ubp_train(x: &EncodedMatrix, config: &TrainConfig) -> Result<TrainedModel> {
    ubp_train_observed(x, config, &mut |_| {})
}

/// [`ubp_train`] reporting each epoch to `observer` as it finishes.
pub fn ubp_train_observed(
    x: &EncodedMatrix,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainedModel> {
    config.validate()?;
    let width = x.width();
    if config.latent_t >= width {
        return Err(Error::arg(format!(
            "latent size {} must be smaller than the encoded width {width}",
            config.latent_t
        )));
    }
    let cells = KnownCells::with_holdout(x, config.holdout_fraction, config.seed);
    if cells.is_empty() {
        return Err(Error::arg("no known cells to train on"));
    }

    let mut latent = LatentMatrix::random(x.n_rows(), config.latent_t, config.latent_init_std, &mut stream_rng(config.seed, stream::LATENT_INIT));
    let mut order_rng = stream_rng(config.seed, stream::EPOCH_ORDER);
    let mut history = Vec::new();
    let mut phase = |id: u8, model: &mut MlpModel, latent: &mut LatentMatrix, update_inputs: bool, regularized: bool| {
        let params = EpochParams {
            eta: 0.0,
            lambda: if regularized { config.lambda } else { 0.0 },
            update_inputs,
            h_before_w: config.h_before_w,
        };
        let mut epoch = 0;
        run_schedule(&config.schedule(), |eta| {
            let rmse = train_epoch(&cells, model, latent, EpochParams { eta, ..params }, &mut order_rng)?;
            epoch += 1;
            let rec = EpochRecord {
                phase: id,
                epoch,
                rmse,
                eta,
            };
            observer(&rec);
            history.push(rec);
            Ok(rmse)
        })
    };

    if config.pretrain {
        let temp_topology = Topology::new(config.latent_t, Vec::new(), width)?;
        let mut temp = MlpModel::init(temp_topology, &mut stream_rng(config.seed, stream::TEMP_INIT))?;
        phase(1, &mut temp, &mut latent, true, true)?;
    }

    let topology = Topology::new(config.latent_t, config.hidden.clone(), width)?;
    let mut model = MlpModel::init(topology, &mut stream_rng(config.seed, stream::WEIGHT_INIT))?;
    if config.pretrain {
        phase(2, &mut model, &mut latent, false, true)?;
    }
    phase(3, &mut model, &mut latent, true, false)?;

    Ok(TrainedModel {
        config: config.clone(),
        latent,
        model,
        history,
    })
}

/// Single-phase training: random latent rows and weights refined together.
pub fn nlpca_train(x: &EncodedMatrix, config: &TrainConfig) -> Result<TrainedModel> {
    nlpca_train_observed(x, config, &mut |_| {})
}

pub fn nlpca_train_observed(
    x: &EncodedMatrix,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainedModel> {
    let config = TrainConfig {
        pretrain: false,
        ..config.clone()
    };
    ubp_train_observed(x, &config, observer)
}
