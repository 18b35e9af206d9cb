//! Deterministic minibatch training on mean squared error.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::evaluation::{predict_ratings, rmse};
use crate::models::{init_model, Activation, BlockRole, Gradients, Model, ModelKind, Sample, Shape};
use crate::numerics::{DenseMatrix, SeededRng};
use crate::{Error, Rating, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidArgument(alloc::format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HyperParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 strength on weight blocks (biases are never penalized).
    pub l2_weights: f64,
    /// L2 strength on embedding blocks.
    pub l2_embeddings: f64,
    /// Apply the L2 terms to the neural models too; FM is always regularized.
    pub l2_all_models: bool,
    /// Drives the per-epoch shuffles.
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub activation: Activation,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 64,
            l2_weights: 0.0,
            l2_embeddings: 0.0,
            l2_all_models: false,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            activation: Activation::Relu,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be at least 1".into()));
        }
        if !(self.l2_weights >= 0.0 && self.l2_embeddings >= 0.0) {
            return Err(Error::InvalidArgument("L2 strengths must be non-negative".into()));
        }
        Ok(())
    }

    fn regularizes(&self, kind: ModelKind) -> bool {
        (kind == ModelKind::FactorizationMachine || self.l2_all_models)
            && (self.l2_weights > 0.0 || self.l2_embeddings > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    /// Mean training MSE of each epoch, measured on the minibatches before
    /// their update.
    pub epoch_losses: Vec<f64>,
    pub model_fingerprint: u64,
}

/// MSE gradient plus the L2 terms selected by `hp`.
///
/// Per-user rows (embedding rows, FM user weights) are penalized only for
/// users present in the batch, so untouched users keep a zero gradient.
pub fn regularized_gradients(model: &Model, batch: &[Sample<'_>], hp: &HyperParams) -> Result<(Gradients, f64)> {
    let (mut grads, loss) = model.gradients(batch)?;
    if !hp.regularizes(model.kind()) {
        return Ok((grads, loss));
    }
    let mut in_batch = vec![false; model.shape().n_users];
    for s in batch {
        in_batch[s.user] = true;
    }
    for (block, g) in model.blocks().iter().zip(grads.blocks_mut()) {
        let lambda = match block.spec.role {
            BlockRole::Weight => hp.l2_weights,
            BlockRole::Embedding => hp.l2_embeddings,
            BlockRole::Bias | BlockRole::Statistic => continue,
        };
        if lambda == 0.0 {
            continue;
        }
        let cols = block.spec.cols;
        for (i, (gv, v)) in g.values.iter_mut().zip(block.values).enumerate() {
            if block.spec.per_user && !in_batch[i / cols] {
                continue;
            }
            *gv += 2.0 * lambda * v;
        }
    }
    Ok((grads, loss))
}

/// Plain SGD or bias-corrected adaptive moments (β = 0.9, 0.999).
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    steps: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, model: &Model) -> Self {
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = model.blocks().iter().map(|b| vec![0.0; b.values.len()]).collect();
                (zeros.clone(), zeros)
            }
        };
        Optimizer { kind, learning_rate, steps: 0, first, second }
    }

    pub fn step(&mut self, model: &mut Model, grads: &Gradients) {
        self.steps = self.steps.saturating_add(1);
        let lr = self.learning_rate;
        let (c1, c2) = (1.0 - libm::pow(BETA1, self.steps as f64), 1.0 - libm::pow(BETA2, self.steps as f64));
        for (bi, (param, grad)) in model.blocks_mut().into_iter().zip(grads.blocks()).enumerate() {
            if param.spec.role == BlockRole::Statistic {
                continue;
            }
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, g) in param.values.iter_mut().zip(grad.values) {
                        *p -= lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let m = &mut self.first[bi];
                    let v = &mut self.second[bi];
                    for i in 0..param.values.len() {
                        let g = grad.values[i];
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
                        if m[i] != 0.0 {
                            let m_hat = m[i] / c1;
                            let v_hat = v[i] / c2;
                            param.values[i] -= lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS);
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn check_items(ratings: &[Rating], features: &DenseMatrix) -> Result<()> {
    for r in ratings {
        if r.item >= features.rows() {
            return Err(Error::ItemOutOfRange { item: r.item, n_items: features.rows() });
        }
    }
    Ok(())
}

pub fn train(
    model: Model,
    ratings: &[Rating],
    features: &DenseMatrix,
    hp: &HyperParams,
) -> Result<(Model, TrainTrace)> {
    train_with(model, ratings, features, hp, |_, _| {})
}

/// Trains for exactly `hp.epochs` passes; `on_epoch(epoch, loss)` is called
/// after every pass.
pub fn train_with(
    mut model: Model,
    ratings: &[Rating],
    features: &DenseMatrix,
    hp: &HyperParams,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Model, TrainTrace)> {
    hp.validate()?;
    if ratings.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_items(ratings, features)?;
    model.fit_statistics(ratings)?;

    let mut optimizer = Optimizer::new(hp.optimizer, hp.learning_rate, &model);
    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    let mut order: Vec<usize> = Vec::with_capacity(ratings.len());
    let diverged = |epoch| Error::Diverged { epoch, learning_rate: hp.learning_rate };

    for epoch in 0..hp.epochs {
        order.clear();
        order.extend(0..ratings.len());
        SeededRng::for_stream(hp.seed, epoch as u64).shuffle(&mut order);

        let mut total = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<Sample<'_>> = chunk
                .iter()
                .map(|&i| {
                    let r = &ratings[i];
                    Sample { x: features.row(r.item), user: r.user, target: r.value }
                })
                .collect();
            let (grads, loss) = match regularized_gradients(&model, &batch, hp) {
                Ok(v) => v,
                Err(Error::NonFinite { .. }) => return Err(diverged(epoch)),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(diverged(epoch));
            }
            total += loss * batch.len() as f64;
            optimizer.step(&mut model, &grads);
        }
        let loss = total / ratings.len() as f64;
        if !loss.is_finite() || !model.is_finite() {
            return Err(diverged(epoch));
        }
        epoch_losses.push(loss);
        on_epoch(epoch, loss);
    }

    let model_fingerprint = model.fingerprint();
    Ok((model, TrainTrace { epoch_losses, model_fingerprint }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub params: HyperParams,
    /// Validation RMSE; `None` when training diverged.
    pub rmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOutcome {
    pub best: HyperParams,
    pub best_rmse: f64,
    pub points: Vec<GridPoint>,
}

/// Trains one model per grid point and keeps the lowest validation RMSE.
/// Ties go to the lower learning rate, then to fewer epochs.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    kind: ModelKind,
    z: usize,
    shape: Shape,
    grid: &[HyperParams],
    train_set: &[Rating],
    validation: &[Rating],
    features: &DenseMatrix,
    init_seed: u64,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    if validation.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut points = Vec::with_capacity(grid.len());
    for hp in grid {
        let model = init_model(kind, z, shape, hp.activation, &mut SeededRng::new(init_seed))?;
        let score = match train(model, train_set, features, hp) {
            Ok((model, _)) => {
                let preds = predict_ratings(&model, validation, features, false)?;
                let targets: Vec<f64> = validation.iter().map(|r| r.value).collect();
                Some(rmse(&preds, &targets)?).filter(|v| v.is_finite())
            }
            Err(Error::Diverged { .. }) => None,
            Err(e) => return Err(e),
        };
        points.push(GridPoint { params: *hp, rmse: score });
    }
    let best = points
        .iter()
        .filter_map(|p| p.rmse.map(|r| (p, r)))
        .min_by(|(a, ra), (b, rb)| {
            ra.total_cmp(rb)
                .then(a.params.learning_rate.total_cmp(&b.params.learning_rate))
                .then(a.params.epochs.cmp(&b.params.epochs))
        })
        .map(|(p, r)| (p.params, r));
    match best {
        Some((best, best_rmse)) => Ok(GridOutcome { best, best_rmse, points }),
        None => Err(Error::Diverged { epoch: 0, learning_rate: grid[0].learning_rate }),
    }
}
