//! The six rating-prediction architectures.
//!
//! Every model maps dense item features `x` (one row of the feature table) and
//! a user index `u` to a scalar rating. The fusion models keep a learnable
//! embedding per user; the baselines use the user's mean training rating.
//!
//! Parameters are stored as named blocks ([`BlockSpec`]). Gradients share the
//! exact block layout of their model, which is what the optimizers, the
//! text serializer and the finite-difference tests iterate over.

mod baseline;
mod fm;
mod mask;
mod tensor;

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use baseline::BaselineParams;
pub use fm::{fm_t_forward, FmParams};
pub use mask::MaskParams;
pub use tensor::{TensorComponents, TensorParams};

use crate::numerics::{DenseMatrix, DenseVector, SeededRng};
use crate::{Error, Result};

/// Users in MovieLens-100k.
pub const MOVIELENS_USERS: usize = 943;
/// Tags in the MovieLens-20M tag genome.
pub const GENOME_TAGS: usize = 1128;

/// Embedding sizes swept by the experiment grid.
pub const EMBEDDING_SIZES: [usize; 6] = [2, 4, 8, 16, 32, 64];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "&'static str", try_from = "&str"))]
pub enum ModelKind {
    UserBias,
    Linear,
    AdditiveMask,
    MultiplicativeMask,
    TensorFusion,
    FactorizationMachine,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::UserBias,
        ModelKind::Linear,
        ModelKind::FactorizationMachine,
        ModelKind::AdditiveMask,
        ModelKind::MultiplicativeMask,
        ModelKind::TensorFusion,
    ];

    pub const EMBEDDING_KINDS: [ModelKind; 4] = [
        ModelKind::FactorizationMachine,
        ModelKind::AdditiveMask,
        ModelKind::MultiplicativeMask,
        ModelKind::TensorFusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::UserBias => "user-bias",
            ModelKind::Linear => "linear",
            ModelKind::AdditiveMask => "add",
            ModelKind::MultiplicativeMask => "mul",
            ModelKind::TensorFusion => "tensor",
            ModelKind::FactorizationMachine => "fm",
        }
    }

    /// Baselines have no embedding size; their `z` is ignored.
    pub fn is_baseline(self) -> bool {
        matches!(self, ModelKind::UserBias | ModelKind::Linear)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "user-bias" | "userbias" => ModelKind::UserBias,
            "linear" => ModelKind::Linear,
            "add" | "additive" => ModelKind::AdditiveMask,
            "mul" | "multiplicative" => ModelKind::MultiplicativeMask,
            "tensor" => ModelKind::TensorFusion,
            "fm" => ModelKind::FactorizationMachine,
            other => return Err(Error::InvalidArgument(alloc::format!("unknown model kind `{other}`"))),
        })
    }
}

impl From<ModelKind> for &'static str {
    fn from(kind: ModelKind) -> Self {
        kind.as_str()
    }
}

impl TryFrom<&str> for ModelKind {
    type Error = Error;

    fn try_from(s: &str) -> Result<Self> {
        s.parse()
    }
}

/// Hidden-layer nonlinearity of the mask models.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "&'static str", try_from = "&str"))]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => libm::tanh(v),
            Activation::Identity => v,
        }
    }

    /// Derivative at pre-activation `v`. The rectifier uses 0 at the kink.
    #[inline]
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = libm::tanh(v);
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(alloc::format!("unknown activation `{other}`"))),
        }
    }
}

impl From<Activation> for &'static str {
    fn from(a: Activation) -> Self {
        a.as_str()
    }
}

impl TryFrom<&str> for Activation {
    type Error = Error;

    fn try_from(s: &str) -> Result<Self> {
        s.parse()
    }
}

/// Problem dimensions: number of users and item-feature width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Shape {
    pub n_users: usize,
    pub n_features: usize,
}

impl Shape {
    pub const MOVIELENS: Shape = Shape { n_users: MOVIELENS_USERS, n_features: GENOME_TAGS };

    pub fn new(n_users: usize, n_features: usize) -> Self {
        Shape { n_users, n_features }
    }
}

impl Default for Shape {
    fn default() -> Self {
        Shape::MOVIELENS
    }
}

/// Parameter count on the MovieLens shape (943 users, 1128 tag features).
pub fn param_count(kind: ModelKind, z: usize) -> usize {
    param_count_for(kind, z, Shape::MOVIELENS)
}

pub fn param_count_for(kind: ModelKind, z: usize, shape: Shape) -> usize {
    let Shape { n_users: u, n_features: n } = shape;
    match kind {
        // user means + the global fallback mean; not learned by descent
        ModelKind::UserBias => u + 1,
        ModelKind::Linear => u + 1 + n + 1,
        // W1, b1, E, w2, b2
        ModelKind::AdditiveMask | ModelKind::MultiplicativeMask => z * n + z + u * z + z + 1,
        // W, b, T, E, u_b
        ModelKind::TensorFusion => n + 1 + z * n + u * z + z,
        // b, W over features and users, V over features and users
        ModelKind::FactorizationMachine => 1 + (n + u) + (n + u) * z,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockRole {
    Weight,
    Bias,
    Embedding,
    /// Fitted from data statistics, never updated by an optimizer.
    Statistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub role: BlockRole,
    /// Row `i` belongs to user `i`.
    pub per_user: bool,
}

impl BlockSpec {
    pub(crate) const fn new(name: &'static str, rows: usize, cols: usize, role: BlockRole) -> Self {
        BlockSpec { name, rows, cols, role, per_user: false }
    }

    pub(crate) const fn per_user(mut self) -> Self {
        self.per_user = true;
        self
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamBlock<'a> {
    pub spec: BlockSpec,
    pub values: &'a [f64],
}

#[derive(Debug)]
pub struct ParamBlockMut<'a> {
    pub spec: BlockSpec,
    pub values: &'a mut [f64],
}

/// One training or evaluation example.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub user: usize,
    pub target: f64,
}

/// Per-user vectors extracted from a trained model.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmbeddingTable {
    vectors: DenseMatrix,
}

impl EmbeddingTable {
    pub fn new(vectors: DenseMatrix) -> Self {
        EmbeddingTable { vectors }
    }

    pub fn n_users(&self) -> usize {
        self.vectors.rows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn get(&self, user: usize) -> &[f64] {
        self.vectors.row(user)
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.vectors
    }
}

/// A model of any of the six kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    UserBias(BaselineParams),
    Linear(BaselineParams),
    AdditiveMask(MaskParams),
    MultiplicativeMask(MaskParams),
    TensorFusion(TensorParams),
    FactorizationMachine(FmParams),
}

/// Analytic gradient with the block layout of the model it was taken from.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    inner: Model,
}

impl Gradients {
    pub fn blocks(&self) -> Vec<ParamBlock<'_>> {
        self.inner.blocks()
    }

    pub fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        self.inner.blocks_mut()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.inner.block(name)
    }

    /// The gradient viewed as a model with the same parameters layout.
    pub fn as_model(&self) -> &Model {
        &self.inner
    }

    fn check_finite(&self) -> Result<()> {
        for b in self.blocks() {
            if !b.values.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { param: b.spec.name.to_string() });
            }
        }
        Ok(())
    }
}

fn fan_balanced(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

pub(crate) fn fill_uniform(rng: &mut SeededRng, values: &mut [f64], lo: f64, hi: f64) {
    for v in values {
        *v = rng.uniform(lo, hi);
    }
}

pub(crate) fn fill_fan_balanced(rng: &mut SeededRng, values: &mut [f64], fan_in: usize, fan_out: usize) {
    let a = fan_balanced(fan_in, fan_out);
    fill_uniform(rng, values, -a, a);
}

pub(crate) const EMBEDDING_INIT: f64 = 0.05;

/// Fresh model with deterministic initialization: fan-balanced uniform weight
/// matrices, zero biases, embedding rows in ±0.05 (multiplicative masks
/// around 1 so the mask starts near identity).
pub fn init_model(
    kind: ModelKind,
    z: usize,
    shape: Shape,
    activation: Activation,
    rng: &mut SeededRng,
) -> Result<Model> {
    if z == 0 && !kind.is_baseline() {
        return Err(Error::InvalidArgument(alloc::format!("embedding size must be positive for `{kind}`")));
    }
    Ok(match kind {
        ModelKind::UserBias => Model::UserBias(BaselineParams::user_bias(shape)),
        ModelKind::Linear => Model::Linear(BaselineParams::linear(shape, rng)),
        ModelKind::AdditiveMask => Model::AdditiveMask(MaskParams::init(shape, z, activation, false, rng)),
        ModelKind::MultiplicativeMask => Model::MultiplicativeMask(MaskParams::init(shape, z, activation, true, rng)),
        ModelKind::TensorFusion => Model::TensorFusion(TensorParams::init(shape, z, rng)),
        ModelKind::FactorizationMachine => Model::FactorizationMachine(FmParams::init(shape, z, rng)),
    })
}

impl Model {
    /// All-zero parameters of the given layout, used by deserialization.
    pub fn zeros(kind: ModelKind, z: usize, shape: Shape, activation: Activation) -> Model {
        match kind {
            ModelKind::UserBias => Model::UserBias(BaselineParams::zeros(shape, false)),
            ModelKind::Linear => Model::Linear(BaselineParams::zeros(shape, true)),
            ModelKind::AdditiveMask => Model::AdditiveMask(MaskParams::zeros(shape, z, activation)),
            ModelKind::MultiplicativeMask => Model::MultiplicativeMask(MaskParams::zeros(shape, z, activation)),
            ModelKind::TensorFusion => Model::TensorFusion(TensorParams::zeros(shape, z)),
            ModelKind::FactorizationMachine => Model::FactorizationMachine(FmParams::zeros(shape, z)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::UserBias(_) => ModelKind::UserBias,
            Model::Linear(_) => ModelKind::Linear,
            Model::AdditiveMask(_) => ModelKind::AdditiveMask,
            Model::MultiplicativeMask(_) => ModelKind::MultiplicativeMask,
            Model::TensorFusion(_) => ModelKind::TensorFusion,
            Model::FactorizationMachine(_) => ModelKind::FactorizationMachine,
        }
    }

    /// Embedding size; 0 for the baselines.
    pub fn z(&self) -> usize {
        match self {
            Model::UserBias(_) | Model::Linear(_) => 0,
            Model::AdditiveMask(p) | Model::MultiplicativeMask(p) => p.z(),
            Model::TensorFusion(p) => p.z(),
            Model::FactorizationMachine(p) => p.z(),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Model::UserBias(p) | Model::Linear(p) => p.shape(),
            Model::AdditiveMask(p) | Model::MultiplicativeMask(p) => p.shape(),
            Model::TensorFusion(p) => p.shape(),
            Model::FactorizationMachine(p) => p.shape(),
        }
    }

    /// Activation of the hidden layer; models without one report identity.
    pub fn activation(&self) -> Activation {
        match self {
            Model::AdditiveMask(p) | Model::MultiplicativeMask(p) => p.activation,
            _ => Activation::Identity,
        }
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.values.len()).sum()
    }

    pub fn blocks(&self) -> Vec<ParamBlock<'_>> {
        match self {
            Model::UserBias(p) | Model::Linear(p) => p.blocks(),
            Model::AdditiveMask(p) | Model::MultiplicativeMask(p) => p.blocks(),
            Model::TensorFusion(p) => p.blocks(),
            Model::FactorizationMachine(p) => p.blocks(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        match self {
            Model::UserBias(p) | Model::Linear(p) => p.blocks_mut(),
            Model::AdditiveMask(p) | Model::MultiplicativeMask(p) => p.blocks_mut(),
            Model::TensorFusion(p) => p.blocks_mut(),
            Model::FactorizationMachine(p) => p.blocks_mut(),
        }
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks().into_iter().find(|b| b.spec.name == name).map(|b| b.values)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.values.iter().all(|v| v.is_finite()))
    }

    /// FNV-1a over the bit patterns of all parameters, in block order.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for block in self.blocks() {
            for byte in block.spec.name.bytes() {
                h = (h ^ byte as u64).wrapping_mul(0x0100_0000_01b3);
            }
            for v in block.values {
                for byte in v.to_bits().to_le_bytes() {
                    h = (h ^ byte as u64).wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    fn check_input(&self, x: &[f64], user: usize) -> Result<()> {
        let shape = self.shape();
        if x.len() != shape.n_features {
            return Err(Error::mismatch("forward", (1, shape.n_features), (1, x.len())));
        }
        if user >= shape.n_users {
            return Err(Error::UserOutOfRange { user, n_users: shape.n_users });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], user: usize) -> Result<f64> {
        self.check_input(x, user)?;
        Ok(self.predict(x, user))
    }

    /// Unchecked forward pass; callers guarantee `x` and `user` are in range.
    pub(crate) fn predict(&self, x: &[f64], user: usize) -> f64 {
        match self {
            Model::UserBias(p) | Model::Linear(p) => p.predict(x, user),
            Model::AdditiveMask(p) => p.predict_additive(x, user),
            Model::MultiplicativeMask(p) => p.predict_multiplicative(x, user),
            Model::TensorFusion(p) => p.predict(x, user),
            Model::FactorizationMachine(p) => p.predict(x, user),
        }
    }

    /// Gradient of the batch mean squared error, and that error.
    pub fn gradients(&self, batch: &[Sample<'_>]) -> Result<(Gradients, f64)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        for s in batch {
            self.check_input(s.x, s.user)?;
        }
        let mut grads = self.zeros_like();
        let scale = 2.0 / batch.len() as f64;
        let mut loss = 0.0;
        for s in batch {
            let residual = self.predict(s.x, s.user) - s.target;
            if !residual.is_finite() {
                return Err(Error::NonFinite { param: "prediction".to_string() });
            }
            loss += residual * residual;
            let g = scale * residual;
            match (self, &mut grads.inner) {
                (Model::UserBias(p), Model::UserBias(gp)) | (Model::Linear(p), Model::Linear(gp)) => {
                    p.accumulate(s.x, s.user, g, gp)
                }
                (Model::AdditiveMask(p), Model::AdditiveMask(gp)) => p.accumulate(s.x, s.user, g, false, gp),
                (Model::MultiplicativeMask(p), Model::MultiplicativeMask(gp)) => p.accumulate(s.x, s.user, g, true, gp),
                (Model::TensorFusion(p), Model::TensorFusion(gp)) => p.accumulate(s.x, s.user, g, gp),
                (Model::FactorizationMachine(p), Model::FactorizationMachine(gp)) => p.accumulate(s.x, s.user, g, gp),
                _ => unreachable!("gradient layout mirrors the model"),
            }
        }
        grads.check_finite()?;
        Ok((grads, loss / batch.len() as f64))
    }

    pub(crate) fn zeros_like(&self) -> Gradients {
        Gradients { inner: Model::zeros(self.kind(), self.z(), self.shape(), self.activation()) }
    }

    /// The user's embedding: `E[u]` for mask and tensor models, the user's
    /// `V` row followed by its linear weight for FM, `[mean]` for baselines.
    pub fn embedding_of(&self, user: usize) -> Result<DenseVector> {
        let n_users = self.shape().n_users;
        if user >= n_users {
            return Err(Error::UserOutOfRange { user, n_users });
        }
        Ok(match self {
            Model::UserBias(p) | Model::Linear(p) => DenseVector::from_vec(alloc::vec![p.user_mean[user]]),
            Model::AdditiveMask(p) | Model::MultiplicativeMask(p) => p.embeddings.row(user).into(),
            Model::TensorFusion(p) => p.embeddings.row(user).into(),
            Model::FactorizationMachine(p) => p.user_embedding(user),
        })
    }

    pub fn embedding_table(&self) -> EmbeddingTable {
        let n_users = self.shape().n_users;
        let rows: Vec<DenseVector> = (0..n_users).map(|u| self.embedding_of(u).expect("user in range")).collect();
        EmbeddingTable::new(DenseMatrix::from_rows(&rows).expect("equal embedding widths"))
    }

    /// Partial derivatives of the prediction with respect to the item
    /// features. Models whose sensitivity depends on the input (mask models,
    /// FM) require `x`; tensor fusion and the baselines reject it.
    pub fn sensitivity(&self, user: usize, x: Option<&[f64]>) -> Result<DenseVector> {
        let shape = self.shape();
        if user >= shape.n_users {
            return Err(Error::UserOutOfRange { user, n_users: shape.n_users });
        }
        let needs_input =
            matches!(self, Model::AdditiveMask(_) | Model::MultiplicativeMask(_) | Model::FactorizationMachine(_));
        match (needs_input, x) {
            (true, None) => {
                return Err(Error::Usage(alloc::format!(
                    "`{}` sensitivities depend on the input; pass the item features",
                    self.kind()
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Usage(alloc::format!(
                    "`{}` sensitivities are input-independent; do not pass item features",
                    self.kind()
                )))
            }
            _ => {}
        }
        if let Some(x) = x {
            self.check_input(x, user)?;
        }
        Ok(match self {
            Model::UserBias(_) => DenseVector::zeros(shape.n_features),
            Model::Linear(p) => p.w.clone(),
            Model::TensorFusion(p) => p.sensitivity(p.embeddings.row(user)),
            Model::AdditiveMask(p) => p.sensitivity(x.unwrap(), user, false),
            Model::MultiplicativeMask(p) => p.sensitivity(x.unwrap(), user, true),
            Model::FactorizationMachine(p) => p.sensitivity(x.unwrap(), user),
        })
    }

    pub fn as_tensor(&self) -> Result<&TensorParams> {
        match self {
            Model::TensorFusion(p) => Ok(p),
            other => {
                Err(Error::WrongModelKind { expected: ModelKind::TensorFusion.as_str(), found: other.kind().as_str() })
            }
        }
    }

    /// Baselines take their user means from the training ratings; a no-op
    /// for the other kinds.
    pub fn fit_statistics(&mut self, ratings: &[crate::Rating]) -> Result<()> {
        match self {
            Model::UserBias(p) | Model::Linear(p) => p.fit_user_means(ratings),
            _ => Ok(()),
        }
    }
}
