use alloc::vec;
use alloc::vec::Vec;

use super::EMBEDDING_INIT;
use super::{fill_fan_balanced, fill_uniform, BlockRole, BlockSpec, ParamBlock, ParamBlockMut, Shape};
use crate::numerics::{axpy, dot_unchecked, DenseMatrix, DenseVector, SeededRng};
use crate::{Error, Result};

/// Single linear layer whose weights depend on the user:
/// `y = b + (W + e·T)·x + u_b·e` with `e = E[u]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorParams {
    /// Context-free feature weights.
    pub w: DenseVector,
    pub b: f64,
    /// z × n_features; row `k` is the slice contracted with `e[k]`.
    pub t: DenseMatrix,
    /// n_users × z
    pub embeddings: DenseMatrix,
    /// Maps an embedding to the general user bias.
    pub user_bias: DenseVector,
}

/// The three additive parts of a tensor-fusion prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TensorComponents {
    /// `b + W·x`, independent of the user.
    pub item: f64,
    /// `u_b·e`, independent of the item.
    pub user: f64,
    /// `(e·T)·x`, the user-dependent change in feature weights.
    pub interaction: f64,
}

impl TensorComponents {
    pub fn total(&self) -> f64 {
        self.item + self.user + self.interaction
    }
}

impl TensorParams {
    pub(crate) fn zeros(shape: Shape, z: usize) -> Self {
        TensorParams {
            w: DenseVector::zeros(shape.n_features),
            b: 0.0,
            t: DenseMatrix::zeros(z, shape.n_features),
            embeddings: DenseMatrix::zeros(shape.n_users, z),
            user_bias: DenseVector::zeros(z),
        }
    }

    pub(crate) fn init(shape: Shape, z: usize, rng: &mut SeededRng) -> Self {
        let mut p = TensorParams::zeros(shape, z);
        fill_fan_balanced(rng, &mut p.w, shape.n_features, 1);
        fill_fan_balanced(rng, p.t.as_mut_slice(), shape.n_features, z);
        fill_uniform(rng, p.embeddings.as_mut_slice(), -EMBEDDING_INIT, EMBEDDING_INIT);
        fill_fan_balanced(rng, &mut p.user_bias, z, 1);
        p
    }

    pub fn z(&self) -> usize {
        self.t.rows()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.embeddings.rows(), self.w.len())
    }

    /// `e·T`: how the embedding shifts each feature weight.
    pub fn sensitivity_change(&self, embedding: &[f64]) -> Result<DenseVector> {
        self.t.vecmat(embedding)
    }

    /// `W + e·T`
    pub(crate) fn sensitivity(&self, embedding: &[f64]) -> DenseVector {
        let mut s = self.t.vecmat(embedding).expect("embedding has width z");
        for (si, wi) in s.iter_mut().zip(self.w.iter()) {
            *si += wi;
        }
        s
    }

    /// Prediction decomposition for an arbitrary embedding vector.
    pub fn components_with_embedding(&self, x: &[f64], embedding: &[f64]) -> Result<TensorComponents> {
        if x.len() != self.w.len() {
            return Err(Error::mismatch("tensor forward", (1, self.w.len()), (1, x.len())));
        }
        if embedding.len() != self.z() {
            return Err(Error::mismatch("tensor embedding", (1, self.z()), (1, embedding.len())));
        }
        Ok(self.components_unchecked(x, embedding))
    }

    pub fn components(&self, x: &[f64], user: usize) -> Result<TensorComponents> {
        if user >= self.embeddings.rows() {
            return Err(Error::UserOutOfRange { user, n_users: self.embeddings.rows() });
        }
        self.components_with_embedding(x, self.embeddings.row(user))
    }

    pub fn forward_with_embedding(&self, x: &[f64], embedding: &[f64]) -> Result<f64> {
        self.components_with_embedding(x, embedding).map(|c| c.total())
    }

    fn components_unchecked(&self, x: &[f64], e: &[f64]) -> TensorComponents {
        let interaction = self.t.iter_rows().zip(e).map(|(row, ek)| ek * dot_unchecked(row, x)).sum();
        TensorComponents {
            item: self.b + dot_unchecked(&self.w, x),
            user: dot_unchecked(&self.user_bias, e),
            interaction,
        }
    }

    pub(crate) fn predict(&self, x: &[f64], user: usize) -> f64 {
        self.components_unchecked(x, self.embeddings.row(user)).total()
    }

    pub(crate) fn accumulate(&self, x: &[f64], user: usize, g: f64, grads: &mut TensorParams) {
        let e = self.embeddings.row(user);
        grads.b += g;
        axpy(g, x, &mut grads.w);
        let tx: Vec<f64> = self.t.iter_rows().map(|row| dot_unchecked(row, x)).collect();
        for (k, ek) in e.iter().enumerate() {
            if *ek != 0.0 {
                axpy(g * ek, x, grads.t.row_mut(k));
            }
            grads.user_bias[k] += g * ek;
        }
        let grad_row = grads.embeddings.row_mut(user);
        for k in 0..grad_row.len() {
            grad_row[k] += g * (tx[k] + self.user_bias[k]);
        }
    }

    fn specs(&self) -> [BlockSpec; 5] {
        let z = self.z();
        let n = self.w.len();
        [
            BlockSpec::new("w", 1, n, BlockRole::Weight),
            BlockSpec::new("b", 1, 1, BlockRole::Bias),
            BlockSpec::new("t", z, n, BlockRole::Weight),
            BlockSpec::new("embeddings", self.embeddings.rows(), z, BlockRole::Embedding).per_user(),
            BlockSpec::new("user_bias", 1, z, BlockRole::Weight),
        ]
    }

    pub(crate) fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let [w, b, t, e, ub] = self.specs();
        vec![
            ParamBlock { spec: w, values: &self.w },
            ParamBlock { spec: b, values: core::slice::from_ref(&self.b) },
            ParamBlock { spec: t, values: self.t.as_slice() },
            ParamBlock { spec: e, values: self.embeddings.as_slice() },
            ParamBlock { spec: ub, values: &self.user_bias },
        ]
    }

    pub(crate) fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        let [w, b, t, e, ub] = self.specs();
        vec![
            ParamBlockMut { spec: w, values: &mut self.w },
            ParamBlockMut { spec: b, values: core::slice::from_mut(&mut self.b) },
            ParamBlockMut { spec: t, values: self.t.as_mut_slice() },
            ParamBlockMut { spec: e, values: self.embeddings.as_mut_slice() },
            ParamBlockMut { spec: ub, values: &mut self.user_bias },
        ]
    }
}
