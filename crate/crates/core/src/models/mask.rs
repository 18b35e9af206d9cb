use alloc::vec;
use alloc::vec::Vec;

use super::EMBEDDING_INIT;
use super::{fill_fan_balanced, fill_uniform, Activation, BlockRole, BlockSpec, ParamBlock, ParamBlockMut, Shape};
use crate::numerics::{axpy, dot_unchecked, DenseMatrix, DenseVector, SeededRng};

/// One-hidden-layer network whose `z` hidden pre-activations are masked by
/// the user embedding, either additively or element-wise multiplicatively.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskParams {
    /// z × n_features
    pub w1: DenseMatrix,
    pub b1: DenseVector,
    /// n_users × z
    pub embeddings: DenseMatrix,
    pub w2: DenseVector,
    pub b2: f64,
    pub activation: Activation,
}

impl MaskParams {
    pub(crate) fn zeros(shape: Shape, z: usize, activation: Activation) -> Self {
        MaskParams {
            w1: DenseMatrix::zeros(z, shape.n_features),
            b1: DenseVector::zeros(z),
            embeddings: DenseMatrix::zeros(shape.n_users, z),
            w2: DenseVector::zeros(z),
            b2: 0.0,
            activation,
        }
    }

    pub(crate) fn init(
        shape: Shape,
        z: usize,
        activation: Activation,
        multiplicative: bool,
        rng: &mut SeededRng,
    ) -> Self {
        let mut p = MaskParams::zeros(shape, z, activation);
        fill_fan_balanced(rng, p.w1.as_mut_slice(), shape.n_features, z);
        let center = if multiplicative { 1.0 } else { 0.0 };
        fill_uniform(rng, p.embeddings.as_mut_slice(), center - EMBEDDING_INIT, center + EMBEDDING_INIT);
        fill_fan_balanced(rng, &mut p.w2, z, 1);
        p
    }

    pub fn z(&self) -> usize {
        self.b1.len()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.embeddings.rows(), self.w1.cols())
    }

    /// `W1·x + b1`, the hidden state before masking.
    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1.iter_rows().zip(self.b1.iter()).map(|(row, b)| dot_unchecked(row, x) + b).collect()
    }

    fn pre_activation(&self, hidden: &[f64], user: usize, multiplicative: bool) -> Vec<f64> {
        let e = self.embeddings.row(user);
        hidden.iter().zip(e).map(|(h, e)| if multiplicative { h * e } else { h + e }).collect()
    }

    fn output(&self, pre: &[f64]) -> f64 {
        pre.iter().zip(self.w2.iter()).map(|(p, w)| w * self.activation.apply(*p)).sum::<f64>() + self.b2
    }

    pub(crate) fn predict_additive(&self, x: &[f64], user: usize) -> f64 {
        let pre = self.pre_activation(&self.hidden(x), user, false);
        self.output(&pre)
    }

    pub(crate) fn predict_multiplicative(&self, x: &[f64], user: usize) -> f64 {
        let pre = self.pre_activation(&self.hidden(x), user, true);
        self.output(&pre)
    }

    /// Gradient of the output w.r.t. the unmasked hidden state `W1·x + b1`,
    /// together with the pieces needed for the remaining parameters.
    fn backward_hidden(&self, x: &[f64], user: usize, multiplicative: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hidden = self.hidden(x);
        let pre = self.pre_activation(&hidden, user, multiplicative);
        let e = self.embeddings.row(user);
        // d out / d pre
        let d_pre: Vec<f64> = pre.iter().zip(self.w2.iter()).map(|(p, w)| w * self.activation.derivative(*p)).collect();
        let d_hidden = if multiplicative { d_pre.iter().zip(e).map(|(d, e)| d * e).collect() } else { d_pre.clone() };
        let d_embedding = if multiplicative { d_pre.iter().zip(&hidden).map(|(d, h)| d * h).collect() } else { d_pre };
        (pre, d_hidden, d_embedding)
    }

    pub(crate) fn accumulate(&self, x: &[f64], user: usize, g: f64, multiplicative: bool, grads: &mut MaskParams) {
        let (pre, d_hidden, d_embedding) = self.backward_hidden(x, user, multiplicative);
        for (k, p) in pre.iter().enumerate() {
            grads.w2[k] += g * self.activation.apply(*p);
        }
        grads.b2 += g;
        for (k, dh) in d_hidden.iter().enumerate() {
            let coeff = g * dh;
            if coeff != 0.0 {
                axpy(coeff, x, grads.w1.row_mut(k));
            }
            grads.b1[k] += coeff;
        }
        let grad_row = grads.embeddings.row_mut(user);
        for (dst, de) in grad_row.iter_mut().zip(&d_embedding) {
            *dst += g * de;
        }
    }

    /// `∂y/∂x = W1ᵀ · d_hidden`
    pub(crate) fn sensitivity(&self, x: &[f64], user: usize, multiplicative: bool) -> DenseVector {
        let (_, d_hidden, _) = self.backward_hidden(x, user, multiplicative);
        let mut out = vec![0.0; x.len()];
        for (row, dh) in self.w1.iter_rows().zip(&d_hidden) {
            axpy(*dh, row, &mut out);
        }
        DenseVector::from_vec(out)
    }

    fn specs(&self) -> [BlockSpec; 5] {
        let z = self.z();
        [
            BlockSpec::new("w1", z, self.w1.cols(), BlockRole::Weight),
            BlockSpec::new("b1", 1, z, BlockRole::Bias),
            BlockSpec::new("embeddings", self.embeddings.rows(), z, BlockRole::Embedding).per_user(),
            BlockSpec::new("w2", 1, z, BlockRole::Weight),
            BlockSpec::new("b2", 1, 1, BlockRole::Bias),
        ]
    }

    pub(crate) fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let [w1, b1, e, w2, b2] = self.specs();
        vec![
            ParamBlock { spec: w1, values: self.w1.as_slice() },
            ParamBlock { spec: b1, values: &self.b1 },
            ParamBlock { spec: e, values: self.embeddings.as_slice() },
            ParamBlock { spec: w2, values: &self.w2 },
            ParamBlock { spec: b2, values: core::slice::from_ref(&self.b2) },
        ]
    }

    pub(crate) fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        let [w1, b1, e, w2, b2] = self.specs();
        vec![
            ParamBlockMut { spec: w1, values: self.w1.as_mut_slice() },
            ParamBlockMut { spec: b1, values: &mut self.b1 },
            ParamBlockMut { spec: e, values: self.embeddings.as_mut_slice() },
            ParamBlockMut { spec: w2, values: &mut self.w2 },
            ParamBlockMut { spec: b2, values: core::slice::from_mut(&mut self.b2) },
        ]
    }
}
