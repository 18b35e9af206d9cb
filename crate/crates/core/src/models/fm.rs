use alloc::vec;
use alloc::vec::Vec;

use super::EMBEDDING_INIT;
use super::{fill_fan_balanced, fill_uniform, BlockRole, BlockSpec, ParamBlock, ParamBlockMut, Shape};
use crate::numerics::{dot_unchecked, DenseMatrix, DenseVector, SeededRng};
use crate::{Error, Result};

/// Degree-2 factorization machine over `[x ; onehot(u)]`.
///
/// The full weight vector `W` and factor matrix `V` have `n_features +
/// n_users` rows; they are stored split into the feature part and the user
/// part so the one-hot block is never materialized.
#[derive(Clone, Debug, PartialEq)]
pub struct FmParams {
    pub b: f64,
    pub w_features: DenseVector,
    /// Linear weight of each user's indicator, i.e. the learned user bias.
    pub w_users: DenseVector,
    /// n_features × z
    pub v_features: DenseMatrix,
    /// n_users × z
    pub v_users: DenseMatrix,
}

impl FmParams {
    pub(crate) fn zeros(shape: Shape, z: usize) -> Self {
        FmParams {
            b: 0.0,
            w_features: DenseVector::zeros(shape.n_features),
            w_users: DenseVector::zeros(shape.n_users),
            v_features: DenseMatrix::zeros(shape.n_features, z),
            v_users: DenseMatrix::zeros(shape.n_users, z),
        }
    }

    pub(crate) fn init(shape: Shape, z: usize, rng: &mut SeededRng) -> Self {
        let n = shape.n_features + shape.n_users;
        let mut p = FmParams::zeros(shape, z);
        fill_fan_balanced(rng, &mut p.w_features, n, 1);
        fill_fan_balanced(rng, &mut p.w_users, n, 1);
        fill_fan_balanced(rng, p.v_features.as_mut_slice(), shape.n_features, z);
        fill_uniform(rng, p.v_users.as_mut_slice(), -EMBEDDING_INIT, EMBEDDING_INIT);
        p
    }

    /// Builds the split representation from a full `W` (length n) and `V`
    /// (n × z) where the first `n_features` rows belong to item features.
    pub fn from_full(b: f64, w: &[f64], v: &DenseMatrix, n_features: usize) -> Result<Self> {
        let n = w.len();
        if v.rows() != n || n_features > n {
            return Err(Error::mismatch("fm parameters", (n, 1), v.shape()));
        }
        let z = v.cols();
        let n_users = n - n_features;
        let mut p = FmParams::zeros(Shape::new(n_users, n_features), z);
        p.b = b;
        p.w_features.copy_from_slice(&w[..n_features]);
        p.w_users.copy_from_slice(&w[n_features..]);
        p.v_features.as_mut_slice().copy_from_slice(&v.as_slice()[..n_features * z]);
        p.v_users.as_mut_slice().copy_from_slice(&v.as_slice()[n_features * z..]);
        Ok(p)
    }

    pub fn z(&self) -> usize {
        self.v_features.cols()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.w_users.len(), self.w_features.len())
    }

    /// Total input width `n_features + n_users`.
    pub fn input_len(&self) -> usize {
        self.w_features.len() + self.w_users.len()
    }

    pub fn weights_full(&self) -> DenseVector {
        self.w_features.iter().chain(self.w_users.iter()).copied().collect()
    }

    pub fn factors_full(&self) -> DenseMatrix {
        let mut values = self.v_features.as_slice().to_vec();
        values.extend_from_slice(self.v_users.as_slice());
        DenseMatrix::from_vec(self.input_len(), self.z(), values).expect("consistent shape")
    }

    fn factor_row(&self, i: usize) -> &[f64] {
        let n_f = self.w_features.len();
        if i < n_f {
            self.v_features.row(i)
        } else {
            self.v_users.row(i - n_f)
        }
    }

    /// User embedding: the user's row of `V` followed by the user's bias.
    pub fn user_embedding(&self, user: usize) -> DenseVector {
        let mut e = self.v_users.row(user).to_vec();
        e.push(self.w_users[user]);
        DenseVector::from_vec(e)
    }

    /// `q_f = Σ_i V_if x_i + V_uf` and `s_f = Σ_i V_if² x_i² + V_uf²`.
    fn factor_sums(&self, x: &[f64], user: usize) -> (Vec<f64>, Vec<f64>) {
        let mut q = self.v_users.row(user).to_vec();
        let mut s: Vec<f64> = q.iter().map(|v| v * v).collect();
        for (row, &xi) in self.v_features.iter_rows().zip(x) {
            if xi == 0.0 {
                continue;
            }
            for f in 0..q.len() {
                let vx = row[f] * xi;
                q[f] += vx;
                s[f] += vx * vx;
            }
        }
        (q, s)
    }

    pub(crate) fn predict(&self, x: &[f64], user: usize) -> f64 {
        let (q, s) = self.factor_sums(x, user);
        let pairwise: f64 = q.iter().zip(&s).map(|(q, s)| q * q - s).sum();
        self.b + dot_unchecked(&self.w_features, x) + self.w_users[user] + 0.5 * pairwise
    }

    /// FM model equation on an arbitrary dense input of width
    /// `n_features + n_users`, via `½Σ_f[(Σ_i V_if x_i)² − Σ_i V_if² x_i²]`.
    pub fn forward_dense(&self, x: &[f64]) -> Result<f64> {
        self.check_dense(x)?;
        let z = self.z();
        let mut q = vec![0.0; z];
        let mut s = vec![0.0; z];
        for (i, &xi) in x.iter().enumerate() {
            let row = self.factor_row(i);
            for f in 0..z {
                let vx = row[f] * xi;
                q[f] += vx;
                s[f] += vx * vx;
            }
        }
        let pairwise: f64 = q.iter().zip(&s).map(|(q, s)| q * q - s).sum();
        Ok(self.linear_part(x) + 0.5 * pairwise)
    }

    /// `b + W·x` on a dense input of full width.
    pub fn linear_part(&self, x: &[f64]) -> f64 {
        let n_f = self.w_features.len();
        self.b + dot_unchecked(&self.w_features, &x[..n_f]) + dot_unchecked(&self.w_users, &x[n_f..])
    }

    fn check_dense(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::mismatch("fm forward", (1, self.input_len()), (1, x.len())));
        }
        Ok(())
    }

    /// `V Vᵀ`, the factorized interaction tensor of the full-sum variant.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.input_len();
        let mut g = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot_unchecked(self.factor_row(i), self.factor_row(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// Full-double-sum variant through a precomputed `V Vᵀ`: `b + W·x + xᵀ(VVᵀ)x`.
    pub fn fm_t_forward_gram(&self, gram: &DenseMatrix, x: &[f64]) -> Result<f64> {
        self.check_dense(x)?;
        let gx = gram.matvec(x)?;
        Ok(self.linear_part(x) + dot_unchecked(x, &gx))
    }

    pub(crate) fn accumulate(&self, x: &[f64], user: usize, g: f64, grads: &mut FmParams) {
        let (q, _) = self.factor_sums(x, user);
        grads.b += g;
        grads.w_users[user] += g;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            grads.w_features[i] += g * xi;
            let v = self.v_features.row(i);
            let gv = grads.v_features.row_mut(i);
            for f in 0..q.len() {
                gv[f] += g * (xi * q[f] - v[f] * xi * xi);
            }
        }
        let v = self.v_users.row(user);
        let gv = grads.v_users.row_mut(user);
        for f in 0..q.len() {
            gv[f] += g * (q[f] - v[f]);
        }
    }

    /// `∂y/∂x_i = W_i + Σ_f V_if q_f − x_i ‖V_i‖²`
    pub(crate) fn sensitivity(&self, x: &[f64], user: usize) -> DenseVector {
        let (q, _) = self.factor_sums(x, user);
        self.v_features
            .iter_rows()
            .zip(x)
            .zip(self.w_features.iter())
            .map(|((row, xi), wi)| wi + dot_unchecked(row, &q) - xi * dot_unchecked(row, row))
            .collect()
    }

    fn specs(&self) -> [BlockSpec; 5] {
        let z = self.z();
        let n_f = self.w_features.len();
        let n_u = self.w_users.len();
        [
            BlockSpec::new("b", 1, 1, BlockRole::Bias),
            BlockSpec::new("w_features", 1, n_f, BlockRole::Weight),
            BlockSpec::new("w_users", n_u, 1, BlockRole::Weight).per_user(),
            BlockSpec::new("v_features", n_f, z, BlockRole::Embedding),
            BlockSpec::new("v_users", n_u, z, BlockRole::Embedding).per_user(),
        ]
    }

    pub(crate) fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let [b, wf, wu, vf, vu] = self.specs();
        vec![
            ParamBlock { spec: b, values: core::slice::from_ref(&self.b) },
            ParamBlock { spec: wf, values: &self.w_features },
            ParamBlock { spec: wu, values: &self.w_users },
            ParamBlock { spec: vf, values: self.v_features.as_slice() },
            ParamBlock { spec: vu, values: self.v_users.as_slice() },
        ]
    }

    pub(crate) fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        let [b, wf, wu, vf, vu] = self.specs();
        vec![
            ParamBlockMut { spec: b, values: core::slice::from_mut(&mut self.b) },
            ParamBlockMut { spec: wf, values: &mut self.w_features },
            ParamBlockMut { spec: wu, values: &mut self.w_users },
            ParamBlockMut { spec: vf, values: self.v_features.as_mut_slice() },
            ParamBlockMut { spec: vu, values: self.v_users.as_mut_slice() },
        ]
    }
}

/// Full-double-sum FM variant `b + W·x + (xV)Vᵀx`, which
/// includes the diagonal terms `i = j` that the FM equation leaves out.
pub fn fm_t_forward(model: &FmParams, x: &[f64]) -> Result<f64> {
    model.check_dense(x)?;
    let z = model.z();
    let mut xv = vec![0.0; z];
    for (i, &xi) in x.iter().enumerate() {
        let row = model.factor_row(i);
        for f in 0..z {
            xv[f] += xi * row[f];
        }
    }
    // (xV)Vᵀ, contracted with x
    let interaction: f64 = x.iter().enumerate().map(|(i, xi)| xi * dot_unchecked(&xv, model.factor_row(i))).sum();
    Ok(model.linear_part(x) + interaction)
}
