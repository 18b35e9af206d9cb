use alloc::vec;
use alloc::vec::Vec;

use super::{fill_fan_balanced, BlockRole, BlockSpec, ParamBlock, ParamBlockMut, Shape};
use crate::numerics::{dot_unchecked, DenseVector, SeededRng};
use crate::{Error, Rating, Result};

/// User-mean baseline, optionally plus a learned linear function of the
/// item features (`w`, `b`). The means are statistics of the training set.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineParams {
    pub user_mean: DenseVector,
    pub global_mean: f64,
    /// Empty for the user-bias model.
    pub w: DenseVector,
    pub b: f64,
    n_features: usize,
}

impl BaselineParams {
    pub(crate) fn zeros(shape: Shape, linear: bool) -> Self {
        BaselineParams {
            user_mean: DenseVector::zeros(shape.n_users),
            global_mean: 0.0,
            w: DenseVector::zeros(if linear { shape.n_features } else { 0 }),
            b: 0.0,
            n_features: shape.n_features,
        }
    }

    pub(crate) fn user_bias(shape: Shape) -> Self {
        BaselineParams::zeros(shape, false)
    }

    pub(crate) fn linear(shape: Shape, rng: &mut SeededRng) -> Self {
        let mut p = BaselineParams::zeros(shape, true);
        fill_fan_balanced(rng, &mut p.w, shape.n_features, 1);
        p
    }

    pub fn is_linear(&self) -> bool {
        !self.w.is_empty()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.user_mean.len(), self.n_features)
    }

    /// Mean training rating per user; users without ratings get the global mean.
    pub fn fit_user_means(&mut self, ratings: &[Rating]) -> Result<()> {
        if ratings.is_empty() {
            return Err(Error::Empty("training ratings"));
        }
        let n_users = self.user_mean.len();
        let mut sums = vec![0.0; n_users];
        let mut counts: Vec<usize> = vec![0; n_users];
        let mut total = 0.0;
        for r in ratings {
            if r.user >= n_users {
                return Err(Error::UserOutOfRange { user: r.user, n_users });
            }
            sums[r.user] += r.value;
            counts[r.user] += 1;
            total += r.value;
        }
        self.global_mean = total / ratings.len() as f64;
        for u in 0..n_users {
            self.user_mean[u] = if counts[u] > 0 { sums[u] / counts[u] as f64 } else { self.global_mean };
        }
        Ok(())
    }

    pub(crate) fn predict(&self, x: &[f64], user: usize) -> f64 {
        let mut y = self.user_mean[user];
        if self.is_linear() {
            y += dot_unchecked(&self.w, x) + self.b;
        }
        y
    }

    pub(crate) fn accumulate(&self, x: &[f64], user: usize, g: f64, grads: &mut BaselineParams) {
        grads.user_mean[user] += g;
        if self.is_linear() {
            crate::numerics::axpy(g, x, &mut grads.w);
            grads.b += g;
        }
    }

    fn specs(&self) -> [BlockSpec; 4] {
        let n_users = self.user_mean.len();
        [
            BlockSpec::new("user_mean", n_users, 1, BlockRole::Statistic).per_user(),
            BlockSpec::new("global_mean", 1, 1, BlockRole::Statistic),
            BlockSpec::new("w", 1, self.w.len(), BlockRole::Weight),
            BlockSpec::new("b", 1, 1, BlockRole::Bias),
        ]
    }

    pub(crate) fn blocks(&self) -> Vec<ParamBlock<'_>> {
        let [mean, global, w, b] = self.specs();
        let mut out = vec![
            ParamBlock { spec: mean, values: &self.user_mean },
            ParamBlock { spec: global, values: core::slice::from_ref(&self.global_mean) },
        ];
        if self.is_linear() {
            out.push(ParamBlock { spec: w, values: &self.w });
            out.push(ParamBlock { spec: b, values: core::slice::from_ref(&self.b) });
        }
        out
    }

    pub(crate) fn blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        let [mean, global, w, b] = self.specs();
        let linear = self.is_linear();
        let mut out = vec![
            ParamBlockMut { spec: mean, values: &mut self.user_mean },
            ParamBlockMut { spec: global, values: core::slice::from_mut(&mut self.global_mean) },
        ];
        if linear {
            out.push(ParamBlockMut { spec: w, values: &mut self.w });
            out.push(ParamBlockMut { spec: b, values: core::slice::from_mut(&mut self.b) });
        }
        out
    }
}
