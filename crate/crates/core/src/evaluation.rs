//! Prediction error metrics and pair-distance correlation (PDC).
//!
//! PDC asks whether users who rate alike also sit close together in the
//! embedding space. For every unordered pair of users that share at least
//! `t` rated items it records the distance between their ratings on those
//! shared items (`d_U`) and the distance between their embeddings (`d_E`);
//! the score is the Pearson correlation of the two lists. Random embeddings
//! score near 0, perfectly distance-preserving ones score 1.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::models::{EmbeddingTable, Model, ModelKind};
use crate::numerics::{euclidean, DenseMatrix};
use crate::training::check_items;
use crate::{Error, Rating, Result};

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    if pred.len() != target.len() {
        return Err(Error::mismatch("metric", (pred.len(), 1), (target.len(), 1)));
    }
    Ok(())
}

pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    mse(pred, target).map(libm::sqrt)
}

/// Model predictions for each rating, optionally clamped to the 1–5 scale.
pub fn predict_ratings(model: &Model, ratings: &[Rating], features: &DenseMatrix, clamp: bool) -> Result<Vec<f64>> {
    check_items(ratings, features)?;
    ratings
        .iter()
        .map(|r| {
            let y = model.forward(features.row(r.item), r.user)?;
            Ok(if clamp { y.clamp(1.0, 5.0) } else { y })
        })
        .collect()
}

/// Pearson correlation coefficient. Undefined (an error) when either list
/// is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::mismatch("pearson", (a.len(), 1), (b.len(), 1)));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations"));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((cov / libm::sqrt(var_a * var_b)).clamp(-1.0, 1.0))
}

/// Distance between two users' ratings over their commonly rated items.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum UserDistance {
    #[default]
    #[cfg_attr(feature = "serde", serde(rename = "msd", alias = "mean_squared_difference"))]
    MeanSquaredDifference,
    #[cfg_attr(feature = "serde", serde(rename = "mad", alias = "mean_absolute_difference"))]
    MeanAbsoluteDifference,
}

impl UserDistance {
    pub fn as_str(self) -> &'static str {
        match self {
            UserDistance::MeanSquaredDifference => "msd",
            UserDistance::MeanAbsoluteDifference => "mad",
        }
    }
}

impl fmt::Display for UserDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msd" | "mean_squared_difference" => Ok(UserDistance::MeanSquaredDifference),
            "mad" | "mean_absolute_difference" => Ok(UserDistance::MeanAbsoluteDifference),
            other => Err(Error::InvalidArgument(alloc::format!("unknown user distance `{other}`"))),
        }
    }
}

/// Distance on the embedding space. Only Euclidean is provided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EmbeddingDistance {
    #[default]
    Euclidean,
}

impl EmbeddingDistance {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            EmbeddingDistance::Euclidean => euclidean(a, b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PdcConfig {
    /// Minimum number of items rated by both users of a pair.
    pub threshold: u32,
    pub embedding_distance: EmbeddingDistance,
    pub user_distance: UserDistance,
}

impl PdcConfig {
    pub fn new(threshold: u32) -> Self {
        PdcConfig {
            threshold,
            embedding_distance: EmbeddingDistance::Euclidean,
            user_distance: UserDistance::MeanSquaredDifference,
        }
    }
}

/// Ratings grouped per user and sorted by item, for pair intersections.
#[derive(Clone, Debug)]
pub struct RatingIndex {
    per_user: Vec<Vec<(usize, f64)>>,
}

impl RatingIndex {
    pub fn new(ratings: &[Rating]) -> Result<Self> {
        let n_users = ratings.iter().map(|r| r.user + 1).max().unwrap_or(0);
        let mut per_user: Vec<Vec<(usize, f64)>> = (0..n_users).map(|_| Vec::new()).collect();
        for r in ratings {
            per_user[r.user].push((r.item, r.value));
        }
        for (user, items) in per_user.iter_mut().enumerate() {
            items.sort_by_key(|&(item, _)| item);
            if let Some(w) = items.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateRating { user, item: w[0].0 });
            }
        }
        Ok(RatingIndex { per_user })
    }

    pub fn n_users(&self) -> usize {
        self.per_user.len()
    }

    pub fn ratings_of(&self, user: usize) -> &[(usize, f64)] {
        self.per_user.get(user).map_or(&[], |v| v.as_slice())
    }

    /// Number of shared items and the rating distance over them.
    pub fn compare(&self, a: usize, b: usize, metric: UserDistance) -> (u32, f64) {
        let (ra, rb) = (self.ratings_of(a), self.ratings_of(b));
        let (mut i, mut j) = (0, 0);
        let (mut count, mut sum) = (0u32, 0.0);
        while i < ra.len() && j < rb.len() {
            match ra[i].0.cmp(&rb[j].0) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    let d = ra[i].1 - rb[j].1;
                    sum += match metric {
                        UserDistance::MeanSquaredDifference => d * d,
                        UserDistance::MeanAbsoluteDifference => d.abs(),
                    };
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        (count, mean)
    }

    /// `d_U(a, b)`, or `None` when fewer than `threshold` items are shared.
    pub fn user_distance(&self, a: usize, b: usize, threshold: u32, metric: UserDistance) -> Option<f64> {
        let (count, d) = self.compare(a, b, metric);
        (count >= threshold.max(1)).then_some(d)
    }
}

/// Mean squared rating difference of two users over the items both rated.
pub fn user_distance(a: usize, b: usize, ratings: &[Rating], threshold: u32) -> Result<Option<f64>> {
    Ok(RatingIndex::new(ratings)?.user_distance(a, b, threshold, UserDistance::MeanSquaredDifference))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct QualifyingPair {
    a: usize,
    b: usize,
    common: u32,
    user_distance: f64,
}

fn qualifying_pairs(index: &RatingIndex, min_threshold: u32, metric: UserDistance) -> Vec<QualifyingPair> {
    let n = index.n_users();
    let mut pairs = Vec::new();
    for a in 0..n {
        if index.ratings_of(a).len() < min_threshold as usize {
            continue;
        }
        for b in a + 1..n {
            let (common, user_distance) = index.compare(a, b, metric);
            if common >= min_threshold {
                pairs.push(QualifyingPair { a, b, common, user_distance });
            }
        }
    }
    pairs
}

fn score_pairs<'a>(
    pairs: impl Iterator<Item = &'a QualifyingPair>,
    embeddings: &EmbeddingTable,
    distance: EmbeddingDistance,
    threshold: u32,
) -> Result<PdcScore> {
    let mut user_d = Vec::new();
    let mut emb_d = Vec::new();
    for p in pairs {
        for u in [p.a, p.b] {
            if u >= embeddings.n_users() {
                return Err(Error::UserOutOfRange { user: u, n_users: embeddings.n_users() });
            }
        }
        user_d.push(p.user_distance);
        emb_d.push(distance.distance(embeddings.get(p.a), embeddings.get(p.b)));
    }
    let pairs = user_d.len();
    if pairs < 2 {
        return Err(Error::InsufficientPairs { threshold, pairs });
    }
    let score = pearson(&emb_d, &user_d)?;
    Ok(PdcScore { score, pairs })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PdcScore {
    pub score: f64,
    /// Number of user pairs that entered the correlation.
    pub pairs: usize,
}

/// Pair-distance correlation of `embeddings` with respect to `ratings`.
pub fn pdc(embeddings: &EmbeddingTable, ratings: &[Rating], cfg: &PdcConfig) -> Result<PdcScore> {
    if cfg.threshold == 0 {
        return Err(Error::InvalidArgument("PDC threshold must be at least 1".into()));
    }
    let index = RatingIndex::new(ratings)?;
    let pairs = qualifying_pairs(&index, cfg.threshold, cfg.user_distance);
    score_pairs(pairs.iter(), embeddings, cfg.embedding_distance, cfg.threshold)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub threshold: u32,
    /// Pairs sharing at least `threshold` items.
    pub pairs: usize,
    /// The score, or why it is unavailable at this threshold.
    pub outcome: core::result::Result<f64, Error>,
}

/// PDC at several thresholds, sharing one pass over the user pairs. A
/// threshold that cannot be scored is reported and the sweep continues.
pub fn pdc_sweep(
    embeddings: &EmbeddingTable,
    ratings: &[Rating],
    thresholds: &[u32],
    embedding_distance: EmbeddingDistance,
    user_distance: UserDistance,
) -> Result<Vec<SweepEntry>> {
    if thresholds.is_empty() {
        return Err(Error::Empty("threshold list"));
    }
    if thresholds.contains(&0) {
        return Err(Error::InvalidArgument("PDC threshold must be at least 1".into()));
    }
    let index = RatingIndex::new(ratings)?;
    let min = *thresholds.iter().min().expect("non-empty");
    let pairs = qualifying_pairs(&index, min, user_distance);
    Ok(thresholds
        .iter()
        .map(|&t| {
            let selected = pairs.iter().filter(|p| p.common >= t);
            let count = selected.clone().count();
            SweepEntry {
                threshold: t,
                pairs: count,
                outcome: score_pairs(selected, embeddings, embedding_distance, t).map(|s| s.score),
            }
        })
        .collect())
}

/// Evaluation of one trained model on one fold.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub kind: ModelKind,
    pub z: usize,
    pub fold_id: u32,
    pub seed: u64,
    pub mae: f64,
    pub rmse: f64,
    /// Score per threshold; `None` where no score could be computed.
    pub pdc: BTreeMap<u32, Option<f64>>,
    pub pair_counts: BTreeMap<u32, usize>,
    pub param_count: usize,
}

impl EvalReport {
    /// Scores a trained model on test ratings: MAE/RMSE and a PDC sweep of
    /// its embeddings.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        model: &Model,
        test: &[Rating],
        features: &DenseMatrix,
        pdc_ratings: &[Rating],
        thresholds: &[u32],
        user_distance: UserDistance,
        clamp: bool,
        fold_id: u32,
        seed: u64,
    ) -> Result<Self> {
        let preds = predict_ratings(model, test, features, clamp)?;
        let targets: Vec<f64> = test.iter().map(|r| r.value).collect();
        let sweep =
            pdc_sweep(&model.embedding_table(), pdc_ratings, thresholds, EmbeddingDistance::Euclidean, user_distance)?;
        Ok(EvalReport {
            kind: model.kind(),
            z: model.z(),
            fold_id,
            seed,
            mae: mae(&preds, &targets)?,
            rmse: rmse(&preds, &targets)?,
            pdc: sweep.iter().map(|e| (e.threshold, e.outcome.clone().ok())).collect(),
            pair_counts: sweep.iter().map(|e| (e.threshold, e.pairs)).collect(),
            param_count: model.param_count(),
        })
    }
}
