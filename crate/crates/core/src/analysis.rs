//! Clustering of user embeddings and per-centroid interpretation of a
//! tensor-fusion model.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::models::{EmbeddingTable, Model};
use crate::numerics::{dot_unchecked, squared_distance, DenseMatrix, SeededRng};
use crate::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Cluster id per user.
    pub assignments: Vec<usize>,
    pub centroids: DenseMatrix,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
    /// Inertia after every Lloyd iteration; non-increasing.
    pub inertia_history: Vec<f64>,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments.iter().enumerate().filter(move |(_, c)| **c == cluster).map(|(u, _)| u)
    }
}

fn count_distinct_rows(points: &DenseMatrix) -> usize {
    let mut rows: Vec<&[f64]> = points.iter_rows().collect();
    let cmp = |a: &&[f64], b: &&[f64]| {
        a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    };
    rows.sort_by(cmp);
    rows.dedup_by(|a, b| cmp(&&**a, &&**b).is_eq());
    rows.len()
}

fn nearest(point: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter_rows().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Distance-weighted seeding: each further seed is drawn with probability
/// proportional to its squared distance from the seeds chosen so far.
fn seed_centroids(points: &DenseMatrix, k: usize, rng: &mut SeededRng) -> DenseMatrix {
    let n = points.rows();
    let mut centroids = DenseMatrix::zeros(k, points.cols());
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut closest: Vec<f64> = points.iter_rows().map(|p| squared_distance(p, points.row(first))).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let target = rng.next_f64() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, d) in closest.iter().enumerate() {
            if *d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("k does not exceed the number of distinct points");
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, p) in points.iter_rows().enumerate() {
            closest[i] = closest[i].min(squared_distance(p, points.row(pick)));
        }
    }
    centroids
}

pub fn kmeans(embeddings: &EmbeddingTable, k: usize, rng: &mut SeededRng) -> Result<Clustering> {
    kmeans_points(embeddings.vectors(), k, rng, DEFAULT_MAX_ITERATIONS)
}

/// Lloyd iterations until the assignment stops changing or `max_iterations`.
/// An empty cluster takes over the point farthest from its own centroid.
pub fn kmeans_points(points: &DenseMatrix, k: usize, rng: &mut SeededRng, max_iterations: usize) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let distinct = count_distinct_rows(points);
    if k > distinct {
        return Err(Error::InvalidArgument(alloc::format!("k = {k} exceeds the {distinct} distinct points")));
    }
    let n = points.rows();
    let dim = points.cols();
    let mut centroids = seed_centroids(points, k, rng);
    let mut assignments: Vec<usize> = points.iter_rows().map(|p| nearest(p, &centroids).0).collect();
    let mut history = Vec::new();

    for _ in 0..max_iterations.max(1) {
        let mut counts = vec![0usize; k];
        for &c in &assignments {
            counts[c] += 1;
        }
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let donor = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .map(|i| (i, squared_distance(points.row(i), centroids.row(assignments[i]))))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("k <= n leaves a cluster with two members");
            counts[assignments[donor]] -= 1;
            assignments[donor] = empty;
            counts[empty] = 1;
        }

        let mut sums = DenseMatrix::zeros(k, dim);
        for (p, &c) in points.iter_rows().zip(&assignments) {
            for (s, v) in sums.row_mut(c).iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            let inv = 1.0 / count as f64;
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s * inv;
            }
        }

        let next: Vec<usize> = points.iter_rows().map(|p| nearest(p, &centroids).0).collect();
        let inertia = points.iter_rows().zip(&next).map(|(p, &c)| squared_distance(p, centroids.row(c))).sum();
        history.push(inertia);
        let converged = next == assignments;
        assignments = next;
        if converged {
            break;
        }
    }

    let inertia = *history.last().expect("at least one iteration");
    Ok(Clustering { k, assignments, centroids, inertia, inertia_history: history })
}

/// `count` distinct cluster ids drawn without replacement.
pub fn sample_clusters(clustering: &Clustering, count: usize, rng: &mut SeededRng) -> Result<Vec<usize>> {
    if count > clustering.k {
        return Err(Error::InvalidArgument(alloc::format!("cannot sample {count} of {} clusters", clustering.k)));
    }
    let mut ids: Vec<usize> = (0..clustering.k).collect();
    for i in 0..count {
        let j = i + rng.below(ids.len() - i);
        ids.swap(i, j);
    }
    ids.truncate(count);
    Ok(ids)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ranked {
    pub name: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CentroidProfile {
    pub cluster: usize,
    /// General user bias `u_b·c` of the centroid.
    pub bias: f64,
    /// Largest entries of the sensitivity change `c·T`, highest first.
    pub top_features: Vec<Ranked>,
    /// Smallest entries of `c·T`, lowest first.
    pub bottom_features: Vec<Ranked>,
    /// Best predicted movies for the centroid, highest first.
    pub top_movies: Vec<Ranked>,
    /// Worst predicted movies, lowest first.
    pub bottom_movies: Vec<Ranked>,
}

pub const PROFILE_FEATURES: usize = 5;
pub const PROFILE_MOVIES: usize = 3;

/// Reads the bias and feature-sensitivity changes of a centroid embedding
/// from a tensor-fusion model and ranks the catalog with the centroid in
/// place of a user. Movie ties are broken by title.
pub fn centroid_profile(
    model: &Model,
    cluster: usize,
    centroid: &[f64],
    tag_names: &[String],
    movie_features: &DenseMatrix,
    titles: &[String],
) -> Result<CentroidProfile> {
    let tensor = model.as_tensor().map_err(|_| {
        Error::Usage(alloc::format!(
            "centroid profiles need a tensor model; for `{}` use the per-input sensitivity instead",
            model.kind()
        ))
    })?;
    if tag_names.len() != tensor.w.len() {
        return Err(Error::mismatch("tag names", (1, tensor.w.len()), (1, tag_names.len())));
    }
    if movie_features.cols() != tensor.w.len() || movie_features.rows() != titles.len() {
        return Err(Error::mismatch("movie catalog", movie_features.shape(), (titles.len(), tensor.w.len())));
    }
    let change = tensor.sensitivity_change(centroid)?;
    let bias = dot_unchecked(&tensor.user_bias, centroid);

    let mut tags: Vec<usize> = (0..change.len()).collect();
    tags.sort_by(|&a, &b| change[b].total_cmp(&change[a]).then(a.cmp(&b)));
    let tag = |i: usize| Ranked { name: tag_names[i].clone(), score: change[i] };
    let n_feat = PROFILE_FEATURES.min(tags.len() / 2);

    let scores: Vec<f64> =
        movie_features.iter_rows().map(|x| tensor.forward_with_embedding(x, centroid)).collect::<Result<_>>()?;
    let mut movies: Vec<usize> = (0..titles.len()).collect();
    movies.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| titles[a].cmp(&titles[b])));
    let movie = |i: usize| Ranked { name: titles[i].clone(), score: scores[i] };
    let n_movies = PROFILE_MOVIES.min(movies.len() / 2);

    Ok(CentroidProfile {
        cluster,
        bias,
        top_features: tags[..n_feat].iter().map(|&i| tag(i)).collect(),
        bottom_features: tags.iter().rev().take(n_feat).map(|&i| tag(i)).collect(),
        top_movies: movies[..n_movies].iter().map(|&i| movie(i)).collect(),
        bottom_movies: movies.iter().rev().take(n_movies).map(|&i| movie(i)).collect(),
    })
}
