use std::collections::HashMap;

use embedlab_core::evaluation::{mae, pdc, rmse, PdcConfig};
use embedlab_core::models::EmbeddingTable;
use embedlab_core::numerics::{dot, matvec, DenseMatrix};
use embedlab_core::Rating;
use proptest::prelude::*;

fn ratings_strategy(users: usize, items: usize) -> impl Strategy<Value = Vec<Rating>> {
    prop::collection::vec(prop::option::weighted(0.7, 1u8..=5), users * items).prop_map(move |cells| {
        cells
            .into_iter()
            .enumerate()
            .filter_map(|(k, r)| r.map(|r| Rating::new(k / items, k % items, r as f64)))
            .collect()
    })
}

fn embeddings_strategy(users: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), users)
}

fn table(rows: &[Vec<f64>]) -> EmbeddingTable {
    EmbeddingTable::new(DenseMatrix::from_rows(rows).unwrap())
}

/// Direct transcription: every unordered user pair, shared items looked up
/// in a map, two-pass Pearson.
fn pdc_oracle(emb: &[Vec<f64>], ratings: &[Rating], t: usize) -> Option<f64> {
    let mut by_user: HashMap<usize, HashMap<usize, f64>> = HashMap::new();
    for r in ratings {
        by_user.entry(r.user).or_default().insert(r.item, r.value);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for a in 0..emb.len() {
        for b in a + 1..emb.len() {
            let (Some(ra), Some(rb)) = (by_user.get(&a), by_user.get(&b)) else { continue };
            let diffs: Vec<f64> = ra.iter().filter_map(|(i, va)| rb.get(i).map(|vb| (va - vb).powi(2))).collect();
            if diffs.len() < t {
                continue;
            }
            let e: f64 = emb[a].iter().zip(&emb[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            xs.push(e);
            ys.push(diffs.iter().sum::<f64>() / diffs.len() as f64);
        }
    }
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-12 || syy <= 1e-12 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

proptest! {
    #[test]
    fn pdc_matches_brute_force(
        ratings in ratings_strategy(8, 6),
        emb in embeddings_strategy(8, 3),
        t in 1usize..4,
    ) {
        let oracle = pdc_oracle(&emb, &ratings, t);
        prop_assume!(oracle.is_some());
        let got = pdc(&table(&emb), &ratings, &PdcConfig::new(t as u32)).unwrap();
        prop_assert!((got.score - oracle.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn pdc_invariant_under_similarity_transforms(
        ratings in ratings_strategy(7, 6),
        emb in embeddings_strategy(7, 2),
        angle in 0.0f64..std::f64::consts::TAU,
        scale in 0.1f64..10.0,
        shift in (-5.0f64..5.0, -5.0f64..5.0),
    ) {
        prop_assume!(pdc_oracle(&emb, &ratings, 1).is_some());
        let base = pdc(&table(&emb), &ratings, &PdcConfig::new(1)).unwrap();
        let (s, c) = angle.sin_cos();
        let moved: Vec<Vec<f64>> = emb
            .iter()
            .map(|p| vec![scale * (c * p[0] - s * p[1]) + shift.0, scale * (s * p[0] + c * p[1]) + shift.1])
            .collect();
        let after = pdc(&table(&moved), &ratings, &PdcConfig::new(1)).unwrap();
        prop_assert_eq!(base.pairs, after.pairs);
        prop_assert!((base.score - after.score).abs() < 1e-9);
    }

    #[test]
    fn pdc_ignores_rating_order(
        ratings in ratings_strategy(6, 5),
        emb in embeddings_strategy(6, 2),
        seed in any::<u64>(),
    ) {
        prop_assume!(pdc_oracle(&emb, &ratings, 1).is_some());
        let mut shuffled = ratings.clone();
        embedlab_core::numerics::SeededRng::new(seed).shuffle(&mut shuffled);
        let a = pdc(&table(&emb), &ratings, &PdcConfig::new(1)).unwrap();
        let b = pdc(&table(&emb), &shuffled, &PdcConfig::new(1)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn every_pair_qualifies_with_a_shared_item(k in 3usize..12, seed in any::<u64>()) {
        let mut rng = embedlab_core::numerics::SeededRng::new(seed);
        let mut ratings: Vec<Rating> = (0..k).map(|u| Rating::new(u, 0, 1.0 + rng.below(5) as f64)).collect();
        ratings.push(Rating::new(0, 1, 1.0));
        ratings.push(Rating::new(1, 1, 5.0));
        let emb: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.next_f64(), rng.next_f64()]).collect();
        prop_assume!(pdc_oracle(&emb, &ratings, 1).is_some());
        let got = pdc(&table(&emb), &ratings, &PdcConfig::new(1)).unwrap();
        prop_assert_eq!(got.pairs, k * (k - 1) / 2);
    }

    #[test]
    fn dot_is_symmetric_and_bilinear(
        xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 1..20),
        alpha in -5.0f64..5.0,
    ) {
        let a: Vec<f64> = xs.iter().map(|v| v.0).collect();
        let b: Vec<f64> = xs.iter().map(|v| v.1).collect();
        let c: Vec<f64> = xs.iter().map(|v| v.2).collect();
        prop_assert_eq!(dot(&a, &b).unwrap(), dot(&b, &a).unwrap());
        let mixed: Vec<f64> = a.iter().zip(&c).map(|(x, z)| alpha * x + z).collect();
        let lhs = dot(&mixed, &b).unwrap();
        let rhs = alpha * dot(&a, &b).unwrap() + dot(&c, &b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn matvec_distributes_over_addition(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = embedlab_core::numerics::SeededRng::new(seed);
        let m = DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
        let u: Vec<f64> = (0..cols).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let v: Vec<f64> = (0..cols).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = matvec(&m, &sum).unwrap();
        let (mu, mv) = (matvec(&m, &u).unwrap(), matvec(&m, &v).unwrap());
        for i in 0..rows {
            prop_assert!((lhs[i] - mu[i] - mv[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn mae_never_exceeds_rmse(pairs in prop::collection::vec((1.0f64..5.0, 1.0f64..5.0), 1..50)) {
        let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
        let t: Vec<f64> = pairs.iter().map(|x| x.1).collect();
        prop_assert!(mae(&p, &t).unwrap() <= rmse(&p, &t).unwrap() + 1e-12);
    }
}
