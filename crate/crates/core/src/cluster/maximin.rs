use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cluster_means, Algorithm, Clustering, VectorSet};
use crate::error::{Error, Result};

/// Distances at or below this are treated as identical directions.
const SAME_DIRECTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximinParams {
    pub theta: f64,
    pub seed: u64,
}

impl MaximinParams {
    /// `theta` may exceed 1 because embeddings can have negative components,
    /// which stretches cosine distance up to 2.
    pub fn new(theta: f64, seed: u64) -> Result<Self> {
        if !(theta > 0.0 && theta < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "maximin threshold theta must lie in (0, 2), got {theta}"
            )));
        }
        Ok(MaximinParams { theta, seed })
    }
}

/// Farthest-point clustering under cosine distance.
///
/// A random first center, then the point farthest from it, then repeatedly
/// the point whose distance to its nearest center is largest, for as long as
/// that distance exceeds `theta`. Every point joins its nearest center
/// (lowest center index on ties). Zero rows have no direction and join
/// center 0.
pub fn maximin<V: VectorSet + ?Sized>(vectors: &V, params: &MaximinParams) -> Result<Clustering> {
    MaximinParams::new(params.theta, params.seed)?;
    let n = vectors.len();
    let norms: Vec<f64> = (0..n).map(|i| vectors.sq_norm(i)).collect();
    let nonzero: Vec<usize> = (0..n).filter(|&i| norms[i] > 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::InvalidParameter("maximin needs at least one nonzero vector".into()));
    }

    // cosine distance of every row to a center, zero rows get +inf so they
    // never become centers and never win a nearest-center comparison
    let distances_to = |c: usize| -> Vec<f64> {
        let center = vectors.dense_row(c);
        let cn = norms[c];
        (0..n)
            .into_par_iter()
            .map(|i| {
                if norms[i] == 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 - vectors.dot(i, &center) / (norms[i] * cn).sqrt()).clamp(0.0, 2.0)
                }
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let first = nonzero[rng.random_range(0..nonzero.len())];
    let mut centers = vec![first];
    let mut is_center = vec![false; n];
    is_center[first] = true;
    let mut min_dist = distances_to(first);
    let mut nearest = vec![0usize; n];

    let farthest = |min_dist: &[f64], is_center: &[bool]| -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &i in &nonzero {
            if !is_center[i] && best.is_none_or(|(_, d)| min_dist[i] > d) {
                best = Some((i, min_dist[i]));
            }
        }
        best
    };

    let mut degenerate = false;
    match farthest(&min_dist, &is_center) {
        Some((second, d)) if d > SAME_DIRECTION => {
            centers.push(second);
            is_center[second] = true;
            update(&mut min_dist, &mut nearest, &distances_to(second), 1);
            while let Some((next, d)) = farthest(&min_dist, &is_center) {
                if d <= params.theta {
                    break;
                }
                let idx = centers.len();
                centers.push(next);
                is_center[next] = true;
                update(&mut min_dist, &mut nearest, &distances_to(next), idx);
            }
        }
        _ => degenerate = true,
    }

    for (idx, &c) in centers.iter().enumerate() {
        nearest[c] = idx;
    }
    for i in 0..n {
        if norms[i] == 0.0 {
            nearest[i] = 0;
        }
    }
    let k = centers.len();
    Ok(Clustering {
        centroids: cluster_means(vectors, &nearest, k),
        assignments: nearest,
        algorithm: Algorithm::Maximin {
            theta: params.theta,
        },
        seed: params.seed,
        iterations: k.saturating_sub(2),
        objective: None,
        centers: Some(centers),
        degenerate,
    })
}

/// Folds the distances to a newly added center into the running minimum.
/// Strict comparison keeps the lower center index on ties.
fn update(min_dist: &mut [f64], nearest: &mut [usize], fresh: &[f64], center_idx: usize) {
    for i in 0..min_dist.len() {
        if fresh[i] < min_dist[i] {
            min_dist[i] = fresh[i];
            nearest[i] = center_idx;
        }
    }
}
