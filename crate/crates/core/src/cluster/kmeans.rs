use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cluster_means, distinct_rows, Algorithm, Clustering, VectorSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub k: usize,
    pub seed: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Relative objective change below which Lloyd iterations stop.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Independent seedings; the lowest objective wins.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_max_iterations() -> usize {
    300
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_restarts() -> usize {
    10
}

impl KmeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KmeansParams {
            k,
            seed,
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            restarts: default_restarts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// One seeded k-means++ run.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    /// Objective after every completed Lloyd iteration.
    pub trace: Vec<f64>,
}

/// k-means++ seeding followed by Lloyd iterations, best of
/// `params.restarts` runs (seeds `seed`, `seed + 1`, ...).
pub fn kmeans_pp<V: VectorSet + ?Sized>(vectors: &V, params: &KmeansParams) -> Result<Clustering> {
    params.validate()?;
    let distinct = distinct_rows(vectors);
    if params.k > distinct {
        return Err(Error::TooFewDistinct {
            k: params.k,
            distinct,
        });
    }
    let runs: Vec<LloydRun> = (0..params.restarts as u64)
        .into_par_iter()
        .map(|r| lloyd_unchecked(vectors, params, params.seed.wrapping_add(r)))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.objective < best.objective { run } else { best })
        .expect("restarts >= 1");
    Ok(Clustering {
        iterations: best.trace.len(),
        objective: Some(best.objective),
        assignments: best.assignments,
        centroids: best.centroids,
        algorithm: Algorithm::KmeansPp {
            k: params.k,
            max_iterations: params.max_iterations,
            tolerance: params.tolerance,
            restarts: params.restarts,
        },
        seed: params.seed,
        centers: None,
        degenerate: false,
    })
}

/// A single k-means++ run with the given seed, exposing the per-iteration
/// objective trace.
pub fn lloyd_run<V: VectorSet + ?Sized>(vectors: &V, params: &KmeansParams, seed: u64) -> Result<LloydRun> {
    params.validate()?;
    let distinct = distinct_rows(vectors);
    if params.k > distinct {
        return Err(Error::TooFewDistinct {
            k: params.k,
            distinct,
        });
    }
    Ok(lloyd_unchecked(vectors, params, seed))
}

fn sq_norm(c: &[f64]) -> f64 {
    c.iter().map(|x| x * x).sum()
}

/// D²-weighted seeding: the first center uniformly, each further one with
/// probability proportional to the squared distance to the nearest center
/// chosen so far.
fn seed_centers<V: VectorSet + ?Sized>(vectors: &V, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut centers = vec![vectors.dense_row(rng.random_range(0..n))];
    let mut d2: Vec<f64> = vec![f64::INFINITY; n];
    while centers.len() < k {
        let last = centers.last().expect("nonempty");
        let last_norm = sq_norm(last);
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = d.min(vectors.sq_dist(i, last, last_norm));
        });
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just above the final sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            rng.random_range(0..n)
        };
        centers.push(vectors.dense_row(pick));
    }
    centers
}

/// Nearest centroid per row (lowest index on ties) and the squared distance.
fn assign<V: VectorSet + ?Sized>(vectors: &V, centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    let norms: Vec<f64> = centroids.iter().map(|c| sq_norm(c)).collect();
    (0..vectors.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = vectors.sq_dist(i, centroid, norms[c]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

fn objective<V: VectorSet + ?Sized>(vectors: &V, assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    let norms: Vec<f64> = centroids.iter().map(|c| sq_norm(c)).collect();
    (0..vectors.len())
        .into_par_iter()
        .map(|i| {
            let a = assignments[i];
            vectors.sq_dist(i, &centroids[a], norms[a])
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Moves the point farthest from its centroid into each empty cluster until
/// none is empty, then recomputes the means.
fn repair_empty<V: VectorSet + ?Sized>(vectors: &V, assignments: &mut [usize], centroids: &mut Vec<Vec<f64>>) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let norms: Vec<f64> = centroids.iter().map(|c| sq_norm(c)).collect();
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = vectors.sq_dist(i, &centroids[a], norms[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else {
            return;
        };
        assignments[i] = empty;
        *centroids = cluster_means(vectors, assignments, k);
    }
}

fn lloyd_unchecked<V: VectorSet + ?Sized>(vectors: &V, params: &KmeansParams, seed: u64) -> LloydRun {
    let k = params.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centers(vectors, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace: Vec<f64> = Vec::new();

    for _ in 0..params.max_iterations {
        let fresh: Vec<usize> = assign(vectors, &centroids).into_iter().map(|(c, _)| c).collect();
        let unchanged = fresh == assignments;
        let mut next_assign = fresh;
        let mut next_centroids = cluster_means(vectors, &next_assign, k);
        repair_empty(vectors, &mut next_assign, &mut next_centroids);
        let obj = objective(vectors, &next_assign, &next_centroids);

        if let Some(&prev) = trace.last() {
            // a rise can only come from rounding; keep the previous state
            if obj > prev || unchanged {
                break;
            }
            assignments = next_assign;
            centroids = next_centroids;
            trace.push(obj);
            if prev - obj <= params.tolerance * prev {
                break;
            }
        } else {
            assignments = next_assign;
            centroids = next_centroids;
            trace.push(obj);
        }
    }
    LloydRun {
        objective: *trace.last().expect("max_iterations >= 1"),
        assignments,
        centroids,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsa::EmbeddingMatrix;

    fn emb(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_unnamed_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn four_corner_split() {
        let e = emb(&[&[0.0, 0.0], &[0.0, 1.0], &[10.0, 0.0], &[10.0, 1.0]]);
        let c = kmeans_pp(&e, &KmeansParams::new(2, 42)).unwrap();
        assert_eq!(c.objective, Some(1.0));
        assert_eq!(c.assignments[0], c.assignments[1]);
        assert_eq!(c.assignments[2], c.assignments[3]);
        assert_ne!(c.assignments[0], c.assignments[2]);
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let e = emb(&[&[0.0, 0.0], &[3.0, 1.0], &[-2.0, 5.0]]);
        let c = kmeans_pp(&e, &KmeansParams::new(3, 1)).unwrap();
        assert_eq!(c.objective, Some(0.0));
        assert_eq!(c.sizes(), [1, 1, 1]);
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let e = emb(&[&[0.0, 0.0], &[3.0, 1.0], &[-2.0, 5.0]]);
        let c = kmeans_pp(&e, &KmeansParams::new(1, 9)).unwrap();
        assert_eq!(c.k(), 1);
        assert!((c.centroids[0][0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((c.centroids[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_clusters_for_duplicates() {
        let e = emb(&[&[1.0], &[1.0], &[2.0]]);
        assert!(matches!(
            kmeans_pp(&e, &KmeansParams::new(3, 0)),
            Err(Error::TooFewDistinct { k: 3, distinct: 2 })
        ));
        // duplicates are fine as long as k fits the distinct rows
        let c = kmeans_pp(&e, &KmeansParams::new(2, 0)).unwrap();
        assert_eq!(c.assignments[0], c.assignments[1]);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let e = EmbeddingMatrix::from_unnamed_rows(rows).unwrap();
        let a = kmeans_pp(&e, &KmeansParams::new(4, 17)).unwrap();
        let b = kmeans_pp(&e, &KmeansParams::new(4, 17)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repair_fills_empty_cluster() {
        let e = emb(&[&[0.0], &[1.0], &[5.0]]);
        let mut assign = vec![0, 0, 0];
        let mut cents = vec![vec![2.0], vec![100.0]];
        repair_empty(&e, &mut assign, &mut cents);
        assert_eq!(assign, [0, 0, 1]);
        assert_eq!(cents, [vec![0.5], vec![5.0]]);
    }
}
