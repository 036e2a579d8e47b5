use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::VectorSet;
use crate::error::{Error, Result};

/// Which documents enter the separation term `b_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SilhouetteVariant {
    /// Mean distance to every document outside the own cluster.
    #[default]
    Pooled,
    /// Mean distance to the nearest other cluster.
    Nearest,
}

/// Per-document silhouette values under cosine distance.
///
/// Members of singleton clusters score 0, as does any document whose `a_i`
/// and `b_i` are both 0. A zero vector has no direction and sits at distance
/// 1 from everything.
pub fn silhouette_samples<V: VectorSet + ?Sized>(
    vectors: &V,
    assignments: &[usize],
    variant: SilhouetteVariant,
) -> Result<Vec<f64>> {
    let n = vectors.len();
    if assignments.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: assignments.len(),
        });
    }
    let k = assignments.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }

    // mean cosine distance from x to a set S is 1 − x̂·(Σ ŷ)/|S|
    let dim = vectors.dim();
    let inv_norm: Vec<f64> = (0..n)
        .map(|i| {
            let sq = vectors.sq_norm(i);
            if sq > 0.0 {
                1.0 / sq.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut scratch = vec![0.0; dim];
    for (i, &a) in assignments.iter().enumerate() {
        scratch.iter_mut().for_each(|x| *x = 0.0);
        vectors.add_into(i, &mut scratch);
        for (s, x) in sums[a].iter_mut().zip(&scratch) {
            *s += x * inv_norm[i];
        }
    }
    let total: Vec<f64> = (0..dim).map(|d| sums.iter().map(|s| s[d]).sum()).collect();

    let s = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = assignments[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let self_sim = vectors.sq_norm(i) * inv_norm[i] * inv_norm[i];
            let sim_own = vectors.dot(i, &sums[own]) * inv_norm[i] - self_sim;
            let a = 1.0 - sim_own / (sizes[own] - 1) as f64;
            let b = match variant {
                SilhouetteVariant::Pooled => {
                    let outside = n - sizes[own];
                    let sim = vectors.dot(i, &total) * inv_norm[i] - vectors.dot(i, &sums[own]) * inv_norm[i];
                    1.0 - sim / outside as f64
                }
                SilhouetteVariant::Nearest => (0..k)
                    .filter(|&c| c != own && sizes[c] > 0)
                    .map(|c| 1.0 - vectors.dot(i, &sums[c]) * inv_norm[i] / sizes[c] as f64)
                    .fold(f64::INFINITY, f64::min),
            };
            let m = a.max(b);
            if m <= 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(s)
}

/// Mean silhouette over all documents.
pub fn silhouette<V: VectorSet + ?Sized>(vectors: &V, assignments: &[usize], variant: SilhouetteVariant) -> Result<f64> {
    let s = silhouette_samples(vectors, assignments, variant)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsa::EmbeddingMatrix;

    fn emb(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_unnamed_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn orthogonal_pairs() {
        // a = 0, b = 1 for every document
        let e = emb(&[&[1.0, 0.0], &[2.0, 0.0], &[0.0, 1.0], &[0.0, 3.0]]);
        for v in [SilhouetteVariant::Pooled, SilhouetteVariant::Nearest] {
            let s = silhouette(&e, &[0, 0, 1, 1], v).unwrap();
            assert!((s - 1.0).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn single_cluster_errors() {
        let e = emb(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            silhouette(&e, &[0, 0], SilhouetteVariant::Pooled),
            Err(Error::SingleCluster)
        ));
        // an empty cluster index does not count
        assert!(silhouette(&e, &[1, 1], SilhouetteVariant::Pooled).is_err());
    }

    #[test]
    fn singletons_score_zero() {
        let e = emb(&[&[1.0, 0.0], &[0.0, 1.0], &[0.1, 1.0]]);
        let s = silhouette_samples(&e, &[0, 1, 1], SilhouetteVariant::Pooled).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(s[1] > 0.0 && s[2] > 0.0);
    }

    #[test]
    fn variants_differ_with_three_clusters() {
        let e = emb(&[
            &[1.0, 0.0, 0.0],
            &[1.0, 0.1, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.1, 1.0, 0.0],
            &[-1.0, 0.0, 0.0],
            &[-1.0, 0.0, 0.1],
        ]);
        let a = [0, 0, 1, 1, 2, 2];
        let pooled = silhouette(&e, &a, SilhouetteVariant::Pooled).unwrap();
        let nearest = silhouette(&e, &a, SilhouetteVariant::Nearest).unwrap();
        assert!(nearest < pooled);
        assert!(nearest > 0.0);
    }
}
