//! Partitioning of document vectors with maximin (farthest-point) and
//! k-means++ clustering.

mod kmeans;
mod maximin;

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans_pp, lloyd_run, KmeansParams, LloydRun};
pub use maximin::{maximin, MaximinParams};

use crate::error::{Error, Result};
use crate::lsa::EmbeddingMatrix;
use crate::vectorizer::TermDocMatrix;

/// Row access shared by dense embeddings and sparse tf-idf matrices.
pub trait VectorSet: Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    /// `x_i · y` for a dense `y` of length `dim`.
    fn dot(&self, i: usize, y: &[f64]) -> f64;
    fn sq_norm(&self, i: usize) -> f64;
    /// `‖x_i − c‖²`; `c_sq_norm` is `‖c‖²`.
    fn sq_dist(&self, i: usize, c: &[f64], c_sq_norm: f64) -> f64;
    /// `acc += x_i`
    fn add_into(&self, i: usize, acc: &mut [f64]);
    /// A hashable encoding of the row, equal for equal rows.
    fn row_key(&self, i: usize) -> Vec<u64>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.add_into(i, &mut v);
        v
    }
}

fn float_key(x: f64) -> u64 {
    // -0.0 and 0.0 compare equal
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

impl VectorSet for EmbeddingMatrix {
    fn len(&self) -> usize {
        self.rows()
    }
    fn dim(&self) -> usize {
        EmbeddingMatrix::dim(self)
    }
    fn dot(&self, i: usize, y: &[f64]) -> f64 {
        self.row(i).iter().zip(y).map(|(a, b)| a * b).sum()
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|a| a * a).sum()
    }
    fn sq_dist(&self, i: usize, c: &[f64], _c_sq_norm: f64) -> f64 {
        self.row(i).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
    }
    fn add_into(&self, i: usize, acc: &mut [f64]) {
        for (a, x) in acc.iter_mut().zip(self.row(i)) {
            *a += x;
        }
    }
    fn row_key(&self, i: usize) -> Vec<u64> {
        self.row(i).iter().map(|&x| float_key(x)).collect()
    }
}

impl VectorSet for TermDocMatrix {
    fn len(&self) -> usize {
        self.rows()
    }
    fn dim(&self) -> usize {
        self.cols()
    }
    fn dot(&self, i: usize, y: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * y[j]).sum()
    }
    fn sq_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }
    fn sq_dist(&self, i: usize, c: &[f64], c_sq_norm: f64) -> f64 {
        let (cols, vals) = self.row(i);
        let correction: f64 = cols
            .iter()
            .zip(vals)
            .map(|(&j, &v)| (v - c[j]) * (v - c[j]) - c[j] * c[j])
            .sum();
        (c_sq_norm + correction).max(0.0)
    }
    fn add_into(&self, i: usize, acc: &mut [f64]) {
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            acc[j] += v;
        }
    }
    fn row_key(&self, i: usize) -> Vec<u64> {
        let (cols, vals) = self.row(i);
        cols.iter()
            .zip(vals)
            .flat_map(|(&j, &v)| [j as u64, float_key(v)])
            .collect()
    }
}

/// Number of distinct rows.
pub fn distinct_rows<V: VectorSet + ?Sized>(vectors: &V) -> usize {
    (0..vectors.len())
        .map(|i| vectors.row_key(i))
        .collect::<HashSet<_>>()
        .len()
}

/// `1 − cos(x, y)`, in `[0, 2]`.
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let nx: f64 = x.iter().map(|v| v * v).sum();
    let ny: f64 = y.iter().map(|v| v * v).sum();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot / (nx * ny).sqrt()).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    Maximin {
        theta: f64,
    },
    KmeansPp {
        k: usize,
        max_iterations: usize,
        tolerance: f64,
        restarts: usize,
    },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Maximin { .. } => "maximin",
            Algorithm::KmeansPp { .. } => "k-means",
        }
    }
}

/// A partition of the input rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster index per input row.
    pub assignments: Vec<usize>,
    /// Mean of each cluster's members in the clustering space.
    pub centroids: Vec<Vec<f64>>,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub iterations: usize,
    /// Final sum of squared distances (k-means only).
    pub objective: Option<f64>,
    /// Row indices promoted to centers (maximin only), in promotion order.
    pub centers: Option<Vec<usize>>,
    /// Set when the input could not support more than one cluster.
    pub degenerate: bool,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Row indices per cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k()];
        for (i, &a) in self.assignments.iter().enumerate() {
            members[a].push(i);
        }
        members
    }

    /// Writes `id`,`cluster` rows.
    pub fn write_csv<W: Write>(&self, out: W, doc_ids: &[String]) -> Result<()> {
        if doc_ids.len() != self.assignments.len() {
            return Err(Error::DimensionMismatch {
                expected: self.assignments.len(),
                got: doc_ids.len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "cluster"])?;
        for (id, a) in doc_ids.iter().zip(&self.assignments) {
            w.write_record([id.as_str(), &a.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Means of the member rows of each cluster.
pub(crate) fn cluster_means<V: VectorSet + ?Sized>(vectors: &V, assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; vectors.dim()]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        vectors.add_into(i, &mut sums[a]);
        counts[a] += 1;
    }
    for (sum, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            let inv = c as f64;
            sum.iter_mut().for_each(|x| *x /= inv);
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorizer::{build_vocabulary, WeightScheme};

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, -2.0], &[-1.0, 2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(cosine_distance(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sparse_and_dense_rows_agree() {
        let docs: Vec<Vec<String>> = vec![
            vec!["a".into(), "a".into(), "b".into()],
            vec!["a".into(), "b".into(), "b".into(), "b".into()],
            vec!["b".into()],
        ];
        let vocab = build_vocabulary(&docs).unwrap();
        let ids: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let m = crate::vectorizer::weight_matrix(&docs, ids.clone(), &vocab, WeightScheme::LogInside).unwrap();
        let e = EmbeddingMatrix::from_rows(m.to_dense(), ids).unwrap();
        let c = vec![0.3, -0.7];
        let cn = 0.09 + 0.49;
        for i in 0..3 {
            assert!((m.dot(i, &c) - e.dot(i, &c)).abs() < 1e-12);
            assert!((m.sq_norm(i) - e.sq_norm(i)).abs() < 1e-12);
            assert!((m.sq_dist(i, &c, cn) - e.sq_dist(i, &c, cn)).abs() < 1e-12);
            assert_eq!(m.dense_row(i), e.dense_row(i));
        }
        assert_eq!(distinct_rows(&m), distinct_rows(&e));
    }

    #[test]
    fn distinct_rows_ignores_signed_zero() {
        let e = EmbeddingMatrix::from_unnamed_rows(vec![vec![0.0, 1.0], vec![-0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(distinct_rows(&e), 2);
    }

    #[test]
    fn clustering_csv() {
        let c = Clustering {
            assignments: vec![1, 0],
            centroids: vec![vec![0.0], vec![1.0]],
            algorithm: Algorithm::Maximin { theta: 0.5 },
            seed: 0,
            iterations: 0,
            objective: None,
            centers: None,
            degenerate: false,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf, &["x".into(), "y".into()]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,cluster\nx,1\ny,0\n");
        assert_eq!(c.sizes(), [1, 1]);
        assert_eq!(c.members(), [vec![1], vec![0]]);
    }
}
