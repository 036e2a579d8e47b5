//! Latent semantic analysis: truncated SVD of the document-term matrix,
//! document embeddings, and the back-transform from the reduced space to
//! term space.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorizer::TermDocMatrix;

/// Above this many dense entries the randomized solver is used.
const DENSE_LIMIT: usize = 8_000_000;
const OVERSAMPLE: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvdMethod {
    /// Dense for moderate sizes, randomized subspace iteration otherwise.
    #[default]
    Auto,
    Dense,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdOptions {
    pub method: SvdMethod,
    pub seed: u64,
    pub max_iterations: usize,
    /// Relative change of the leading singular values that ends subspace
    /// iteration.
    pub tolerance: f64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            method: SvdMethod::Auto,
            seed: 0,
            max_iterations: 500,
            tolerance: 1e-13,
        }
    }
}

/// Leading singular triplets of a documents-by-terms matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub singular_values: Vec<f64>,
    /// documents x n, orthonormal columns
    pub doc_factors: DMatrix<f64>,
    /// terms x n, orthonormal columns
    pub term_factors: DMatrix<f64>,
    pub doc_ids: Vec<String>,
    /// Set when fewer triplets than requested were returned because the
    /// matrix rank is smaller.
    pub rank_limited: bool,
}

impl SvdFactors {
    pub fn n(&self) -> usize {
        self.singular_values.len()
    }

    /// `U_n Σ_n V_nᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&self.singular_values));
        &self.doc_factors * sigma * self.term_factors.transpose()
    }
}

/// Dense row-major document vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    doc_ids: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, doc_ids: Vec<String>) -> Result<Self> {
        if rows.len() != doc_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: doc_ids.len(),
                got: rows.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("embedding has a non-finite entry".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(EmbeddingMatrix {
            rows: rows.len(),
            dim,
            data,
            doc_ids,
        })
    }

    /// Convenience constructor that numbers documents `0..rows`.
    pub fn from_unnamed_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::from_rows(rows, ids)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

fn to_dense(matrix: &TermDocMatrix) -> DMatrix<f64> {
    let mut dense = DMatrix::zeros(matrix.rows(), matrix.cols());
    for i in 0..matrix.rows() {
        let (cols, vals) = matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            dense[(i, j)] = v;
        }
    }
    dense
}

/// Top-`n` singular triplets of the weighted matrix.
pub fn truncated_svd(matrix: &TermDocMatrix, n: usize) -> Result<SvdFactors> {
    truncated_svd_with(matrix, n, &SvdOptions::default())
}

pub fn truncated_svd_with(matrix: &TermDocMatrix, n: usize, opts: &SvdOptions) -> Result<SvdFactors> {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    check_rank_request(rows, cols, n)?;
    let dense = match opts.method {
        SvdMethod::Dense => true,
        SvdMethod::Randomized => false,
        SvdMethod::Auto => rows * cols <= DENSE_LIMIT,
    };
    let (s, u, v) = if dense {
        dense_triplets(to_dense(matrix))
    } else {
        randomized_triplets(&SparseOp(matrix), n, opts)
    };
    finish(s, u, v, n, matrix.doc_ids().to_vec())
}

/// Same contract as [`truncated_svd_with`] for a dense documents-by-terms
/// matrix. Documents are numbered `0..rows`.
pub fn truncated_svd_dense(matrix: &DMatrix<f64>, n: usize, opts: &SvdOptions) -> Result<SvdFactors> {
    check_rank_request(matrix.nrows(), matrix.ncols(), n)?;
    let (s, u, v) = match opts.method {
        SvdMethod::Randomized => randomized_triplets(&DenseOp(matrix), n, opts),
        _ => dense_triplets(matrix.clone()),
    };
    let ids = (0..matrix.nrows()).map(|i| i.to_string()).collect();
    finish(s, u, v, n, ids)
}

fn check_rank_request(rows: usize, cols: usize, n: usize) -> Result<()> {
    if n == 0 || n > rows.min(cols) {
        return Err(Error::InvalidParameter(format!(
            "LSA rank n = {n} must lie in 1..={} for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    Ok(())
}

type Triplets = (Vec<f64>, DMatrix<f64>, DMatrix<f64>);

/// Full thin SVD, singular values descending. Returns `(σ, U, V)`.
fn dense_triplets(matrix: DMatrix<f64>) -> Triplets {
    let svd = matrix.svd(true, true);
    let u = svd.u.expect("U requested");
    let v = svd.v_t.expect("Vᵀ requested").transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let sv = order.iter().map(|&k| s[k]).collect();
    let u = DMatrix::from_columns(&order.iter().map(|&k| u.column(k).into_owned()).collect::<Vec<_>>());
    let v = DMatrix::from_columns(&order.iter().map(|&k| v.column(k).into_owned()).collect::<Vec<_>>());
    (sv, u, v)
}

/// Linear operator view used by the randomized solver.
trait MatOp {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A X`
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `Aᵀ Y`
    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64>;
}

struct DenseOp<'a>(&'a DMatrix<f64>);

impl MatOp for DenseOp<'_> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0 * x
    }
    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.tr_mul(y)
    }
}

struct SparseOp<'a>(&'a TermDocMatrix);

impl MatOp for SparseOp<'_> {
    fn nrows(&self) -> usize {
        self.0.rows()
    }
    fn ncols(&self) -> usize {
        self.0.cols()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.0.rows(), x.ncols());
        for i in 0..self.0.rows() {
            let (cols, vals) = self.0.row(i);
            for c in 0..x.ncols() {
                out[(i, c)] = cols.iter().zip(vals).map(|(&j, &v)| v * x[(j, c)]).sum();
            }
        }
        out
    }
    fn apply_t(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.0.cols(), y.ncols());
        for i in 0..self.0.rows() {
            let (cols, vals) = self.0.row(i);
            for c in 0..y.ncols() {
                let yi = y[(i, c)];
                if yi != 0.0 {
                    for (&j, &v) in cols.iter().zip(vals) {
                        out[(j, c)] += v * yi;
                    }
                }
            }
        }
        out
    }
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Block subspace iteration from a seeded random start, stopped when the
/// leading `n` Ritz values settle.
fn randomized_triplets(op: &dyn MatOp, n: usize, opts: &SvdOptions) -> Triplets {
    let block = (n + OVERSAMPLE).min(op.nrows().min(op.ncols()));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let omega = DMatrix::from_fn(op.ncols(), block, |_, _| rng.random_range(-1.0..1.0));
    let mut q = orthonormalize(op.apply(&omega));
    let mut previous: Option<Vec<f64>> = None;
    for _ in 0..opts.max_iterations.max(1) {
        let z = orthonormalize(op.apply_t(&q));
        q = orthonormalize(op.apply(&z));
        let b = op.apply_t(&q).transpose();
        let current: Vec<f64> = {
            let mut s: Vec<f64> = b.singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            s.truncate(n);
            s
        };
        let settled = previous.as_ref().is_some_and(|prev| {
            let scale = current[0].max(f64::MIN_POSITIVE);
            prev.iter()
                .zip(&current)
                .all(|(a, b)| (a - b).abs() <= opts.tolerance * scale)
        });
        previous = Some(current);
        if settled {
            break;
        }
    }
    // B = Qᵀ A, small block x cols
    let b = op.apply_t(&q).transpose();
    let (s, ub, v) = dense_triplets(b);
    let u = &q * ub;
    (s, u, v)
}

/// Keeps the numerically nonzero leading triplets and fixes signs so that the
/// largest-magnitude entry of every term-factor column is nonnegative.
fn finish(s: Vec<f64>, u: DMatrix<f64>, v: DMatrix<f64>, n: usize, doc_ids: Vec<String>) -> Result<SvdFactors> {
    let largest = s.first().copied().unwrap_or(0.0);
    let tol = largest * (u.nrows().max(v.nrows()) as f64) * f64::EPSILON;
    let rank = s.iter().take_while(|&&x| x > tol).count();
    if rank == 0 {
        return Err(Error::InvalidParameter("matrix has rank 0; nothing to decompose".into()));
    }
    let keep = n.min(rank);
    let mut u = u.columns(0, keep).into_owned();
    let mut v = v.columns(0, keep).into_owned();
    for k in 0..keep {
        let col = v.column(k);
        let mut pivot = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            v.column_mut(k).neg_mut();
            u.column_mut(k).neg_mut();
        }
    }
    Ok(SvdFactors {
        singular_values: s[..keep].to_vec(),
        doc_factors: u,
        term_factors: v,
        doc_ids,
        rank_limited: keep < n,
    })
}

/// Document embeddings `U_n Σ_n` (equivalently `M V_n`).
pub fn project_documents(factors: &SvdFactors) -> EmbeddingMatrix {
    let rows = factors.doc_factors.nrows();
    let dim = factors.n();
    let mut data = Vec::with_capacity(rows * dim);
    for i in 0..rows {
        for k in 0..dim {
            data.push(factors.doc_factors[(i, k)] * factors.singular_values[k]);
        }
    }
    EmbeddingMatrix {
        rows,
        dim,
        data,
        doc_ids: factors.doc_ids.clone(),
    }
}

/// Maps a reduced vector back to term space: `x V_nᵀ`.
pub fn back_transform(reduced: &[f64], factors: &SvdFactors) -> Result<Vec<f64>> {
    if reduced.len() != factors.n() {
        return Err(Error::DimensionMismatch {
            expected: factors.n(),
            got: reduced.len(),
        });
    }
    let v = &factors.term_factors;
    Ok((0..v.nrows())
        .map(|j| (0..reduced.len()).map(|k| reduced[k] * v[(j, k)]).sum())
        .collect())
}

/// Writes the singular values as CSV with columns `component`,`singular_value`.
pub fn write_singular_values_csv<W: std::io::Write>(out: W, factors: &SvdFactors) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["component", "singular_value"])?;
    for (k, s) in factors.singular_values.iter().enumerate() {
        w.write_record([(k + 1).to_string(), format!("{s:e}")])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
