//! Vocabulary reduction: VCGS top-R keyword discovery and document-frequency
//! thresholding, plus column restriction of the weighted matrix.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorizer::{TermDocMatrix, Vocabulary};

/// VCGS parameters. `percent` is a percentage: 0.1 means 0.1% of documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcgsParams {
    #[serde(rename = "r")]
    pub rank_threshold: usize,
    #[serde(rename = "p")]
    pub percent: f64,
}

impl VcgsParams {
    pub fn new(rank_threshold: usize, percent: f64) -> Result<Self> {
        let p = VcgsParams {
            rank_threshold,
            percent,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank_threshold < 1 {
            return Err(Error::InvalidParameter("VCGS rank threshold R must be >= 1".into()));
        }
        if !(self.percent > 0.0 && self.percent < 100.0) {
            return Err(Error::InvalidParameter(format!(
                "VCGS percent threshold P must lie in (0, 100), got {}",
                self.percent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfParams {
    pub tau_df: usize,
}

impl DfParams {
    pub fn new(tau_df: usize) -> Result<Self> {
        let p = DfParams { tau_df };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_df < 2 {
            return Err(Error::InvalidParameter(format!(
                "tau_df must be >= 2, got {}",
                self.tau_df
            )));
        }
        Ok(())
    }
}

/// Kept term indices together with the per-term VCGS hit counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcgsSelection {
    pub kept: Vec<usize>,
    /// For every vocabulary term, the number of documents in which it ranked
    /// within the top R.
    pub hits: Vec<usize>,
}

/// Counts, for every term, the documents in which it ranks within the top
/// `rank_threshold` by weight (ties broken by ascending column).
pub fn vcgs_hit_counts(matrix: &TermDocMatrix, rank_threshold: usize) -> Vec<usize> {
    let per_doc: Vec<Vec<usize>> = (0..matrix.rows())
        .into_par_iter()
        .map(|i| {
            let (cols, vals) = matrix.row(i);
            let mut order: Vec<usize> = (0..cols.len()).collect();
            order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(cols[a].cmp(&cols[b])));
            order.truncate(rank_threshold);
            order.into_iter().map(|p| cols[p]).collect()
        })
        .collect();
    let mut hits = vec![0usize; matrix.cols()];
    for top in per_doc {
        for j in top {
            hits[j] += 1;
        }
    }
    hits
}

/// Keeps term `j` when it is among the top R terms of strictly more than
/// `P / 100 * N` documents.
pub fn vcgs_select(matrix: &TermDocMatrix, params: &VcgsParams) -> Result<VcgsSelection> {
    params.validate()?;
    if matrix.rows() == 0 || matrix.cols() == 0 {
        return Err(Error::InvalidParameter("VCGS needs a nonempty matrix".into()));
    }
    let hits = vcgs_hit_counts(matrix, params.rank_threshold);
    let threshold = params.percent / 100.0 * matrix.rows() as f64;
    let kept: Vec<usize> = (0..hits.len()).filter(|&j| hits[j] as f64 > threshold).collect();
    if kept.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no term is in the top {} of more than {}% of documents; raise R or lower P",
            params.rank_threshold, params.percent
        )));
    }
    Ok(VcgsSelection { kept, hits })
}

/// Keeps term `j` when `df_j >= tau_df`.
pub fn df_select(vocab: &Vocabulary, params: &DfParams) -> Result<Vec<usize>> {
    params.validate()?;
    let kept: Vec<usize> = (0..vocab.len())
        .filter(|&j| vocab.df()[j] >= params.tau_df)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no term has document frequency >= {}; lower tau_df",
            params.tau_df
        )));
    }
    Ok(kept)
}

/// A column-restricted matrix and the number of rows left without any
/// stored weight.
#[derive(Debug, Clone)]
pub struct Restricted {
    pub matrix: TermDocMatrix,
    pub zero_rows: usize,
}

/// Drops every column outside `subset`. Weights are not recomputed; the
/// vocabulary is re-indexed in ascending order of the original columns.
/// Rows that lose all their weights stay in place as zero rows.
pub fn restrict(matrix: &TermDocMatrix, subset: &[usize]) -> Result<Restricted> {
    if subset.is_empty() {
        return Err(Error::EmptySelection("restriction subset is empty".into()));
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&bad) = sorted.iter().find(|&&j| j >= matrix.cols()) {
        return Err(Error::InvalidParameter(format!(
            "column {bad} is out of range for {} columns",
            matrix.cols()
        )));
    }
    let mut remap = vec![usize::MAX; matrix.cols()];
    for (new, &old) in sorted.iter().enumerate() {
        remap[old] = new;
    }
    let rows = (0..matrix.rows())
        .map(|i| {
            let (cols, vals) = matrix.row(i);
            cols.iter()
                .zip(vals)
                .filter(|(&j, _)| remap[j] != usize::MAX)
                .map(|(&j, &v)| (remap[j], v))
                .collect()
        })
        .collect();
    let restricted = TermDocMatrix::from_rows(
        rows,
        matrix.vocab().restrict(&sorted),
        matrix.scheme(),
        matrix.doc_ids().to_vec(),
    )?;
    let zero_rows = restricted.zero_rows();
    Ok(Restricted {
        matrix: restricted,
        zero_rows,
    })
}

/// Writes the kept terms as CSV with columns `term`,`df`,`hits`. `hits` is
/// empty when the selector does not produce hit counts.
pub fn write_selection_csv<W: Write>(
    out: W,
    vocab: &Vocabulary,
    kept: &[usize],
    hits: Option<&[usize]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["term", "df", "hits"])?;
    for &j in kept {
        let h = hits.map(|h| h[j].to_string()).unwrap_or_default();
        w.write_record([vocab.term(j), &vocab.df()[j].to_string(), &h])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorizer::{build_vocabulary, WeightScheme};

    /// Matrix with explicit weights over a vocabulary `t0..t{cols}`, each term
    /// given df = rows so the vocabulary invariant holds.
    fn matrix(rows: &[&[(usize, f64)]], cols: usize) -> TermDocMatrix {
        let docs: Vec<Vec<String>> = (0..rows.len().max(2))
            .map(|_| (0..cols).map(|j| format!("t{j}")).collect())
            .collect();
        let vocab = build_vocabulary(&docs).unwrap();
        let ids = (0..rows.len()).map(|i| format!("d{i}")).collect();
        TermDocMatrix::from_rows(
            rows.iter().map(|r| r.to_vec()).collect(),
            vocab,
            WeightScheme::LogTf,
            ids,
        )
        .unwrap()
    }

    #[test]
    fn vcgs_strict_threshold() {
        // t0 is top-1 only in d0; threshold 0.3 * 3 = 0.9 < 1
        let m = matrix(
            &[&[(0, 5.0), (1, 1.0)], &[(1, 2.0), (2, 1.0)], &[(2, 3.0), (0, 1.0)]],
            3,
        );
        let sel = vcgs_select(&m, &VcgsParams::new(1, 30.0).unwrap()).unwrap();
        assert_eq!(sel.hits, [1, 1, 1]);
        assert_eq!(sel.kept, [0, 1, 2]);
        // 34% of 3 = 1.02 > 1 hit
        assert!(matches!(
            vcgs_select(&m, &VcgsParams::new(1, 34.0).unwrap()),
            Err(Error::EmptySelection(_))
        ));
    }

    #[test]
    fn vcgs_drops_terms_never_in_top_r() {
        let m = matrix(&[&[(0, 5.0), (1, 1.0)], &[(0, 2.0), (1, 1.0)]], 2);
        let sel = vcgs_select(&m, &VcgsParams::new(1, 10.0).unwrap()).unwrap();
        assert_eq!(sel.kept, [0]);
        assert_eq!(sel.hits[1], 0);
    }

    #[test]
    fn vcgs_ties_prefer_lower_index() {
        let m = matrix(&[&[(0, 1.0), (1, 1.0)], &[(1, 1.0), (2, 1.0)]], 3);
        let hits = vcgs_hit_counts(&m, 1);
        assert_eq!(hits, [1, 1, 0]);
    }

    #[test]
    fn vcgs_large_r_keeps_every_weighted_term() {
        let m = matrix(&[&[(0, 5.0), (1, 1.0)], &[(2, 1.0)], &[]], 4);
        let sel = vcgs_select(&m, &VcgsParams::new(10, 1e-9).unwrap()).unwrap();
        assert_eq!(sel.kept, [0, 1, 2]);
    }

    #[test]
    fn vcgs_param_validation() {
        assert!(VcgsParams::new(0, 1.0).is_err());
        assert!(VcgsParams::new(1, 0.0).is_err());
        assert!(VcgsParams::new(1, 100.0).is_err());
    }

    #[test]
    fn df_examples() {
        let docs: Vec<Vec<String>> = (0..50)
            .map(|i| {
                let mut d = vec!["common".to_string()];
                if i < 10 {
                    d.push("mid".into());
                }
                if i < 3 {
                    d.push("rare".into());
                }
                d
            })
            .collect();
        let vocab = build_vocabulary(&docs).unwrap();
        assert_eq!(vocab.df(), [50, 10, 3]);
        assert_eq!(df_select(&vocab, &DfParams::new(10).unwrap()).unwrap(), [0, 1]);
        assert_eq!(df_select(&vocab, &DfParams::new(2).unwrap()).unwrap(), [0, 1, 2]);
        assert!(matches!(
            df_select(&vocab, &DfParams::new(51).unwrap()),
            Err(Error::EmptySelection(_))
        ));
        assert!(DfParams::new(1).is_err());
    }

    #[test]
    fn restrict_examples() {
        let m = matrix(&[&[(0, 5.0), (1, 1.0)], &[(1, 2.0)], &[(0, 3.0), (2, 1.5)]], 3);
        let all = restrict(&m, &[0, 1, 2]).unwrap();
        assert_eq!(all.matrix, m);
        assert_eq!(all.zero_rows, 0);

        let one = restrict(&m, &[2]).unwrap();
        assert_eq!(one.matrix.cols(), 1);
        assert_eq!(one.matrix.vocab().terms(), ["t2"]);
        assert_eq!(one.matrix.get(2, 0), 1.5);

        let dropped = restrict(&m, &[0, 2]).unwrap();
        assert_eq!(dropped.zero_rows, 1);
        assert!(dropped.matrix.is_zero_row(1));
        assert_eq!(dropped.matrix.rows(), 3);

        assert!(restrict(&m, &[]).is_err());
        assert!(restrict(&m, &[3]).is_err());
    }

    #[test]
    fn selection_csv() {
        let m = matrix(&[&[(0, 5.0), (1, 1.0)], &[(0, 2.0)]], 2);
        let sel = vcgs_select(&m, &VcgsParams::new(1, 10.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_selection_csv(&mut buf, m.vocab(), &sel.kept, Some(&sel.hits)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "term,df,hits\nt0,2,2\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_matrix() -> impl Strategy<Value = TermDocMatrix> {
            proptest::collection::vec(
                proptest::collection::vec((0usize..8, 0.1f64..10.0), 0..8),
                2..15,
            )
            .prop_map(|rows| {
                let rows: Vec<Vec<(usize, f64)>> = rows
                    .into_iter()
                    .map(|mut r| {
                        r.sort_by_key(|e| e.0);
                        r.dedup_by_key(|e| e.0);
                        r
                    })
                    .collect();
                let refs: Vec<&[(usize, f64)]> = rows.iter().map(Vec::as_slice).collect();
                matrix(&refs, 8)
            })
        }

        fn kept_or_empty(m: &TermDocMatrix, r: usize, p: f64) -> Vec<usize> {
            vcgs_select(m, &VcgsParams::new(r, p).unwrap())
                .map(|s| s.kept)
                .unwrap_or_default()
        }

        proptest! {
            #[test]
            fn vcgs_monotone(m in random_matrix(), r in 1usize..6, dr in 0usize..4, p in 0.5f64..60.0, dp in 0.0f64..30.0) {
                let base = kept_or_empty(&m, r, p);
                let wider = kept_or_empty(&m, r + dr, p);
                let stricter = kept_or_empty(&m, r, p + dp);
                prop_assert!(base.iter().all(|j| wider.contains(j)));
                prop_assert!(stricter.iter().all(|j| base.contains(j)));
            }

            #[test]
            fn restrict_composes(m in random_matrix(), a in proptest::collection::btree_set(0usize..8, 1..8), b in proptest::collection::btree_set(0usize..8, 1..8)) {
                let inter: Vec<usize> = a.intersection(&b).copied().collect();
                prop_assume!(!inter.is_empty());
                let once = restrict(&m, &inter).unwrap().matrix;
                let all: Vec<usize> = (0..once.cols()).collect();
                let twice = restrict(&once, &all).unwrap().matrix;
                prop_assert_eq!(&once, &twice);

                // restricting to `a` first, then to the image of the intersection
                let first = restrict(&m, &a.iter().copied().collect::<Vec<_>>()).unwrap().matrix;
                let image: Vec<usize> = inter.iter().map(|t| first.vocab().index_of(&format!("t{t}")).unwrap()).collect();
                let nested = restrict(&first, &image).unwrap().matrix;
                prop_assert_eq!(nested, once);
            }
        }
    }
}
