//! Tokenization, vocabulary construction, and tf-idf weighting of the
//! document-term matrix.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../fixtures/stopwords_en.txt");

/// A set of terms removed during tokenization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn none() -> Self {
        Stopwords(HashSet::new())
    }

    /// One term per line; blank lines are ignored.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Lowercases and splits `text` into terms.
///
/// Any non-alphanumeric character separates tokens, except a hyphen with an
/// alphanumeric character on both sides. Tokens shorter than two characters,
/// tokens without a letter, and stopwords are dropped.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        if current.chars().count() >= 2
            && current.chars().any(char::is_alphabetic)
            && !stopwords.contains(current)
        {
            tokens.push(std::mem::take(current));
        } else {
            current.clear();
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if c == '-'
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else {
            flush(&mut current);
        }
    }
    flush(&mut current);
    tokens
}

/// Retained terms with their document frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<usize>, n_docs: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms,
            df,
            n_docs,
            index,
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, j: usize) -> &str {
        &self.terms[j]
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// A vocabulary holding only the given term indices, re-indexed in the
    /// given order. Document frequencies and N are kept as they were.
    pub fn restrict(&self, subset: &[usize]) -> Vocabulary {
        Vocabulary::from_parts(
            subset.iter().map(|&j| self.terms[j].clone()).collect(),
            subset.iter().map(|&j| self.df[j]).collect(),
            self.n_docs,
        )
    }
}

/// Counts document frequencies and drops terms seen in only one document.
/// Terms keep first-appearance order.
pub fn build_vocabulary<S: AsRef<str>>(token_lists: &[Vec<S>]) -> Result<Vocabulary> {
    if token_lists.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 documents to build a vocabulary, got {}",
            token_lists.len()
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for tokens in token_lists {
        let mut seen: HashSet<&str> = HashSet::new();
        for t in tokens {
            let t = t.as_ref();
            if seen.insert(t) {
                let count = df.entry(t).or_insert_with(|| {
                    order.push(t);
                    0
                });
                *count += 1;
            }
        }
    }
    let (terms, dfs): (Vec<String>, Vec<usize>) = order
        .into_iter()
        .filter_map(|t| {
            let d = df[t];
            (d >= 2).then(|| (t.to_string(), d))
        })
        .unzip();
    if terms.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(Vocabulary::from_parts(terms, dfs, token_lists.len()))
}

/// tf-idf variant. All logarithms are natural.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `ln(tf) * (N / df)`
    #[default]
    LogTf,
    /// `ln(tf * N / df)`
    LogInside,
    /// `(1 + ln tf) * ln(N / df)`
    Standard,
}

impl WeightScheme {
    pub fn weight(self, tf: usize, df: usize, n_docs: usize) -> f64 {
        let tf = tf as f64;
        let ratio = n_docs as f64 / df as f64;
        match self {
            WeightScheme::LogTf => tf.ln() * ratio,
            WeightScheme::LogInside => (tf * ratio).ln(),
            WeightScheme::Standard => (1.0 + tf.ln()) * ratio.ln(),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::LogTf => "log_tf",
            WeightScheme::LogInside => "log_inside",
            WeightScheme::Standard => "standard",
        })
    }
}

/// Sparse document-by-term weight matrix in compressed row form. Row `i` is
/// document `doc_ids[i]`, column `j` is `vocab.term(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    scheme: WeightScheme,
    vocab: Vocabulary,
    doc_ids: Vec<String>,
}

impl TermDocMatrix {
    /// Builds a matrix from per-row `(column, weight)` lists. Zero weights are
    /// dropped and each row is sorted by column.
    pub fn from_rows(
        rows: Vec<Vec<(usize, f64)>>,
        vocab: Vocabulary,
        scheme: WeightScheme,
        doc_ids: Vec<String>,
    ) -> Result<Self> {
        if rows.len() != doc_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: doc_ids.len(),
                got: rows.len(),
            });
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, w) in row {
                if j >= vocab.len() {
                    return Err(Error::DimensionMismatch {
                        expected: vocab.len(),
                        got: j + 1,
                    });
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "weight {w} at column {j} is not a finite nonnegative value"
                    )));
                }
                if w != 0.0 {
                    indices.push(j);
                    values.push(w);
                }
            }
            indptr.push(indices.len());
        }
        Ok(TermDocMatrix {
            indptr,
            indices,
            values,
            scheme,
            vocab,
            doc_ids,
        })
    }

    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.vocab.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Column indices and weights of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.indptr[i] == self.indptr[i + 1]
    }

    pub fn zero_rows(&self) -> usize {
        (0..self.rows()).filter(|&i| self.is_zero_row(i)).count()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| {
                let mut dense = vec![0.0; self.cols()];
                let (cols, vals) = self.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    dense[j] = v;
                }
                dense
            })
            .collect()
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "% rows: documents, columns: terms, scheme: {}", self.scheme)?;
        writeln!(out, "{} {} {}", self.rows(), self.cols(), self.nnz())?;
        for i in 0..self.rows() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {v:e}", i + 1, j + 1)?;
            }
        }
        Ok(())
    }
}

/// Weights every in-vocabulary term occurrence with `scheme`. Entries whose
/// weight is zero are not stored.
pub fn weight_matrix<S: AsRef<str> + Sync>(
    token_lists: &[Vec<S>],
    doc_ids: Vec<String>,
    vocab: &Vocabulary,
    scheme: WeightScheme,
) -> Result<TermDocMatrix> {
    let n_docs = vocab.n_docs();
    let rows: Vec<Vec<(usize, f64)>> = token_lists
        .par_iter()
        .map(|tokens| {
            let mut tf: HashMap<usize, usize> = HashMap::new();
            for t in tokens {
                if let Some(j) = vocab.index_of(t.as_ref()) {
                    *tf.entry(j).or_default() += 1;
                }
            }
            tf.into_iter()
                .map(|(j, count)| (j, scheme.weight(count, vocab.df()[j], n_docs)))
                .collect()
        })
        .collect();
    TermDocMatrix::from_rows(rows, vocab.clone(), scheme, doc_ids)
}
