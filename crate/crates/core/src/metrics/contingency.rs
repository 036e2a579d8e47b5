use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class-by-cluster co-occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    class_labels: Vec<String>,
    cluster_labels: Vec<String>,
}

impl ContingencyTable {
    pub fn from_counts(counts: Vec<Vec<u64>>, class_labels: Vec<String>, cluster_labels: Vec<String>) -> Result<Self> {
        if counts.len() != class_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: class_labels.len(),
                got: counts.len(),
            });
        }
        if let Some(row) = counts.iter().find(|r| r.len() != cluster_labels.len()) {
            return Err(Error::DimensionMismatch {
                expected: cluster_labels.len(),
                got: row.len(),
            });
        }
        Ok(ContingencyTable {
            counts,
            class_labels,
            cluster_labels,
        })
    }

    /// Counts classes (rows, in order of first appearance) against clusters
    /// `0..k`.
    pub fn from_labels<S: AsRef<str>>(truth: &[S], predicted: &[usize], k: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut class_index: HashMap<&str, usize> = HashMap::new();
        let mut class_labels = Vec::new();
        let mut counts: Vec<Vec<u64>> = Vec::new();
        for (t, &p) in truth.iter().zip(predicted) {
            if p >= k {
                return Err(Error::InvalidParameter(format!("cluster index {p} >= k = {k}")));
            }
            let t = t.as_ref();
            let row = *class_index.entry(t).or_insert_with(|| {
                class_labels.push(t.to_string());
                counts.push(vec![0; k]);
                counts.len() - 1
            });
            counts[row][p] += 1;
        }
        Ok(ContingencyTable {
            counts,
            class_labels,
            cluster_labels: (0..k).map(|j| j.to_string()).collect(),
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, class: usize, cluster: usize) -> u64 {
        self.counts[class][cluster]
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn cluster_labels(&self) -> &[String] {
        &self.cluster_labels
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_labels.len()
    }

    pub fn class_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn cluster_totals(&self) -> Vec<u64> {
        (0..self.n_clusters())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub(crate) fn column_max(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).max().unwrap_or(0)
    }

    /// True when both partitions are the same up to relabeling: every
    /// nonempty row and column has exactly one nonzero cell.
    pub fn is_matching(&self) -> bool {
        let rows_ok = self
            .counts
            .iter()
            .all(|r| r.iter().filter(|&&c| c > 0).count() <= 1);
        let cols_ok = (0..self.n_clusters())
            .all(|j| self.counts.iter().filter(|r| r[j] > 0).count() <= 1);
        rows_ok && cols_ok
    }

    /// The same counts with classes and clusters swapped.
    pub fn transpose(&self) -> ContingencyTable {
        ContingencyTable {
            counts: (0..self.n_clusters())
                .map(|j| self.counts.iter().map(|r| r[j]).collect())
                .collect(),
            class_labels: self.cluster_labels.clone(),
            cluster_labels: self.class_labels.clone(),
        }
    }

    /// CSV with a header row of cluster ids (after a leading `class` cell)
    /// and one row per class.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["class".to_string()];
        header.extend(self.cluster_labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.class_labels.iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the layout written by [`write_csv`](Self::write_csv). The first
    /// header cell is ignored. Counts may use `,` thousands separators when
    /// quoted.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cluster_labels: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut counts = Vec::new();
        let mut class_labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut cells = rec.iter();
            class_labels.push(cells.next().unwrap_or_default().to_string());
            let row = cells
                .map(|c| {
                    c.replace(',', "").trim().parse::<u64>().map_err(|e| Error::Malformed {
                        line: line + 2,
                        message: format!("count `{c}`: {e}"),
                    })
                })
                .collect::<Result<Vec<u64>>>()?;
            counts.push(row);
        }
        Self::from_counts(counts, class_labels, cluster_labels)
    }
}

/// Builds the class-by-cluster table for documents identified by `ids`.
/// `truth` must cover exactly the same ids; class rows follow `classes`.
pub fn contingency(
    ids: &[String],
    predicted: &[usize],
    k: usize,
    truth: &HashMap<String, String>,
    classes: &[String],
) -> Result<ContingencyTable> {
    if ids.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: ids.len(),
            got: predicted.len(),
        });
    }
    let id_set: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let missing: Vec<String> = ids.iter().filter(|id| !truth.contains_key(*id)).cloned().collect();
    let mut extra: Vec<String> = truth
        .keys()
        .filter(|id| !id_set.contains(id.as_str()))
        .cloned()
        .collect();
    extra.sort();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::IdMismatch { missing, extra });
    }
    let class_index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut counts = vec![vec![0u64; k]; classes.len()];
    for (id, &p) in ids.iter().zip(predicted) {
        let class = &truth[id];
        let row = *class_index
            .get(class.as_str())
            .ok_or_else(|| Error::InvalidDataset(format!("unknown class `{class}` for `{id}`")))?;
        if p >= k {
            return Err(Error::InvalidParameter(format!("cluster index {p} >= k = {k}")));
        }
        counts[row][p] += 1;
    }
    ContingencyTable::from_counts(counts, classes.to_vec(), (0..k).map(|j| j.to_string()).collect())
}
