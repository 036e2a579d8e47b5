//! Cluster-quality measures: purity, per-cluster homogeneity, adjusted
//! mutual information against ground-truth classes, and the cosine
//! silhouette coefficient.

mod contingency;
mod info;
mod silhouette;

use serde::{Deserialize, Serialize};

pub use contingency::{contingency, ContingencyTable};
pub use info::{ami, entropy, expected_mi, mutual_information, AmiNormalizer};
pub use silhouette::{silhouette, silhouette_samples, SilhouetteVariant};

use crate::cluster::{Clustering, VectorSet};
use crate::error::Result;

/// Fraction of documents that belong to their cluster's majority class.
pub fn purity(table: &ContingencyTable) -> f64 {
    let n = table.n();
    if n == 0 {
        return 0.0;
    }
    let majority: u64 = (0..table.n_clusters()).map(|j| table.column_max(j)).sum();
    majority as f64 / n as f64
}

/// Majority-class share of each cluster. Empty clusters report 0.
pub fn homogeneity(table: &ContingencyTable) -> Vec<f64> {
    let totals = table.cluster_totals();
    (0..table.n_clusters())
        .map(|j| {
            if totals[j] == 0 {
                0.0
            } else {
                table.column_max(j) as f64 / totals[j] as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    #[serde(default)]
    pub ami_normalizer: AmiNormalizer,
    #[serde(default)]
    pub silhouette: SilhouetteVariant,
}

/// Serialized as `{"sc", "prt", "ami", "homogeneity", "k"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Absent when there is only one cluster.
    pub sc: Option<f64>,
    pub prt: f64,
    pub ami: f64,
    pub homogeneity: Vec<f64>,
    pub k: usize,
}

/// Scores a clustering of `vectors` against class labels aligned with the
/// rows.
pub fn evaluate<V: VectorSet + ?Sized, S: AsRef<str>>(
    vectors: &V,
    clustering: &Clustering,
    truth: &[S],
    options: &MetricOptions,
) -> Result<(MetricReport, ContingencyTable)> {
    let table = ContingencyTable::from_labels(truth, &clustering.assignments, clustering.k())?;
    let sc = if clustering.sizes().iter().filter(|&&s| s > 0).count() >= 2 {
        Some(silhouette(
            vectors,
            &clustering.assignments,
            options.silhouette,
        )?)
    } else {
        None
    };
    let report = MetricReport {
        sc,
        prt: purity(&table),
        ami: ami(&table, options.ami_normalizer),
        homogeneity: homogeneity(&table),
        k: clustering.k(),
    };
    Ok((report, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The printed class-by-cluster matching matrix of the best abstract run.
    pub(crate) fn table4() -> ContingencyTable {
        ContingencyTable::from_counts(
            vec![
                vec![1597, 0, 822, 12],
                vec![36, 17, 6242, 2220],
                vec![0, 3, 478, 843],
                vec![0, 878, 704, 44],
            ],
            vec![
                "Triple Negative Breast Neoplasms".into(),
                "Carcinoma, Ductal, Breast".into(),
                "Carcinoma, Lobular".into(),
                "Breast Neoplasms, Male".into(),
            ],
            vec!["C_1".into(), "C_2".into(), "C_3".into(), "C_4".into()],
        )
        .unwrap()
    }

    #[test]
    fn table4_purity_and_homogeneity() {
        let t = table4();
        assert_eq!(t.cluster_totals(), [1633, 898, 8246, 3119]);
        assert_eq!(t.n(), 13_896);
        let prt = purity(&t);
        assert!((prt - 0.787).abs() < 1e-3, "purity {prt}");
        let h = homogeneity(&t);
        for (got, want) in h.iter().zip([0.978, 0.978, 0.757, 0.712]) {
            assert!((got - want).abs() < 1e-3, "homogeneity {got} vs {want}");
        }
    }

    #[test]
    fn purity_edge_cases() {
        let own = ContingencyTable::from_labels(&["a", "a", "b", "c"], &[0, 1, 2, 3], 4).unwrap();
        assert_eq!(purity(&own), 1.0);
        let one = ContingencyTable::from_counts(vec![vec![5], vec![5]], vec!["x".into(), "y".into()], vec!["0".into()]).unwrap();
        assert_eq!(purity(&one), 0.5);
    }

    #[test]
    fn homogeneity_edge_cases() {
        let pure = ContingencyTable::from_labels(&["a", "a", "b"], &[0, 0, 1], 2).unwrap();
        assert_eq!(homogeneity(&pure), [1.0, 1.0]);
        let even = ContingencyTable::from_labels(&["a", "b", "c", "d"], &[0, 0, 0, 0], 1).unwrap();
        assert_eq!(homogeneity(&even), [0.25]);
    }

    #[test]
    fn report_json_keys() {
        let r = MetricReport {
            sc: None,
            prt: 0.5,
            ami: 0.0,
            homogeneity: vec![0.5],
            k: 1,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["ami", "homogeneity", "k", "prt", "sc"]);
        assert!(v["sc"].is_null());
    }
}
