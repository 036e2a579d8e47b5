use serde::{Deserialize, Serialize};

use super::ContingencyTable;

/// How the two partition entropies are combined in the AMI denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmiNormalizer {
    #[default]
    Arithmetic,
    Max,
}

impl AmiNormalizer {
    fn combine(self, hu: f64, hv: f64) -> f64 {
        match self {
            AmiNormalizer::Arithmetic => 0.5 * (hu + hv),
            AmiNormalizer::Max => hu.max(hv),
        }
    }
}

/// Shannon entropy in nats of the partition with the given block sizes.
pub fn entropy(marginals: &[u64], n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    marginals
        .iter()
        .filter(|&&m| m > 0)
        .map(|&m| {
            let p = m as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information in nats between classes and clusters.
pub fn mutual_information(table: &ContingencyTable) -> f64 {
    let n = table.n();
    if n == 0 {
        return 0.0;
    }
    let a = table.class_totals();
    let b = table.cluster_totals();
    let nf = n as f64;
    let mut mi = 0.0;
    for (i, row) in table.counts().iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / nf * (nf * nij / (a[i] as f64 * b[j] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// `ln(k!)` for `k = 0..=n`.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Expected mutual information between two random partitions with the same
/// block sizes as `table`, under the permutation (hypergeometric) model.
pub fn expected_mi(table: &ContingencyTable) -> f64 {
    let n = table.n();
    if n <= 1 {
        return 0.0;
    }
    let a = table.class_totals();
    let b = table.cluster_totals();
    let lf = ln_factorials(n);
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a.iter().filter(|&&x| x > 0) {
        for &bj in b.iter().filter(|&&x| x > 0) {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            // ln of a_i! b_j! (N-a_i)! (N-b_j)! / N!
            let fixed = lf[ai as usize] + lf[bj as usize] + lf[(n - ai) as usize] + lf[(n - bj) as usize]
                - lf[n as usize];
            for m in lo..=hi {
                let ln_p = fixed
                    - lf[m as usize]
                    - lf[(ai - m) as usize]
                    - lf[(bj - m) as usize]
                    - lf[(n + m - ai - bj) as usize];
                let mf = m as f64;
                emi += mf / nf * (nf * mf / (ai as f64 * bj as f64)).ln() * ln_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information: `(MI − E[MI]) / (norm(H(U), H(V)) − E[MI])`.
///
/// Identical partitions score exactly 1. When the denominator vanishes (both
/// partitions trivial) the score is 1 for identical partitions and 0
/// otherwise.
pub fn ami(table: &ContingencyTable, normalizer: AmiNormalizer) -> f64 {
    let n = table.n();
    if n == 0 {
        return 0.0;
    }
    if table.is_matching() {
        return 1.0;
    }
    let hu = entropy(&table.class_totals(), n);
    let hv = entropy(&table.cluster_totals(), n);
    let mi = mutual_information(table);
    let emi = expected_mi(table);
    let denom = normalizer.combine(hu, hv) - emi;
    if denom == 0.0 {
        return 0.0;
    }
    (mi - emi) / denom
}
