//! Reference implementations used as test oracles. They favor directness
//! over speed and share no code with the library.

#![allow(dead_code)]

/// Singular values of a dense row-major matrix by one-sided Jacobi
/// rotations, descending.
pub fn jacobi_singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    // work on the orientation with fewer columns
    let cols: Vec<Vec<f64>> = if n <= m {
        (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect()
    } else {
        a.to_vec()
    };
    let mut u = cols;
    let k = u.len();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..u[p].len() {
                    let (x, y) = (u[p][i], u[q][i]);
                    u[p][i] = c * x - s * y;
                    u[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = u.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn plogp_entropy(counts: &[u64], n: u64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

fn marginals(table: &[Vec<u64>]) -> (Vec<u64>, Vec<u64>, u64) {
    let a: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let b: Vec<u64> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let n = a.iter().sum();
    (a, b, n)
}

/// Mutual information straight from the definition.
pub fn oracle_mi(table: &[Vec<u64>]) -> f64 {
    let (a, b, n) = marginals(table);
    let nf = n as f64;
    let mut mi = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let c = table[i][j];
            if c > 0 {
                let pij = c as f64 / nf;
                let pi = a[i] as f64 / nf;
                let pj = b[j] as f64 / nf;
                mi += pij * (pij / (pi * pj)).ln();
            }
        }
    }
    mi
}

/// Calls `visit` on every nonnegative integer table with row sums `a` and
/// column sums `b`.
pub fn for_each_table(a: &[u64], b: &[u64], visit: &mut dyn FnMut(&[Vec<u64>])) {
    fn fill(
        i: usize,
        j: usize,
        row_left: u64,
        col_left: &mut Vec<u64>,
        table: &mut Vec<Vec<u64>>,
        a: &[u64],
        visit: &mut dyn FnMut(&[Vec<u64>]),
    ) {
        let (r, c) = (a.len(), col_left.len());
        if i == r - 1 {
            // last row is forced by the column sums
            let last: Vec<u64> = col_left.clone();
            table[i] = last;
            visit(table);
            return;
        }
        if j == c - 1 {
            if row_left <= col_left[j] {
                table[i][j] = row_left;
                col_left[j] -= row_left;
                fill(i + 1, 0, a[i + 1], col_left, table, a, visit);
                col_left[j] += row_left;
            }
            return;
        }
        for v in 0..=row_left.min(col_left[j]) {
            table[i][j] = v;
            col_left[j] -= v;
            fill(i, j + 1, row_left - v, col_left, table, a, visit);
            col_left[j] += v;
        }
    }
    let mut col_left = b.to_vec();
    let mut table = vec![vec![0; b.len()]; a.len()];
    fill(0, 0, a[0], &mut col_left, &mut table, a, visit);
}

/// Expected mutual information by enumerating every table with the same
/// margins, weighted by its probability under random relabeling.
pub fn oracle_emi(a: &[u64], b: &[u64]) -> f64 {
    let n: u64 = a.iter().sum();
    let fixed: f64 = a.iter().chain(b).map(|&x| factorial(x)).product::<f64>() / factorial(n);
    let mut emi = 0.0;
    let mut total_p = 0.0;
    for_each_table(a, b, &mut |t| {
        let denom: f64 = t.iter().flatten().map(|&x| factorial(x)).product();
        let p = fixed / denom;
        total_p += p;
        emi += p * oracle_mi(t);
    });
    assert!((total_p - 1.0).abs() < 1e-9, "table probabilities sum to {total_p}");
    emi
}

/// AMI from first principles; `max_norm` selects the max-entropy
/// denominator instead of the arithmetic mean.
pub fn oracle_ami(table: &[Vec<u64>], max_norm: bool) -> f64 {
    let (a, b, n) = marginals(table);
    let hu = plogp_entropy(&a, n);
    let hv = plogp_entropy(&b, n);
    let mi = oracle_mi(table);
    let emi = oracle_emi(&a, &b);
    let norm = if max_norm { hu.max(hv) } else { 0.5 * (hu + hv) };
    (mi - emi) / (norm - emi)
}

fn oracle_cosine_distance(x: &[f64], y: &[f64]) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return 1.0;
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    1.0 - dot / (nx * ny)
}

/// Mean silhouette by explicit pairwise distances. `pooled` takes `b_i` over
/// all documents outside the own cluster; otherwise over the nearest other
/// cluster.
pub fn brute_silhouette(rows: &[Vec<f64>], labels: &[usize], pooled: bool) -> f64 {
    let n = rows.len();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += oracle_cosine_distance(&rows[i], &rows[j]);
                counts[labels[j]] += 1;
            }
        }
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = if pooled {
            let s: f64 = (0..k).filter(|&c| c != own).map(|c| sums[c]).sum();
            let m: usize = (0..k).filter(|&c| c != own).map(|c| counts[c]).sum();
            s / m as f64
        } else {
            (0..k)
                .filter(|&c| c != own && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min)
        };
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

/// Sum of squared distances of `points` to their group means.
pub fn sse(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let d = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..d).map(|t| members.iter().map(|p| p[t]).sum::<f64>() / members.len() as f64).collect();
        total += members
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
            .sum::<f64>();
    }
    total
}

/// Minimum-SSE split into two nonempty groups by trying all of them.
pub fn best_two_partition(points: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut best = (f64::INFINITY, Vec::new());
    // fixing point 0 in group 0 skips mirrored labelings
    for mask in 1u64..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { 1 } else { 0 }).collect();
        let s = sse(points, &labels);
        if s < best.0 {
            best = (s, labels);
        }
    }
    best
}

/// Whether two labelings describe the same partition.
pub fn same_partition(x: &[usize], y: &[usize]) -> bool {
    x.len() == y.len()
        && (0..x.len()).all(|i| (0..x.len()).all(|j| (x[i] == x[j]) == (y[i] == y[j])))
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    oracle_cosine_distance(x, y)
}
