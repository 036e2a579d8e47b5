//! Cluster descriptors (top centroid terms) and 2-D projections for
//! plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::Clustering;
use crate::error::{Error, Result};
use crate::lsa::{back_transform, project_documents, truncated_svd, SvdFactors};
use crate::vectorizer::{TermDocMatrix, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorList {
    pub cluster: usize,
    pub terms: Vec<Descriptor>,
}

impl DescriptorList {
    /// Comma-separated terms; negative weights carry a trailing `(-)`.
    pub fn render(&self) -> String {
        self.terms
            .iter()
            .map(|d| {
                if d.weight < 0.0 {
                    format!("{}(-)", d.term)
                } else {
                    d.term.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Indices of the `top_k` largest entries, descending, ties by ascending
/// index.
pub fn top_terms(weights: &[f64], top_k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order.truncate(top_k);
    order
}

/// The `top_k` highest-weighted terms of every cluster centroid.
///
/// With `factors`, centroids live in LSA space and are mapped back to term
/// space first. Without, they must already be term-space vectors over
/// `vocab`.
pub fn cluster_descriptors(
    clustering: &Clustering,
    factors: Option<&SvdFactors>,
    vocab: &Vocabulary,
    top_k: usize,
) -> Result<Vec<DescriptorList>> {
    if top_k == 0 {
        return Err(Error::InvalidParameter("top_k must be positive".into()));
    }
    clustering
        .centroids
        .par_iter()
        .enumerate()
        .map(|(c, centroid)| {
            let weights = match factors {
                Some(f) => back_transform(centroid, f)?,
                None if centroid.len() == vocab.len() => centroid.clone(),
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "centroids have {} dimensions but the vocabulary has {} terms; \
                         LSA factors are required",
                        centroid.len(),
                        vocab.len()
                    )))
                }
            };
            if weights.len() != vocab.len() {
                return Err(Error::DimensionMismatch {
                    expected: vocab.len(),
                    got: weights.len(),
                });
            }
            let terms = top_terms(&weights, top_k)
                .into_iter()
                .map(|j| Descriptor {
                    term: vocab.term(j).to_string(),
                    weight: weights[j],
                })
                .collect();
            Ok(DescriptorList { cluster: c, terms })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<ProjectionPoint>,
}

/// Fresh 2-D LSA projection of `matrix`, one point per document. A matrix of
/// rank below 2 gets zero coordinates in the missing dimensions.
pub fn plot_projection<S: AsRef<str>>(
    matrix: &TermDocMatrix,
    clustering: &Clustering,
    truth: Option<&[S]>,
) -> Result<Projection> {
    let n = matrix.rows();
    if n < 2 {
        return Err(Error::InvalidParameter("projection needs at least 2 documents".into()));
    }
    if clustering.assignments.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: clustering.assignments.len(),
        });
    }
    if let Some(t) = truth {
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.len(),
            });
        }
    }
    let dims = 2.min(matrix.cols());
    let coords: Vec<[f64; 2]> = match truncated_svd(matrix, dims) {
        Ok(factors) => {
            let e = project_documents(&factors);
            (0..n)
                .map(|i| {
                    let r = e.row(i);
                    [r.first().copied().unwrap_or(0.0), r.get(1).copied().unwrap_or(0.0)]
                })
                .collect()
        }
        // rank 0: every document sits at the origin
        Err(_) => vec![[0.0, 0.0]; n],
    };
    let points = (0..n)
        .map(|i| ProjectionPoint {
            id: matrix.doc_ids()[i].clone(),
            x: coords[i][0],
            y: coords[i][1],
            cluster: clustering.assignments[i],
            class: truth.map(|t| t[i].as_ref().to_string()),
        })
        .collect();
    Ok(Projection { points })
}

const PALETTE: [&str; 16] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
];

const PANEL: f64 = 420.0;
const MARGIN: f64 = 30.0;
const LEGEND: f64 = 22.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Projection {
    /// Columns `id`,`x`,`y`,`cluster`,`class`; `class` is empty without
    /// truth.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "x", "y", "cluster", "class"])?;
        for p in &self.points {
            w.write_record([
                p.id.as_str(),
                &p.x.to_string(),
                &p.y.to_string(),
                &p.cluster.to_string(),
                p.class.as_deref().unwrap_or(""),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Self-contained SVG with a truth panel on the left (blank when no
    /// classes are known) and a predicted-cluster panel on the right.
    pub fn to_svg(&self) -> String {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        let span = |lo: f64, hi: f64| if hi - lo > 0.0 { hi - lo } else { 1.0 };
        let (sx, sy) = (span(x0, x1), span(y0, y1));
        let inner = PANEL - 2.0 * MARGIN;
        let place = |p: &ProjectionPoint, offset: f64| {
            (
                offset + MARGIN + (p.x - x0) / sx * inner,
                MARGIN + (1.0 - (p.y - y0) / sy) * inner,
            )
        };

        // colors follow first appearance, the legend is alphabetical
        let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &self.points {
            if let Some(c) = p.class.as_deref() {
                let next = classes.len();
                classes.entry(c).or_insert(next);
            }
        }
        let k = self.points.iter().map(|p| p.cluster + 1).max().unwrap_or(0);
        let legend_rows = classes.len().max(k);
        let height = PANEL + LEGEND * (legend_rows as f64 + 1.0);
        let width = 2.0 * PANEL;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        for (panel, title) in [(0.0, "Classes"), (PANEL, "Clusters")] {
            let _ = writeln!(
                svg,
                r##"<rect x="{}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="#cccccc"/>"##,
                panel + MARGIN
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" font-weight="bold">{title}</text>"#,
                panel + PANEL / 2.0,
                MARGIN - 10.0
            );
        }
        for p in &self.points {
            if let Some(c) = p.class.as_deref() {
                let (cx, cy) = place(p, 0.0);
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                    PALETTE[classes[c] % PALETTE.len()]
                );
            }
            let (cx, cy) = place(p, PANEL);
            let _ = writeln!(
                svg,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                PALETTE[p.cluster % PALETTE.len()]
            );
        }
        let legend_top = PANEL + LEGEND / 2.0;
        let mut legend = |offset: f64, row: usize, color: &str, label: &str| {
            let y = legend_top + row as f64 * LEGEND;
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
                offset + MARGIN,
                y,
                offset + MARGIN + 16.0,
                y + 9.0,
                escape(label)
            );
        };
        for (row, (label, &color)) in classes.iter().enumerate() {
            legend(0.0, row, PALETTE[color % PALETTE.len()], label);
        }
        for c in 0..k {
            legend(PANEL, c, PALETTE[c % PALETTE.len()], &format!("cluster {c}"));
        }
        svg.push_str("</svg>\n");
        svg
    }
}
