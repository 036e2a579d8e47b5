use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{canonical_string, AlgorithmConfig, ExperimentResult, KmeansSpec};
use crate::corpus::FieldSubset;
use crate::error::{Error, Result};
use crate::metrics::{homogeneity, ContingencyTable};

const DASH: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStyle {
    /// Best result per (clustering, selector, LSA) group.
    Summary,
    /// Matching matrix of the best result plus a homogeneity row.
    Table4,
    /// Best result per field subset.
    Table3,
}

impl FromStr for ReportStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "summary" => Ok(ReportStyle::Summary),
            "table4" => Ok(ReportStyle::Table4),
            "table3" => Ok(ReportStyle::Table3),
            other => Err(Error::InvalidParameter(format!(
                "unknown report style `{other}` (summary, table4, table3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidParameter(format!(
                "unknown report format `{other}` (csv, markdown)"
            ))),
        }
    }
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

fn render(header: &[String], rows: &[Vec<String>], format: ReportFormat, notes: &[String]) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let cell = |s: &str| s.replace('|', "\\|");
            let mut out = String::new();
            out.push_str(&format!("| {} |\n", header.iter().map(|h| cell(h)).collect::<Vec<_>>().join(" | ")));
            out.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
            for r in rows {
                out.push_str(&format!("| {} |\n", r.iter().map(|c| cell(c)).collect::<Vec<_>>().join(" | ")));
            }
            for n in notes {
                out.push('\n');
                out.push_str(n);
                out.push('\n');
            }
            Ok(out)
        }
    }
}

/// Highest AMI among comparable results, ties to the smaller canonical
/// string. Falls back to the first non-comparable result so the row still
/// shows up.
fn best<'a>(group: &[&'a ExperimentResult]) -> Option<&'a ExperimentResult> {
    let mut ranked: Vec<(&ExperimentResult, String)> =
        group.iter().map(|r| (*r, canonical_string(&r.config))).collect();
    ranked.sort_by(|(a, ka), (b, kb)| {
        b.comparable
            .cmp(&a.comparable)
            .then(b.report.ami.total_cmp(&a.report.ami))
            .then_with(|| ka.cmp(kb))
    });
    ranked.first().map(|(r, _)| *r)
}

fn score_cells(r: &ExperimentResult) -> [String; 3] {
    if r.comparable {
        [
            r.report.sc.map(fmt3).unwrap_or_else(|| DASH.into()),
            fmt3(r.report.prt),
            fmt3(r.report.ami),
        ]
    } else {
        [DASH.into(), DASH.into(), DASH.into()]
    }
}

fn lsa_cell(r: &ExperimentResult) -> String {
    if r.config.lsa_n.is_some() { "Yes" } else { "No" }.into()
}

fn restarts_note(results: &[ExperimentResult]) -> Vec<String> {
    let mut restarts: Vec<usize> = results
        .iter()
        .filter_map(|r| match r.config.algorithm {
            AlgorithmConfig::Kmeans(KmeansSpec { restarts, .. }) => Some(restarts),
            _ => None,
        })
        .collect();
    restarts.sort_unstable();
    restarts.dedup();
    if restarts.is_empty() {
        return Vec::new();
    }
    let list = restarts.iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
    vec![format!(
        "k-means++ restarts per configuration: {list} (lowest objective kept). \
         Maximin rows whose cluster count differs from the class count show {DASH}."
    )]
}

fn summary(results: &[ExperimentResult], format: ReportFormat) -> Result<String> {
    let header: Vec<String> = ["Clustering", "Feat. selection", "LSA", "SC", "PRT", "AMI"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for algo in ["k-means", "maximin"] {
        for selector in ["VCGS", "df"] {
            for lsa in [true, false] {
                let group: Vec<&ExperimentResult> = results
                    .iter()
                    .filter(|r| {
                        r.config.algorithm.label() == algo
                            && r.config.selector.label() == selector
                            && r.config.lsa_n.is_some() == lsa
                    })
                    .collect();
                if let Some(r) = best(&group) {
                    let mut row = vec![algo.to_string(), selector.to_string(), lsa_cell(r)];
                    row.extend(score_cells(r));
                    rows.push(row);
                }
            }
        }
    }
    render(&header, &rows, format, &restarts_note(results))
}

fn table3(results: &[ExperimentResult], format: ReportFormat) -> Result<String> {
    let header: Vec<String> = ["Data", "Clustering", "Feat. selection", "LSA", "SC", "PRT", "AMI"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for subset in FieldSubset::ALL {
        let group: Vec<&ExperimentResult> = results.iter().filter(|r| r.config.subset == subset).collect();
        if let Some(r) = best(&group) {
            let mut row = vec![
                subset.letter().to_string(),
                r.config.algorithm.label().to_string(),
                r.config.selector.label().to_string(),
                lsa_cell(r),
            ];
            row.extend(score_cells(r));
            rows.push(row);
        }
    }
    render(&header, &rows, format, &restarts_note(results))
}

/// Class-by-cluster counts with clusters named `C_1..C_k` and a final
/// homogeneity row.
pub fn table4_report(table: &ContingencyTable, format: ReportFormat) -> Result<String> {
    let mut header = vec!["Class".to_string()];
    header.extend((1..=table.n_clusters()).map(|j| format!("C_{j}")));
    let mut rows: Vec<Vec<String>> = table
        .class_labels()
        .iter()
        .zip(table.counts())
        .map(|(label, counts)| {
            let mut row = vec![label.clone()];
            row.extend(counts.iter().map(u64::to_string));
            row
        })
        .collect();
    let mut h = vec!["Homogeneity".to_string()];
    h.extend(homogeneity(table).into_iter().map(fmt3));
    rows.push(h);
    render(&header, &rows, format, &[])
}

/// Renders `results` in the requested layout.
pub fn emit_report(results: &[ExperimentResult], style: ReportStyle, format: ReportFormat) -> Result<String> {
    if results.is_empty() {
        return Err(Error::InvalidParameter("no results to report".into()));
    }
    match style {
        ReportStyle::Summary => summary(results, format),
        ReportStyle::Table3 => table3(results, format),
        ReportStyle::Table4 => {
            let refs: Vec<&ExperimentResult> = results.iter().collect();
            let r = best(&refs).expect("nonempty");
            table4_report(&r.contingency, format)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featselect::{DfParams, VcgsParams};
    use crate::harness::{PipelineConfig, Selector};
    use crate::metrics::MetricReport;

    fn result(algo: AlgorithmConfig, selector: Selector, lsa: Option<usize>, ami: f64, comparable: bool) -> ExperimentResult {
        ExperimentResult {
            config: PipelineConfig::new(selector, lsa, algo),
            report: MetricReport {
                sc: Some(0.25),
                prt: 0.75,
                ami,
                homogeneity: vec![1.0, 0.5],
                k: 2,
            },
            k_found: 2,
            wall_time: 0.0,
            comparable,
            contingency: ContingencyTable::from_labels(&["a", "a", "b", "b"], &[0, 0, 0, 1], 2).unwrap(),
            selected_terms: 10,
            zero_rows: 0,
        }
    }

    fn vcgs() -> Selector {
        Selector::Vcgs(VcgsParams::new(5, 0.5).unwrap())
    }

    #[test]
    fn one_result_one_row() {
        let r = result(AlgorithmConfig::Kmeans(KmeansSpec::new(4)), vcgs(), Some(4), 0.4, true);
        let csv = emit_report(&[r], ReportStyle::Summary, ReportFormat::Csv).unwrap();
        assert_eq!(csv, "Clustering,Feat. selection,LSA,SC,PRT,AMI\nk-means,VCGS,Yes,0.250,0.750,0.400\n");
    }

    #[test]
    fn best_per_group_and_dashes() {
        let results = vec![
            result(AlgorithmConfig::Kmeans(KmeansSpec::new(4)), vcgs(), Some(4), 0.3, true),
            result(AlgorithmConfig::Kmeans(KmeansSpec::new(4)), vcgs(), Some(8), 0.5, true),
            result(AlgorithmConfig::Maximin { theta: 0.9 }, vcgs(), None, 0.9, false),
            result(
                AlgorithmConfig::Maximin { theta: 0.9 },
                Selector::Df(DfParams::new(10).unwrap()),
                Some(4),
                0.2,
                true,
            ),
        ];
        let csv = emit_report(&results, ReportStyle::Summary, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "k-means,VCGS,Yes,0.250,0.750,0.500");
        assert_eq!(lines[2], "maximin,VCGS,No,-,-,-");
        assert_eq!(lines[3], "maximin,df,Yes,0.250,0.750,0.200");
        let md = emit_report(&results, ReportStyle::Summary, ReportFormat::Markdown).unwrap();
        assert!(md.starts_with("| Clustering | Feat. selection | LSA | SC | PRT | AMI |\n| --- |"));
        assert!(md.contains("restarts per configuration: 10"));
    }

    #[test]
    fn table4_shape() {
        let t = ContingencyTable::from_counts(
            vec![vec![1597, 0, 822, 12], vec![36, 17, 6242, 2220], vec![0, 3, 478, 843], vec![0, 878, 704, 44]],
            vec!["A".into(), "B, ductal".into(), "C".into(), "D".into()],
            (0..4).map(|j| j.to_string()).collect(),
        )
        .unwrap();
        let md = table4_report(&t, ReportFormat::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Class | C_1 | C_2 | C_3 | C_4 |");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[6], "| Homogeneity | 0.978 | 0.978 | 0.757 | 0.712 |");
        let csv = table4_report(&t, ReportFormat::Csv).unwrap();
        assert!(csv.contains("\"B, ductal\",36,17,6242,2220\n"));
        assert!(csv.ends_with("Homogeneity,0.978,0.978,0.757,0.712\n"));
    }

    #[test]
    fn table3_rows_per_subset() {
        let mut a = result(AlgorithmConfig::Kmeans(KmeansSpec::new(4)), vcgs(), Some(4), 0.3, true);
        a.config.subset = FieldSubset::TitleOnly;
        let mut c = result(AlgorithmConfig::Kmeans(KmeansSpec::new(4)), vcgs(), None, 0.6, true);
        c.config.subset = FieldSubset::TitleAbstractBody;
        let csv = emit_report(&[c, a], ReportStyle::Table3, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "Data,Clustering,Feat. selection,LSA,SC,PRT,AMI");
        assert!(lines[1].starts_with("(a),"));
        assert!(lines[2].starts_with("(c),"));
    }

    #[test]
    fn empty_results_rejected() {
        assert!(emit_report(&[], ReportStyle::Summary, ReportFormat::Csv).is_err());
    }
}
