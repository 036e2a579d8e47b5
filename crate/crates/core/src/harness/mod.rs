//! Experiment orchestration: pipeline configs, single runs, grid sweeps and
//! tabular reports.

mod report;
mod sweep;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{emit_report, table4_report, ReportFormat, ReportStyle};
pub use sweep::{
    canonical_string, derive_seed, grid_sweep, rank_outcomes, workers_from_env, write_sweep_csv, GridSpec,
    SweepOutcome, WORKERS_ENV,
};

use crate::cluster::{kmeans_pp, maximin, Clustering, KmeansParams, MaximinParams, VectorSet};
use crate::corpus::{compose_text, DocumentRecord, FieldSubset, LabeledDataset};
use crate::descriptors::{cluster_descriptors, DescriptorList};
use crate::error::{Error, Result};
use crate::featselect::{df_select, restrict, vcgs_select, DfParams, VcgsParams};
use crate::lsa::{project_documents, truncated_svd, EmbeddingMatrix, SvdFactors};
use crate::metrics::{evaluate, ContingencyTable, MetricOptions, MetricReport};
use crate::vectorizer::{build_vocabulary, tokenize, weight_matrix, Stopwords, TermDocMatrix, WeightScheme};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Vcgs(VcgsParams),
    Df(DfParams),
}

impl Selector {
    pub fn label(&self) -> &'static str {
        match self {
            Selector::Vcgs(_) => "VCGS",
            Selector::Df(_) => "df",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansSpec {
    pub k: usize,
    #[serde(default = "KmeansSpec::default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "KmeansSpec::default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "KmeansSpec::default_restarts")]
    pub restarts: usize,
}

impl KmeansSpec {
    pub fn new(k: usize) -> Self {
        KmeansSpec {
            k,
            max_iterations: Self::default_max_iterations(),
            tolerance: Self::default_tolerance(),
            restarts: Self::default_restarts(),
        }
    }

    fn default_max_iterations() -> usize {
        KmeansParams::new(1, 0).max_iterations
    }

    fn default_tolerance() -> f64 {
        KmeansParams::new(1, 0).tolerance
    }

    fn default_restarts() -> usize {
        KmeansParams::new(1, 0).restarts
    }

    fn params(&self, seed: u64) -> KmeansParams {
        KmeansParams {
            k: self.k,
            seed,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmConfig {
    Kmeans(KmeansSpec),
    Maximin { theta: f64 },
}

impl AlgorithmConfig {
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmConfig::Kmeans(_) => "k-means",
            AlgorithmConfig::Maximin { .. } => "maximin",
        }
    }
}

fn default_subset() -> FieldSubset {
    FieldSubset::TitleAbstract
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// One point of the experiment space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_subset")]
    pub subset: FieldSubset,
    #[serde(default)]
    pub scheme: WeightScheme,
    pub selector: Selector,
    /// LSA dimensionality; `None` clusters the tf-idf vectors directly.
    #[serde(default)]
    pub lsa_n: Option<usize>,
    pub algorithm: AlgorithmConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub metrics: MetricOptions,
}

impl PipelineConfig {
    pub fn new(selector: Selector, lsa_n: Option<usize>, algorithm: AlgorithmConfig) -> Self {
        PipelineConfig {
            subset: default_subset(),
            scheme: WeightScheme::default(),
            selector,
            lsa_n,
            algorithm,
            seed: DEFAULT_SEED,
            metrics: MetricOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.selector {
            Selector::Vcgs(p) => p.validate()?,
            Selector::Df(p) => p.validate()?,
        }
        if self.lsa_n == Some(0) {
            return Err(Error::InvalidParameter("lsa_n must be positive".into()));
        }
        match &self.algorithm {
            AlgorithmConfig::Kmeans(spec) => spec.params(self.seed).validate()?,
            AlgorithmConfig::Maximin { theta } => {
                MaximinParams::new(*theta, self.seed)?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}

/// Intermediate products of one pipeline execution.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// Vocabulary before feature selection.
    pub full_vocabulary_size: usize,
    /// Weighted matrix restricted to the selected terms.
    pub matrix: TermDocMatrix,
    /// Documents left without any selected term.
    pub zero_rows: usize,
    pub factors: Option<SvdFactors>,
    pub embedding: Option<EmbeddingMatrix>,
    pub clustering: Clustering,
}

impl PipelineRun {
    /// The vectors that were clustered.
    pub fn space(&self) -> &dyn VectorSet {
        match &self.embedding {
            Some(e) => e,
            None => &self.matrix,
        }
    }

    pub fn descriptors(&self, top_k: usize) -> Result<Vec<DescriptorList>> {
        cluster_descriptors(&self.clustering, self.factors.as_ref(), self.matrix.vocab(), top_k)
    }
}

/// compose → tokenize → vocabulary → weight → select → LSA → cluster.
/// Errors carry the name of the failing stage.
pub fn run_pipeline(records: &[DocumentRecord], config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate().map_err(|e| e.at_stage("config"))?;
    let stopwords = Stopwords::english();
    let texts: Vec<String> = records
        .par_iter()
        .map(|r| compose_text(r, config.subset))
        .collect();
    let tokens: Vec<Vec<String>> = texts.par_iter().map(|t| tokenize(t, &stopwords)).collect();
    let vocab = build_vocabulary(&tokens).map_err(|e| e.at_stage("vocabulary"))?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let weighted = weight_matrix(&tokens, ids, &vocab, config.scheme).map_err(|e| e.at_stage("weight"))?;

    let kept = match &config.selector {
        Selector::Vcgs(p) => vcgs_select(&weighted, p).map(|s| s.kept),
        Selector::Df(p) => df_select(&vocab, p),
    }
    .map_err(|e| e.at_stage("select"))?;
    let restricted = restrict(&weighted, &kept).map_err(|e| e.at_stage("select"))?;

    let (factors, embedding) = match config.lsa_n {
        Some(n) => {
            let f = truncated_svd(&restricted.matrix, n).map_err(|e| e.at_stage("lsa"))?;
            let e = project_documents(&f);
            (Some(f), Some(e))
        }
        None => (None, None),
    };

    let space: &dyn VectorSet = match &embedding {
        Some(e) => e,
        None => &restricted.matrix,
    };
    let clustering = match &config.algorithm {
        AlgorithmConfig::Kmeans(spec) => kmeans_pp(space, &spec.params(config.seed)),
        AlgorithmConfig::Maximin { theta } => maximin(space, &MaximinParams::new(*theta, config.seed)?),
    }
    .map_err(|e| e.at_stage("cluster"))?;

    Ok(PipelineRun {
        full_vocabulary_size: vocab.len(),
        matrix: restricted.matrix,
        zero_rows: restricted.zero_rows,
        factors,
        embedding,
        clustering,
    })
}

/// Outcome of one configuration on a labeled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: PipelineConfig,
    pub report: MetricReport,
    pub k_found: usize,
    /// Seconds; excluded from canonical output.
    #[serde(default)]
    pub wall_time: f64,
    /// False when maximin found a cluster count other than the class count.
    pub comparable: bool,
    pub contingency: ContingencyTable,
    pub selected_terms: usize,
    pub zero_rows: usize,
}

impl ExperimentResult {
    /// JSON without the wall time, stable across runs.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("result serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time");
        }
        serde_json::to_string(&v).expect("value serializes")
    }
}

pub fn run_experiment(dataset: &LabeledDataset, config: &PipelineConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let run = run_pipeline(dataset.corpus().records(), config)?;
    let labels = dataset.labels();
    let (report, contingency) =
        evaluate(run.space(), &run.clustering, &labels, &config.metrics).map_err(|e| e.at_stage("metrics"))?;
    let k_found = run.clustering.k();
    let comparable = match config.algorithm {
        AlgorithmConfig::Kmeans(_) => true,
        AlgorithmConfig::Maximin { .. } => k_found == dataset.classes().len(),
    };
    Ok(ExperimentResult {
        config: config.clone(),
        report,
        k_found,
        wall_time: start.elapsed().as_secs_f64(),
        comparable,
        contingency,
        selected_terms: run.matrix.cols(),
        zero_rows: run.zero_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{planted_dataset, SynthParams};

    fn small() -> LabeledDataset {
        planted_dataset(&SynthParams {
            docs_per_topic: 25,
            ..SynthParams::default()
        })
        .unwrap()
    }

    fn vcgs_lsa_kmeans() -> PipelineConfig {
        PipelineConfig::new(
            Selector::Vcgs(VcgsParams::new(10, 5.0).unwrap()),
            Some(4),
            AlgorithmConfig::Kmeans(KmeansSpec::new(4)),
        )
    }

    #[test]
    fn config_json_keys_and_defaults() {
        let c = PipelineConfig::from_json(
            r#"{"selector":{"vcgs":{"r":8,"p":0.5}},"algorithm":{"kmeans":{"k":4}},"lsa_n":4}"#,
        )
        .unwrap();
        assert_eq!(c.subset, FieldSubset::TitleAbstract);
        assert_eq!(c.scheme, WeightScheme::LogTf);
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.algorithm, AlgorithmConfig::Kmeans(KmeansSpec::new(4)));
        let v = serde_json::to_value(&c).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["algorithm", "lsa_n", "metrics", "scheme", "seed", "selector", "subset"]);

        let m = PipelineConfig::from_json(r#"{"selector":{"df":{"tau_df":10}},"algorithm":{"maximin":{"theta":0.9}}}"#)
            .unwrap();
        assert_eq!(m.lsa_n, None);
        assert!(PipelineConfig::from_json(r#"{"selector":{"df":{"tau_df":1}},"algorithm":{"maximin":{"theta":0.9}}}"#)
            .is_err());
    }

    #[test]
    fn planted_run_recovers_topics() {
        let r = run_experiment(&small(), &vcgs_lsa_kmeans()).unwrap();
        assert_eq!(r.k_found, 4);
        assert!(r.comparable);
        assert!(r.report.ami > 0.9, "ami {}", r.report.ami);
    }

    #[test]
    fn deterministic_serialization() {
        let ds = small();
        let a = run_experiment(&ds, &vcgs_lsa_kmeans()).unwrap();
        let b = run_experiment(&ds, &vcgs_lsa_kmeans()).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
        assert!(!a.canonical_json().contains("wall_time"));
    }

    #[test]
    fn errors_name_the_stage() {
        let mut c = vcgs_lsa_kmeans();
        c.selector = Selector::Df(DfParams::new(100_000).unwrap());
        match run_experiment(&small(), &c) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "select"),
            other => panic!("expected a stage error, got {other:?}"),
        }
        let mut c = vcgs_lsa_kmeans();
        c.lsa_n = Some(100_000);
        match run_experiment(&small(), &c) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "lsa"),
            other => panic!("expected a stage error, got {other:?}"),
        }
    }

    #[test]
    fn descriptors_follow_the_space() {
        let ds = small();
        let run = run_pipeline(ds.corpus().records(), &vcgs_lsa_kmeans()).unwrap();
        let d = run.descriptors(5).unwrap();
        assert_eq!(d.len(), 4);
        let raw = PipelineConfig {
            lsa_n: None,
            ..vcgs_lsa_kmeans()
        };
        let run = run_pipeline(ds.corpus().records(), &raw).unwrap();
        assert_eq!(run.descriptors(5).unwrap().len(), 4);
    }
}
