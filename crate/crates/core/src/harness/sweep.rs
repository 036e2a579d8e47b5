use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_experiment, AlgorithmConfig, ExperimentResult, KmeansSpec, PipelineConfig, Selector, DEFAULT_SEED};
use crate::corpus::{FieldSubset, LabeledDataset};
use crate::error::{Error, Result};
use crate::featselect::{DfParams, VcgsParams};
use crate::metrics::MetricOptions;
use crate::vectorizer::WeightScheme;

pub const WORKERS_ENV: &str = "SCATTERMESH_WORKERS";

/// Per-parameter value lists. The sweep runs their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub subsets: Vec<FieldSubset>,
    pub schemes: Vec<WeightScheme>,
    pub vcgs_r: Vec<usize>,
    pub vcgs_p: Vec<f64>,
    pub tau_df: Vec<usize>,
    /// `null` entries mean "no LSA".
    pub lsa_n: Vec<Option<usize>>,
    pub kmeans_k: Vec<usize>,
    pub kmeans_restarts: Option<usize>,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub metrics: MetricOptions,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            subsets: vec![FieldSubset::TitleAbstract],
            schemes: vec![WeightScheme::default()],
            vcgs_r: Vec::new(),
            vcgs_p: Vec::new(),
            tau_df: Vec::new(),
            lsa_n: vec![None],
            kmeans_k: Vec::new(),
            kmeans_restarts: None,
            theta: Vec::new(),
            seed: DEFAULT_SEED,
            metrics: MetricOptions::default(),
        }
    }
}

impl GridSpec {
    /// The full published grid: R 5..=10, P 0.10..=0.95 in steps of 0.05,
    /// τ_df {10, 30, 50, 70, 100}, n {4, 8, 12, 16, 20, none}, k-means with
    /// k = 4 and maximin with θ {0.8, 0.9, 0.99}.
    pub fn full() -> Self {
        GridSpec {
            vcgs_r: (5..=10).collect(),
            vcgs_p: (2..=19).map(|i| i as f64 * 0.05).map(|p| (p * 100.0).round() / 100.0).collect(),
            tau_df: vec![10, 30, 50, 70, 100],
            lsa_n: vec![Some(4), Some(8), Some(12), Some(16), Some(20), None],
            kmeans_k: vec![4],
            theta: vec![0.8, 0.9, 0.99],
            ..GridSpec::default()
        }
    }

    fn selectors(&self) -> Result<Vec<Selector>> {
        let mut out = Vec::new();
        for &r in &self.vcgs_r {
            for &p in &self.vcgs_p {
                out.push(Selector::Vcgs(VcgsParams::new(r, p)?));
            }
        }
        for &t in &self.tau_df {
            out.push(Selector::Df(DfParams::new(t)?));
        }
        Ok(out)
    }

    fn algorithms(&self) -> Vec<AlgorithmConfig> {
        let mut out: Vec<AlgorithmConfig> = self
            .kmeans_k
            .iter()
            .map(|&k| {
                let mut spec = KmeansSpec::new(k);
                if let Some(r) = self.kmeans_restarts {
                    spec.restarts = r;
                }
                AlgorithmConfig::Kmeans(spec)
            })
            .collect();
        out.extend(self.theta.iter().map(|&theta| AlgorithmConfig::Maximin { theta }));
        out
    }

    /// Every configuration, each with its derived seed.
    pub fn configs(&self) -> Result<Vec<PipelineConfig>> {
        let selectors = self.selectors()?;
        let algorithms = self.algorithms();
        let mut out = Vec::new();
        for &subset in &self.subsets {
            for &scheme in &self.schemes {
                for selector in &selectors {
                    for &lsa_n in &self.lsa_n {
                        for algorithm in &algorithms {
                            let mut c = PipelineConfig {
                                subset,
                                scheme,
                                selector: *selector,
                                lsa_n,
                                algorithm: *algorithm,
                                seed: 0,
                                metrics: self.metrics,
                            };
                            c.seed = derive_seed(self.seed, &canonical_string(&c));
                            c.validate()?;
                            out.push(c);
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter(
                "grid is empty: it needs at least one selector value and one algorithm".into(),
            ));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        let selectors = self.vcgs_r.len() * self.vcgs_p.len() + self.tau_df.len();
        let algorithms = self.kmeans_k.len() + self.theta.len();
        self.subsets.len() * self.schemes.len() * selectors * self.lsa_n.len() * algorithms
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        other => out.push(format!("{prefix}={other}")),
    }
}

/// Sorted `key=value` pairs of the config with the seed left out, joined by
/// `;`. Nested keys are dotted.
pub fn canonical_string(config: &PipelineConfig) -> String {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("seed");
    }
    let mut pairs = Vec::new();
    flatten("", &v, &mut pairs);
    pairs.sort();
    pairs.join(";")
}

/// Mixes the base seed with a 64-bit FNV-1a hash of `canonical`.
pub fn derive_seed(base: u64, canonical: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer
    let mut z = base ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A configuration and either its result or the error it raised.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub config: PipelineConfig,
    pub result: Option<ExperimentResult>,
    pub error: Option<String>,
}

impl SweepOutcome {
    fn tier(&self) -> u8 {
        match &self.result {
            Some(r) if r.comparable => 0,
            Some(_) => 1,
            None => 2,
        }
    }
}

/// Comparable results by AMI descending, then non-comparable ones, then
/// failures; ties broken by canonical config string.
pub fn rank_outcomes(outcomes: &mut [SweepOutcome]) {
    let mut keyed: Vec<(String, SweepOutcome)> = outcomes
        .iter()
        .map(|o| (canonical_string(&o.config), o.clone()))
        .collect();
    keyed.sort_by(|(ka, a), (kb, b)| {
        a.tier()
            .cmp(&b.tier())
            .then_with(|| {
                let ami = |o: &SweepOutcome| o.result.as_ref().map_or(f64::NEG_INFINITY, |r| r.report.ami);
                ami(b).partial_cmp(&ami(a)).unwrap_or(Ordering::Equal)
            })
            .then_with(|| ka.cmp(kb))
    });
    for (slot, (_, o)) in outcomes.iter_mut().zip(keyed) {
        *slot = o;
    }
}

/// Worker count from `SCATTERMESH_WORKERS`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
}

/// Runs every grid configuration on `workers` threads and returns the ranked
/// outcomes. A failing configuration is recorded and does not stop the
/// sweep.
pub fn grid_sweep(dataset: &LabeledDataset, grid: &GridSpec, workers: usize) -> Result<Vec<SweepOutcome>> {
    let configs = grid.configs()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let mut outcomes: Vec<SweepOutcome> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| match run_experiment(dataset, c) {
                Ok(r) => SweepOutcome {
                    config: c.clone(),
                    result: Some(r),
                    error: None,
                },
                Err(e) => SweepOutcome {
                    config: c.clone(),
                    result: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    rank_outcomes(&mut outcomes);
    Ok(outcomes)
}

fn selector_params(s: &Selector) -> String {
    match s {
        Selector::Vcgs(p) => format!("R={} P={}", p.rank_threshold, p.percent),
        Selector::Df(p) => format!("tau_df={}", p.tau_df),
    }
}

fn algorithm_params(a: &AlgorithmConfig) -> String {
    match a {
        AlgorithmConfig::Kmeans(s) => format!("k={} restarts={}", s.k, s.restarts),
        AlgorithmConfig::Maximin { theta } => format!("theta={theta}"),
    }
}

/// One row per outcome in ranked order. Contains no timings, so identical
/// sweeps give identical bytes.
pub fn write_sweep_csv<W: Write>(out: W, outcomes: &[SweepOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "rank",
        "subset",
        "scheme",
        "clustering",
        "clustering_params",
        "selector",
        "selector_params",
        "lsa_n",
        "seed",
        "k_found",
        "comparable",
        "sc",
        "prt",
        "ami",
        "error",
    ])?;
    for (i, o) in outcomes.iter().enumerate() {
        let c = &o.config;
        let (k, comparable, sc, prt, ami) = match &o.result {
            Some(r) => (
                r.k_found.to_string(),
                r.comparable.to_string(),
                r.report.sc.map(|x| x.to_string()).unwrap_or_default(),
                r.report.prt.to_string(),
                r.report.ami.to_string(),
            ),
            None => Default::default(),
        };
        w.write_record([
            (i + 1).to_string(),
            c.subset.to_string(),
            c.scheme.to_string(),
            c.algorithm.label().to_string(),
            algorithm_params(&c.algorithm),
            c.selector.label().to_string(),
            selector_params(&c.selector),
            c.lsa_n.map(|n| n.to_string()).unwrap_or_default(),
            c.seed.to_string(),
            k,
            comparable,
            sc,
            prt,
            ami,
            o.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
