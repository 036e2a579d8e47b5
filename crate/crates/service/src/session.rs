//! Scatter/gather session state and its transitions. Everything here is
//! synchronous and side-effect free; the HTTP layer owns locking and
//! persistence.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use scattermesh_core::corpus::{compose_text, Corpus, DocumentRecord};
use scattermesh_core::descriptors::{plot_projection, Descriptor, ProjectionPoint};
use scattermesh_core::harness::{run_pipeline, AlgorithmConfig, KmeansSpec, PipelineConfig, Selector};
use scattermesh_core::featselect::VcgsParams;
use scattermesh_core::metrics::{evaluate, MetricReport};
use scattermesh_core::vectorizer::{tokenize, Stopwords};

use crate::error::{ApiError, ApiResult};

pub const DESCRIPTOR_COUNT: usize = 10;
pub const SAMPLE_COUNT: usize = 5;
/// Upper bound on the re-scatter k when a gather does not name one.
pub const DEFAULT_GATHER_K: usize = 4;

/// An ingested corpus and its optional ground truth.
#[derive(Debug)]
pub struct CorpusEntry {
    pub id: String,
    pub path: PathBuf,
    pub truth_path: Option<PathBuf>,
    pub corpus: Corpus,
    pub truth: Option<HashMap<String, String>>,
    index: HashMap<String, usize>,
}

impl CorpusEntry {
    pub fn new(
        id: String,
        path: PathBuf,
        truth_path: Option<PathBuf>,
        corpus: Corpus,
        truth: Option<HashMap<String, String>>,
    ) -> Self {
        let index = corpus.ids().enumerate().map(|(i, id)| (id.to_string(), i)).collect();
        CorpusEntry {
            id,
            path,
            truth_path,
            corpus,
            truth,
            index,
        }
    }

    pub fn record(&self, id: &str) -> Option<&DocumentRecord> {
        self.index.get(id).map(|&i| &self.corpus.records()[i])
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// The session config used when a create request omits one.
pub fn default_config() -> PipelineConfig {
    PipelineConfig::new(
        Selector::Vcgs(VcgsParams::new(10, 1.0).expect("valid defaults")),
        Some(4),
        AlgorithmConfig::Kmeans(KmeansSpec::new(4)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCard {
    pub id: usize,
    pub size: usize,
    pub descriptors: Vec<Descriptor>,
    pub samples: Vec<Sample>,
}

/// One clustering of an active document set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    pub generation: u64,
    pub seed: u64,
    /// Active documents in corpus order.
    pub active: Vec<String>,
    /// Cluster per active document.
    pub assignments: Vec<usize>,
    pub clusters: Vec<ClusterCard>,
    pub metrics: Option<MetricReport>,
    pub projection: Vec<ProjectionPoint>,
}

impl Scatter {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &String> {
        self.active
            .iter()
            .zip(&self.assignments)
            .filter(move |(_, &a)| a == cluster)
            .map(|(id, _)| id)
    }

    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.active.iter().position(|a| a == id).map(|i| self.assignments[i])
    }
}

/// Term counts of one document, highest first, ties by first appearance.
fn single_document_descriptors(record: &DocumentRecord, config: &PipelineConfig) -> Vec<Descriptor> {
    let tokens = tokenize(&compose_text(record, config.subset), &Stopwords::english());
    let mut counts: Vec<(String, usize)> = Vec::new();
    for t in tokens {
        match counts.iter_mut().find(|(w, _)| *w == t) {
            Some((_, c)) => *c += 1,
            None => counts.push((t, 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1));
    counts
        .into_iter()
        .take(DESCRIPTOR_COUNT)
        .map(|(term, c)| Descriptor {
            term,
            weight: c as f64,
        })
        .collect()
}

/// Clusters `active` (corpus order) with `config`; `k` overrides the k-means
/// cluster count.
pub fn scatter(
    entry: &CorpusEntry,
    active: Vec<String>,
    config: &PipelineConfig,
    k: Option<usize>,
    seed: u64,
    generation: u64,
) -> ApiResult<Scatter> {
    let records: Vec<DocumentRecord> = active
        .iter()
        .map(|id| entry.record(id).cloned().expect("active ids come from the corpus"))
        .collect();
    let sample = |ids: &mut dyn Iterator<Item = &String>| -> Vec<Sample> {
        ids.take(SAMPLE_COUNT)
            .map(|id| Sample {
                id: id.clone(),
                title: entry.record(id).map(|r| r.title.clone()).unwrap_or_default(),
            })
            .collect()
    };

    if records.len() == 1 {
        let card = ClusterCard {
            id: 0,
            size: 1,
            descriptors: single_document_descriptors(&records[0], config),
            samples: sample(&mut active.iter()),
        };
        return Ok(Scatter {
            generation,
            seed,
            projection: vec![ProjectionPoint {
                id: active[0].clone(),
                x: 0.0,
                y: 0.0,
                cluster: 0,
                class: entry.truth.as_ref().and_then(|t| t.get(&active[0]).cloned()),
            }],
            assignments: vec![0],
            active,
            clusters: vec![card],
            metrics: None,
        });
    }

    let mut config = config.clone();
    config.seed = seed;
    if let (Some(k), AlgorithmConfig::Kmeans(spec)) = (k, &mut config.algorithm) {
        spec.k = k;
    }
    let run = run_pipeline(&records, &config)?;
    let descriptors = run.descriptors(DESCRIPTOR_COUNT)?;
    let labels: Option<Vec<String>> = entry
        .truth
        .as_ref()
        .and_then(|t| active.iter().map(|id| t.get(id).cloned()).collect());
    let metrics = match &labels {
        Some(l) => Some(evaluate(run.space(), &run.clustering, l, &config.metrics)?.0),
        None => None,
    };
    let projection = plot_projection(&run.matrix, &run.clustering, labels.as_deref())?.points;

    let mut out = Scatter {
        generation,
        seed,
        assignments: run.clustering.assignments.clone(),
        active,
        clusters: Vec::new(),
        metrics,
        projection,
    };
    out.clusters = descriptors
        .into_iter()
        .map(|d| ClusterCard {
            id: d.cluster,
            size: out.assignments.iter().filter(|&&a| a == d.cluster).count(),
            samples: sample(&mut out.members(d.cluster)),
            descriptors: d.terms,
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub corpus_id: String,
    pub config: PipelineConfig,
    pub current: Scatter,
    pub history: Vec<Scatter>,
    /// Highest generation ever issued; never rolled back.
    pub last_generation: u64,
}

/// Body of a gather request.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct GatherRequest {
    pub clusters: Vec<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    /// Generation the selection was made against; checked when present.
    #[serde(default)]
    pub generation: Option<u64>,
}

/// The client-facing view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub generation: u64,
    pub clusters: Vec<ClusterCard>,
    pub metrics: Option<MetricReport>,
    pub history_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<String>,
    pub body: Option<String>,
    pub class: Option<String>,
    pub cluster: Option<usize>,
}

impl Session {
    /// Scatters the whole corpus.
    pub fn create(entry: &CorpusEntry, config: PipelineConfig, session_id: String) -> ApiResult<Session> {
        config.validate()?;
        let active: Vec<String> = entry.corpus.ids().map(String::from).collect();
        if active.is_empty() {
            return Err(ApiError::Unprocessable("corpus is empty".into()));
        }
        let current = scatter(entry, active, &config, None, config.seed, 1)?;
        Ok(Session {
            session_id,
            corpus_id: entry.id.clone(),
            config,
            current,
            history: Vec::new(),
            last_generation: 1,
        })
    }

    /// Re-scatters the union of the selected clusters. Returns the next
    /// state; `self` is left untouched.
    pub fn gather(&self, entry: &CorpusEntry, req: &GatherRequest) -> ApiResult<Session> {
        let current = &self.current;
        if let Some(g) = req.generation {
            if g != current.generation {
                return Err(ApiError::Conflict(format!(
                    "selection was made in generation {g} but the session is at generation {}",
                    current.generation
                )));
            }
        }
        if req.clusters.is_empty() {
            return Err(ApiError::BadRequest("select at least one cluster".into()));
        }
        let known: BTreeSet<usize> = current.clusters.iter().map(|c| c.id).collect();
        if let Some(bad) = req.clusters.iter().find(|c| !known.contains(c)) {
            return Err(ApiError::Conflict(format!(
                "cluster {bad} does not exist in generation {} (clusters: {})",
                current.generation,
                known.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
            )));
        }
        if req.k == Some(0) {
            return Err(ApiError::BadRequest("k must be positive".into()));
        }
        let selected: BTreeSet<usize> = req.clusters.iter().copied().collect();
        let mut active: Vec<String> = current
            .active
            .iter()
            .zip(&current.assignments)
            .filter(|(_, a)| selected.contains(a))
            .map(|(id, _)| id.clone())
            .collect();
        active.sort_by_key(|id| entry.position(id));
        if active.is_empty() {
            return Err(ApiError::BadRequest("the selected clusters are empty".into()));
        }
        let k = req.k.unwrap_or(DEFAULT_GATHER_K.min(active.len()));
        let generation = self.last_generation + 1;
        let next = scatter(entry, active, &self.config, Some(k), current.seed + 1, generation)?;
        let mut history = self.history.clone();
        history.push(current.clone());
        Ok(Session {
            session_id: self.session_id.clone(),
            corpus_id: self.corpus_id.clone(),
            config: self.config.clone(),
            current: next,
            history,
            last_generation: generation,
        })
    }

    /// Restores the state before the last gather.
    pub fn back(&self) -> ApiResult<Session> {
        let mut history = self.history.clone();
        let previous = history
            .pop()
            .ok_or_else(|| ApiError::Conflict("nothing to go back to: the session has no history".into()))?;
        Ok(Session {
            current: previous,
            history,
            ..self.clone()
        })
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            generation: self.current.generation,
            clusters: self.current.clusters.clone(),
            metrics: self.current.metrics.clone(),
            history_depth: self.history.len(),
        }
    }

    pub fn document(&self, entry: &CorpusEntry, doc_id: &str) -> ApiResult<DocumentView> {
        let r = entry
            .record(doc_id)
            .ok_or_else(|| ApiError::NotFound(format!("document `{doc_id}` is not in corpus `{}`", entry.id)))?;
        Ok(DocumentView {
            id: r.id.clone(),
            title: r.title.clone(),
            abstract_text: r.abstract_text.clone(),
            body: r.body.clone(),
            class: entry.truth.as_ref().and_then(|t| t.get(doc_id).cloned()),
            cluster: self.current.cluster_of(doc_id),
        })
    }
}
