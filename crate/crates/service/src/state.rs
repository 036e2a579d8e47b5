//! Shared service state: ingested corpora, live sessions and their JSON
//! snapshots.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use scattermesh_core::corpus::{load_corpus, read_truth, CorpusFormat};

use crate::error::{ApiError, ApiResult};
use crate::session::{CorpusEntry, Session};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Base for relative corpus paths; when set, corpora must live under it.
    pub corpus_dir: Option<PathBuf>,
    /// Where session snapshots are written and restored from.
    pub state_dir: Option<PathBuf>,
    /// Static client assets served under `/ui`.
    pub ui_dir: Option<PathBuf>,
}

/// Writers take `writer` for the whole transition; readers clone the `Arc`
/// in `current` and so always see a complete state.
pub(crate) struct SessionSlot {
    pub writer: Mutex<()>,
    pub current: RwLock<Arc<Session>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    path: PathBuf,
    truth: Option<PathBuf>,
}

pub(crate) struct Inner {
    pub config: ServiceConfig,
    pub corpora: RwLock<HashMap<String, Arc<CorpusEntry>>>,
    pub sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl AppState {
    /// Starts empty, then restores any corpora and sessions recorded in the
    /// state directory. Entries that no longer load are skipped with a
    /// warning on stderr.
    pub fn open(config: ServiceConfig) -> ApiResult<AppState> {
        let state = AppState(Arc::new(Inner {
            config,
            corpora: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        }));
        let Some(dir) = state.0.config.state_dir.clone() else {
            return Ok(state);
        };
        for file in json_files(&dir.join("corpora")) {
            let restored = fs::read(&file)
                .map_err(|e| e.to_string())
                .and_then(|b| serde_json::from_slice::<CorpusRecord>(&b).map_err(|e| e.to_string()))
                .and_then(|r| load_entry(r.id, r.path, r.truth).map_err(|e| e.to_string()));
            match restored {
                Ok(entry) => {
                    state.corpora_mut().insert(entry.id.clone(), Arc::new(entry));
                }
                Err(e) => eprintln!("skipping corpus snapshot {}: {e}", file.display()),
            }
        }
        for file in json_files(&dir.join("sessions")) {
            let restored = fs::read(&file)
                .map_err(|e| e.to_string())
                .and_then(|b| serde_json::from_slice::<Session>(&b).map_err(|e| e.to_string()));
            match restored {
                Ok(s) if state.corpus(&s.corpus_id).is_ok() => state.insert_session(s),
                Ok(s) => eprintln!("skipping session {}: corpus {} is gone", s.session_id, s.corpus_id),
                Err(e) => eprintln!("skipping session snapshot {}: {e}", file.display()),
            }
        }
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    fn corpora_mut(&self) -> std::sync::RwLockWriteGuard<'_, HashMap<String, Arc<CorpusEntry>>> {
        self.0.corpora.write().expect("corpus map lock")
    }

    pub fn corpus(&self, id: &str) -> ApiResult<Arc<CorpusEntry>> {
        self.0
            .corpora
            .read()
            .expect("corpus map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown corpus `{id}`")))
    }

    pub(crate) fn slot(&self, id: &str) -> ApiResult<Arc<SessionSlot>> {
        self.0
            .sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session `{id}`")))
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        Ok(self.slot(id)?.current.read().expect("session lock").clone())
    }

    pub(crate) fn insert_session(&self, s: Session) {
        let slot = Arc::new(SessionSlot {
            writer: Mutex::new(()),
            current: RwLock::new(Arc::new(s.clone())),
        });
        self.0
            .sessions
            .write()
            .expect("session map lock")
            .insert(s.session_id.clone(), slot);
    }

    /// Resolves a client-supplied path against the corpus directory.
    pub fn resolve(&self, path: &str) -> ApiResult<PathBuf> {
        let raw = PathBuf::from(path);
        let Some(base) = &self.0.config.corpus_dir else {
            return Ok(raw);
        };
        let joined = if raw.is_absolute() { raw } else { base.join(raw) };
        let canonical = joined
            .canonicalize()
            .map_err(|e| ApiError::NotFound(format!("cannot open `{path}`: {e}")))?;
        let base = base
            .canonicalize()
            .map_err(|e| ApiError::Internal(format!("corpus directory: {e}")))?;
        if !canonical.starts_with(&base) {
            return Err(ApiError::BadRequest(format!("`{path}` is outside the corpus directory")));
        }
        Ok(canonical)
    }

    /// Loads and registers a corpus file.
    pub fn ingest(&self, path: PathBuf, truth: Option<PathBuf>) -> ApiResult<Arc<CorpusEntry>> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let entry = Arc::new(load_entry(id.clone(), path, truth)?);
        self.persist_corpus(&entry)?;
        self.corpora_mut().insert(id, entry.clone());
        Ok(entry)
    }

    fn persist_corpus(&self, entry: &CorpusEntry) -> ApiResult<()> {
        let Some(dir) = &self.0.config.state_dir else {
            return Ok(());
        };
        let record = CorpusRecord {
            id: entry.id.clone(),
            path: entry.path.clone(),
            truth: entry.truth_path.clone(),
        };
        let bytes = serde_json::to_vec_pretty(&record).map_err(|e| ApiError::Internal(e.to_string()))?;
        write_atomic(&dir.join("corpora").join(format!("{}.json", entry.id)), &bytes)
            .map_err(|e| ApiError::Internal(format!("cannot write corpus snapshot: {e}")))
    }

    pub(crate) fn persist_session(&self, s: &Session) -> ApiResult<()> {
        let Some(dir) = &self.0.config.state_dir else {
            return Ok(());
        };
        let bytes = serde_json::to_vec(s).map_err(|e| ApiError::Internal(e.to_string()))?;
        write_atomic(&dir.join("sessions").join(format!("{}.json", s.session_id)), &bytes)
            .map_err(|e| ApiError::Internal(format!("cannot write session snapshot: {e}")))
    }
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
}

/// The truth sidecar looked for when none is given: `<stem>.truth.csv` next
/// to the corpus file.
pub fn sidecar_path(corpus: &Path) -> PathBuf {
    let stem = corpus.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    corpus.with_file_name(format!("{stem}.truth.csv"))
}

fn load_entry(id: String, path: PathBuf, truth: Option<PathBuf>) -> ApiResult<CorpusEntry> {
    let format = CorpusFormat::from_path(&path)
        .ok_or_else(|| ApiError::BadRequest(format!("`{}` is neither .jsonl nor .csv", path.display())))?;
    let loaded = load_corpus(&path, format)?;
    let truth_path = truth.or_else(|| Some(sidecar_path(&path)).filter(|p| p.is_file()));
    let truth = match &truth_path {
        Some(p) => Some(read_truth(p)?.0),
        None => None,
    };
    Ok(CorpusEntry::new(id, path, truth_path, loaded.corpus, truth))
}
