//! Session-oriented service layer: a registry of knowledge bases and dialog
//! sessions, append-only session journals, and the HTTP/WebSocket front end.

mod http;
mod session;

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{load_knowledge_base, validate_knowledge_base, KbError, KnowledgeBase, Violation};
use crate::sim::SimError;
use crate::situational::Explanation;

pub use http::{router, serve};
pub use session::{
    HistoryEntry, ResponseKind, Session, SessionConfig, StateSnapshot, TickEvent, TurnResponse,
    MAX_PLAN_HORIZON,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown knowledge base `{0}`")]
    UnknownKb(String),
    #[error("unknown decision `{0}`")]
    UnknownDecision(String),
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("session log: {0}")]
    Log(String),
}

/// One line of a session journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Session { id: String, kb: String, kb_version: String, config: SessionConfig },
    Turn { utterance: String, response: TurnResponse },
    Tick { tick: u64 },
}

struct Journal {
    path: PathBuf,
}

impl Journal {
    fn append(&self, record: &LogRecord) -> Result<(), ServiceError> {
        let line = serde_json::to_string(record).map_err(|e| ServiceError::Log(e.to_string()))?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| ServiceError::Log(format!("{}: {e}", self.path.display())))?;
        writeln!(file, "{line}").map_err(|e| ServiceError::Log(e.to_string()))
    }
}

struct Slot {
    session: Session,
    journal: Option<Journal>,
}

impl Slot {
    fn log(&self, record: LogRecord) {
        if let Some(journal) = &self.journal {
            // a failed journal write must not fail the turn itself
            if let Err(e) = journal.append(&record) {
                eprintln!("warning: {e}");
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KbSummary {
    pub id: String,
    pub version: String,
    pub revision: u64,
    pub variables: usize,
    pub rules: usize,
    pub acts: usize,
    pub languages: Vec<String>,
    pub warnings: Vec<Violation>,
}

struct KbEntry {
    kb: Arc<KnowledgeBase>,
    revision: u64,
    warnings: Vec<Violation>,
}

#[derive(Debug, Clone, Default)]
pub struct RegistryConfig {
    /// Knowledge bases are loaded from and uploads persisted to this directory.
    pub kb_dir: Option<PathBuf>,
    /// Session journals live here, one `<session>.jsonl` per session.
    pub log_dir: Option<PathBuf>,
}

/// Knowledge bases and sessions shared by all requests.
///
/// KBs are replaced copy-on-write: a session keeps the snapshot it was
/// created with. Turns on one session are serialized by its mutex.
pub struct Registry {
    config: RegistryConfig,
    kbs: RwLock<BTreeMap<String, KbEntry>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Slot>>>>,
    next_session: AtomicU64,
    next_kb: AtomicU64,
}

const KB_SUFFIX: &str = ".kb.json";

fn lock(slot: &Mutex<Slot>) -> MutexGuard<'_, Slot> {
    // a panic inside one turn leaves the session usable
    slot.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Registry {
    pub fn new(config: RegistryConfig) -> Self {
        Self {
            config,
            kbs: RwLock::default(),
            sessions: RwLock::default(),
            next_session: AtomicU64::new(1),
            next_kb: AtomicU64::new(1),
        }
    }

    /// Loads every `*.kb.json` in the KB directory, then restores the
    /// sessions found in the log directory. Returns the ids loaded.
    pub fn bootstrap(&self) -> Result<Vec<String>, ServiceError> {
        let mut loaded = Vec::new();
        if let Some(dir) = &self.config.kb_dir {
            for path in sorted_entries(dir)? {
                let Some(id) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(KB_SUFFIX))
                else {
                    continue;
                };
                let text = fs::read_to_string(&path).map_err(|e| ServiceError::Log(format!("{}: {e}", path.display())))?;
                self.insert_kb(id.to_string(), &text)?;
                loaded.push(id.to_string());
            }
        }
        self.restore_sessions()?;
        Ok(loaded)
    }

    fn insert_kb(&self, id: String, text: &str) -> Result<KbSummary, ServiceError> {
        let kb = load_knowledge_base(text)?;
        let warnings = validate_knowledge_base(&kb).warnings;
        let mut kbs = self.kbs.write().expect("kb registry lock");
        let revision = kbs.get(&id).map_or(1, |e| e.revision + 1);
        let summary = KbSummary {
            id: id.clone(),
            version: kb.version.clone(),
            revision,
            variables: kb.variables.len(),
            rules: kb.rules.len(),
            acts: kb.acts.len(),
            languages: kb.languages(),
            warnings: warnings.clone(),
        };
        kbs.insert(id, KbEntry { kb: Arc::new(kb), revision, warnings });
        Ok(summary)
    }

    /// Validates and registers a KB document under `id` (or a fresh id),
    /// replacing any previous revision.
    pub fn put_kb(&self, id: Option<&str>, text: &str) -> Result<KbSummary, ServiceError> {
        let id = match id {
            Some(id) if valid_id(id) => id.to_string(),
            Some(id) => return Err(ServiceError::InvalidOption(format!("invalid kb id `{id}`"))),
            None => format!("kb-{}", self.next_kb.fetch_add(1, Ordering::SeqCst)),
        };
        let summary = self.insert_kb(id.clone(), text)?;
        if let Some(dir) = &self.config.kb_dir {
            fs::create_dir_all(dir).map_err(|e| ServiceError::Log(format!("{}: {e}", dir.display())))?;
            let path = dir.join(format!("{id}{KB_SUFFIX}"));
            fs::write(&path, text).map_err(|e| ServiceError::Log(format!("{}: {e}", path.display())))?;
        }
        Ok(summary)
    }

    pub fn kb(&self, id: &str) -> Result<Arc<KnowledgeBase>, ServiceError> {
        self.kbs
            .read()
            .expect("kb registry lock")
            .get(id)
            .map(|e| e.kb.clone())
            .ok_or_else(|| ServiceError::UnknownKb(id.to_string()))
    }

    pub fn kb_summaries(&self) -> Vec<KbSummary> {
        self.kbs
            .read()
            .expect("kb registry lock")
            .iter()
            .map(|(id, e)| KbSummary {
                id: id.clone(),
                version: e.kb.version.clone(),
                revision: e.revision,
                variables: e.kb.variables.len(),
                rules: e.kb.rules.len(),
                acts: e.kb.acts.len(),
                languages: e.kb.languages(),
                warnings: e.warnings.clone(),
            })
            .collect()
    }

    fn journal_for(&self, session_id: &str) -> Option<Journal> {
        self.config.log_dir.as_ref().map(|dir| Journal { path: dir.join(format!("{session_id}.jsonl")) })
    }

    pub fn create_session(&self, kb_id: &str, config: SessionConfig) -> Result<String, ServiceError> {
        let kb = self.kb(kb_id)?;
        let id = format!("s-{}", self.next_session.fetch_add(1, Ordering::SeqCst));
        let session = Session::new(id.clone(), kb_id, kb.clone(), config.clone())?;
        let journal = self.journal_for(&id);
        if let Some(journal) = &journal {
            if let Some(dir) = &self.config.log_dir {
                fs::create_dir_all(dir).map_err(|e| ServiceError::Log(e.to_string()))?;
            }
            journal.append(&LogRecord::Session {
                id: id.clone(),
                kb: kb_id.to_string(),
                kb_version: kb.version.clone(),
                config,
            })?;
        }
        self.sessions.write().expect("session registry lock").insert(id.clone(), Arc::new(Mutex::new(Slot { session, journal })));
        Ok(id)
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ServiceError> {
        self.sessions
            .read()
            .expect("session registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().expect("session registry lock").keys().cloned().collect()
    }

    pub fn dialog_turn(&self, session_id: &str, utterance: &str) -> Result<TurnResponse, ServiceError> {
        let slot = self.slot(session_id)?;
        let mut slot = lock(&slot);
        let response = slot.session.dialog_turn(utterance);
        slot.log(LogRecord::Turn { utterance: utterance.to_string(), response: response.clone() });
        Ok(response)
    }

    pub fn state(&self, session_id: &str) -> Result<StateSnapshot, ServiceError> {
        let slot = self.slot(session_id)?;
        let slot = lock(&slot);
        slot.session.snapshot()
    }

    pub fn explanation(&self, session_id: &str, decision_id: &str) -> Result<Explanation, ServiceError> {
        let slot = self.slot(session_id)?;
        let slot = lock(&slot);
        slot.session.explanation(decision_id)
    }

    /// One control cycle; the session lock is held only for this tick.
    pub fn tick(&self, session_id: &str) -> Result<TickEvent, ServiceError> {
        let slot = self.slot(session_id)?;
        let mut slot = lock(&slot);
        let event = slot.session.tick()?;
        if let TickEvent::Tick { record, .. } = &event {
            slot.log(LogRecord::Tick { tick: record.tick });
        }
        Ok(event)
    }

    pub fn summary(&self, session_id: &str, ticks: usize) -> Result<TickEvent, ServiceError> {
        let slot = self.slot(session_id)?;
        let slot = lock(&slot);
        Ok(slot.session.summary(ticks))
    }

    pub fn stream_ticks(&self, session_id: &str, steps: usize) -> Result<Vec<TickEvent>, ServiceError> {
        let mut events = (0..steps).map(|_| self.tick(session_id)).collect::<Result<Vec<_>, _>>()?;
        events.push(self.summary(session_id, steps)?);
        Ok(events)
    }

    /// Rebuilds sessions from their journals by replaying the recorded
    /// turns and ticks. Journals whose KB is missing or has a different
    /// version are skipped with a warning.
    pub fn restore_sessions(&self) -> Result<Vec<String>, ServiceError> {
        let Some(dir) = self.config.log_dir.clone() else { return Ok(Vec::new()) };
        let mut restored = Vec::new();
        for path in sorted_entries(&dir)? {
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            match self.restore_one(&path) {
                Ok(id) => restored.push(id),
                Err(e) => eprintln!("warning: skipping {}: {e}", path.display()),
            }
        }
        Ok(restored)
    }

    fn restore_one(&self, path: &Path) -> Result<String, ServiceError> {
        let text = fs::read_to_string(path).map_err(|e| ServiceError::Log(e.to_string()))?;
        let records = read_journal(&text)?;
        let Some(LogRecord::Session { id, kb: kb_id, kb_version, config }) = records.first() else {
            return Err(ServiceError::Log("journal does not start with a session record".into()));
        };
        let kb = self.kb(kb_id)?;
        if &kb.version != kb_version {
            return Err(ServiceError::Log(format!("kb `{kb_id}` is at version {} not {kb_version}", kb.version)));
        }
        let mut session = Session::new(id.clone(), kb_id.clone(), kb, config.clone())?;
        for record in &records[1..] {
            match record {
                LogRecord::Turn { utterance, response } => {
                    if &session.dialog_turn(utterance) != response {
                        eprintln!("warning: {id}: replayed response differs for {utterance:?}");
                    }
                }
                LogRecord::Tick { .. } => {
                    session.tick()?;
                }
                LogRecord::Session { .. } => return Err(ServiceError::Log("duplicate session record".into())),
            }
        }
        if let Some(n) = id.strip_prefix("s-").and_then(|n| n.parse::<u64>().ok()) {
            self.next_session.fetch_max(n + 1, Ordering::SeqCst);
        }
        let journal = self.journal_for(id);
        self.sessions
            .write()
            .expect("session registry lock")
            .insert(id.clone(), Arc::new(Mutex::new(Slot { session, journal })));
        Ok(id.clone())
    }
}

/// Parses a journal, one JSON record per non-empty line.
pub fn read_journal(text: &str) -> Result<Vec<LogRecord>, ServiceError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, line)| serde_json::from_str(line).map_err(|e| ServiceError::Log(format!("line {}: {e}", n + 1))))
        .collect()
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ServiceError::Log(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    Ok(paths)
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}
