//! The shared session: one engine behind one lock, the content store that
//! backs media item references, and an event fan-out for UI clients.

use std::collections::BTreeMap;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use dawzy_core::beat::render_beat;
use dawzy_core::engine::{Engine, EngineError, ProjectStateDoc};
use dawzy_core::script::BeatAsset;
use dawzy_core::units::UnitRegistry;
use dawzy_core::wav::encode_pcm16;
use serde::Serialize;
use tokio::sync::broadcast;

/// Pushed to every event-stream subscriber. Delivery is best effort; a
/// client that lags resynchronizes from the state endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    StateChanged { revision: u64 },
    UiHint { action: String, track: usize },
    Chat { session_id: String, explanation: String },
}

/// Media referenced by items, keyed by content id.
#[derive(Debug, Default, Clone)]
pub struct ContentStore {
    blobs: BTreeMap<String, Vec<u8>>,
}

impl ContentStore {
    pub fn contains(&self, id: &str) -> bool {
        self.blobs.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[u8]> {
        self.blobs.get(id).map(Vec::as_slice)
    }

    /// Stores `bytes` under `prefix-<fnv64 hex>` and returns the id.
    pub fn put(&mut self, prefix: &str, bytes: Vec<u8>) -> String {
        let mut h = fnv::FnvHasher::default();
        h.write(&bytes);
        let id = format!("{prefix}-{:016x}", h.finish());
        self.blobs.insert(id.clone(), bytes);
        id
    }

    pub fn insert(&mut self, id: String, bytes: Vec<u8>) {
        self.blobs.insert(id, bytes);
    }

    /// Renders any beat the store does not hold yet.
    pub fn materialize(&mut self, beats: &[BeatAsset]) {
        for beat in beats {
            if !self.contains(&beat.content_id) {
                let wav = encode_pcm16(&render_beat(&beat.spec));
                self.insert(beat.content_id.clone(), wav);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }
}

pub struct Session {
    pub engine: Engine,
    pub store: ContentStore,
}

/// All writers take the same lock, so tool calls from any number of
/// connections apply one at a time.
pub struct Host {
    session: Mutex<Session>,
    events: broadcast::Sender<Event>,
    project_path: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum HostError {
    #[error("cannot read project file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write project file {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("invalid project file {path}: {source}")]
    Invalid { path: PathBuf, source: EngineError },
    #[error("invalid unit registry {path}: {message}")]
    Registry { path: PathBuf, message: String },
}

impl Host {
    pub fn new(engine: Engine) -> Arc<Self> {
        let (events, _) = broadcast::channel(256);
        Arc::new(Host {
            session: Mutex::new(Session { engine, store: ContentStore::default() }),
            events,
            project_path: None,
        })
    }

    /// Opens `path` if it exists (otherwise starts empty) and saves back to it
    /// after every change.
    pub fn with_project(path: &Path, registry: UnitRegistry) -> Result<Arc<Self>, HostError> {
        let engine = if path.exists() { load_project(path, registry)? } else { Engine::with_registry(registry) };
        let (events, _) = broadcast::channel(256);
        Ok(Arc::new(Host {
            session: Mutex::new(Session { engine, store: ContentStore::default() }),
            events,
            project_path: Some(path.to_path_buf()),
        }))
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        // a panic while holding the lock cannot leave a transaction open:
        // every write path commits or rolls back before returning
        self.session.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    pub fn publish(&self, event: Event) {
        let _ = self.events.send(event);
    }

    pub fn state(&self) -> ProjectStateDoc {
        self.lock().engine.state_summary()
    }

    pub fn revision(&self) -> u64 {
        self.lock().engine.revision()
    }

    /// Call after a change: saves the project file and announces the revision.
    pub fn changed(&self, session: &Session) {
        if let Some(path) = &self.project_path {
            if let Err(e) = save_project(path, &session.engine.state_summary()) {
                tracing::warn!("{e}");
            }
        }
        self.publish(Event::StateChanged { revision: session.engine.revision() });
    }

    pub fn undo(&self) -> Result<u64, EngineError> {
        let mut s = self.lock();
        let r = s.engine.undo()?;
        self.changed(&s);
        Ok(r)
    }

    pub fn redo(&self) -> Result<u64, EngineError> {
        let mut s = self.lock();
        let r = s.engine.redo()?;
        self.changed(&s);
        Ok(r)
    }
}

pub fn load_project(path: &Path, registry: UnitRegistry) -> Result<Engine, HostError> {
    let text = std::fs::read_to_string(path).map_err(|source| HostError::Read { path: path.into(), source })?;
    let doc = ProjectStateDoc::from_json(&text).map_err(|source| HostError::Invalid { path: path.into(), source })?;
    Engine::from_doc(&doc, registry).map_err(|source| HostError::Invalid { path: path.into(), source })
}

pub fn save_project(path: &Path, doc: &ProjectStateDoc) -> Result<(), HostError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, doc.to_json_pretty() + "\n")
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|source| HostError::Write { path: path.into(), source })
}

pub fn load_registry(path: Option<&Path>) -> Result<UnitRegistry, HostError> {
    let Some(path) = path else {
        return Ok(UnitRegistry::stock());
    };
    let text = std::fs::read_to_string(path).map_err(|source| HostError::Read { path: path.into(), source })?;
    UnitRegistry::from_json(&text).map_err(|e| HostError::Registry { path: path.into(), message: e.to_string() })
}
