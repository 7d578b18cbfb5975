//! Virtual DAW session with revisioned state, transactions and undo.
//!
//! All content mutations happen inside a transaction. Committing pushes the
//! pre-transaction snapshot onto the undo stack and bumps the revision by
//! exactly one, no matter how many operations ran. Transport changes are not
//! edits: they never touch history or the revision.

mod project;
mod summary;

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use project::{
    FxId, FxInstance, FxParam, MediaItem, ProjectContent, SourceKind, Step, Track, TrackSend, TransportAction,
    TransportState, DEFAULT_TEMPO_BPM, MAX_VOLUME_DB, MIN_VOLUME_DB,
};
pub use summary::{FxDoc, ItemDoc, ParamDoc, ProjectStateDoc, SendDoc, TrackDoc};

use crate::units::UnitRegistry;

pub const DEFAULT_UNDO_CAP: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("a transaction is already open")]
    NestedTransaction,
    #[error("commit without an open transaction")]
    CommitWithoutTransaction,
    #[error("operation requires an open transaction")]
    NoTransaction,
    #[error("cannot undo or redo while a transaction is open")]
    TransactionOpen,
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
    #[error("index {index} out of range for {len} tracks")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown track {0}")]
    UnknownTrack(usize),
    #[error("unknown fx {fx} on track {track}")]
    UnknownFx { track: usize, fx: usize },
    #[error("no fx with id {0}")]
    UnknownFxId(FxId),
    #[error("unknown fx type {0:?}")]
    UnknownFxType(String),
    #[error("unknown param {param} on fx {fx} of track {track}")]
    UnknownParam { track: usize, fx: usize, param: usize },
    #[error("unknown item {item} on track {track}")]
    UnknownItem { track: usize, item: usize },
    #[error("{what} {value} outside [{min}, {max}]")]
    ValueOutOfRange { what: &'static str, value: f64, min: f64, max: f64 },
    #[error("track {0} cannot send to itself")]
    SelfSend(usize),
    #[error("duplicate fx id {0}")]
    DuplicateFxId(FxId),
    #[error("invalid unit spec in document")]
    InvalidUnit,
    #[error("invalid project document: {0}")]
    InvalidDocument(String),
}

/// A restorable copy of project content.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub snapshot: ProjectContent,
    pub label: String,
    pub revision_at_capture: u64,
}

#[derive(Debug, Clone)]
struct OpenTransaction {
    label: String,
    snapshot: ProjectContent,
}

#[derive(Debug, Clone)]
pub struct Engine {
    revision: u64,
    content: ProjectContent,
    transport: TransportState,
    registry: UnitRegistry,
    undo_stack: VecDeque<Checkpoint>,
    redo_stack: Vec<Checkpoint>,
    undo_cap: usize,
    open: Option<OpenTransaction>,
    fx_ids: u64,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine {
    /// Empty project at revision 0, 120 bpm, transport stopped.
    pub fn new() -> Self {
        Self::with_registry(UnitRegistry::stock())
    }

    pub fn with_registry(registry: UnitRegistry) -> Self {
        Engine {
            revision: 0,
            content: ProjectContent::default(),
            transport: TransportState::default(),
            registry,
            undo_stack: VecDeque::new(),
            redo_stack: Vec::new(),
            undo_cap: DEFAULT_UNDO_CAP,
            open: None,
            fx_ids: 0,
        }
    }

    /// Loads a saved state document. History starts empty.
    pub fn from_doc(doc: &ProjectStateDoc, registry: UnitRegistry) -> Result<Self, EngineError> {
        let content = doc.to_content()?;
        let mut engine = Self::with_registry(registry);
        engine.fx_ids = content.max_fx_id().map_or(0, |id| id.0);
        engine.content = content;
        engine.transport = doc.transport;
        engine.revision = doc.revision;
        Ok(engine)
    }

    pub fn with_undo_cap(mut self, cap: usize) -> Self {
        self.undo_cap = cap.max(1);
        self
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn content(&self) -> &ProjectContent {
        &self.content
    }

    pub fn tracks(&self) -> &[Track] {
        &self.content.tracks
    }

    pub fn transport(&self) -> &TransportState {
        &self.transport
    }

    pub fn registry(&self) -> &UnitRegistry {
        &self.registry
    }

    pub fn undo_depth(&self) -> usize {
        self.undo_stack.len()
    }

    pub fn redo_depth(&self) -> usize {
        self.redo_stack.len()
    }

    pub fn undo_label(&self) -> Option<&str> {
        self.undo_stack.back().map(|c| c.label.as_str())
    }

    pub fn in_transaction(&self) -> bool {
        self.open.is_some()
    }

    pub fn state_summary(&self) -> ProjectStateDoc {
        ProjectStateDoc::build(self.revision, &self.content, &self.transport)
    }

    pub fn begin(&mut self, label: impl Into<String>) -> Result<(), EngineError> {
        if self.open.is_some() {
            return Err(EngineError::NestedTransaction);
        }
        self.open = Some(OpenTransaction { label: label.into(), snapshot: self.content.clone() });
        Ok(())
    }

    /// Closes the open transaction as one undo point; returns the new revision.
    pub fn commit(&mut self) -> Result<u64, EngineError> {
        let tx = self.open.take().ok_or(EngineError::CommitWithoutTransaction)?;
        self.push_undo(Checkpoint { snapshot: tx.snapshot, label: tx.label, revision_at_capture: self.revision });
        self.redo_stack.clear();
        self.revision += 1;
        Ok(self.revision)
    }

    pub fn rollback(&mut self) -> Result<(), EngineError> {
        let tx = self.open.take().ok_or(EngineError::NoTransaction)?;
        self.content = tx.snapshot;
        Ok(())
    }

    /// Runs `f` inside a transaction, committing on success and rolling back on error.
    pub fn transact<T, E>(
        &mut self,
        label: impl Into<String>,
        f: impl FnOnce(&mut Self) -> Result<T, E>,
    ) -> Result<(T, u64), E>
    where
        E: From<EngineError>,
    {
        self.begin(label)?;
        match f(self) {
            Ok(value) => {
                let revision = self.commit()?;
                Ok((value, revision))
            }
            Err(e) => {
                self.rollback()?;
                Err(e)
            }
        }
    }

    fn push_undo(&mut self, checkpoint: Checkpoint) {
        if self.undo_stack.len() == self.undo_cap {
            self.undo_stack.pop_front();
        }
        self.undo_stack.push_back(checkpoint);
    }

    pub fn undo(&mut self) -> Result<u64, EngineError> {
        if self.open.is_some() {
            return Err(EngineError::TransactionOpen);
        }
        let checkpoint = self.undo_stack.pop_back().ok_or(EngineError::NothingToUndo)?;
        let current = core::mem::replace(&mut self.content, checkpoint.snapshot);
        self.redo_stack.push(Checkpoint {
            snapshot: current,
            label: checkpoint.label,
            revision_at_capture: self.revision,
        });
        self.revision += 1;
        Ok(self.revision)
    }

    pub fn redo(&mut self) -> Result<u64, EngineError> {
        if self.open.is_some() {
            return Err(EngineError::TransactionOpen);
        }
        let checkpoint = self.redo_stack.pop().ok_or(EngineError::NothingToRedo)?;
        let current = core::mem::replace(&mut self.content, checkpoint.snapshot);
        self.push_undo(Checkpoint { snapshot: current, label: checkpoint.label, revision_at_capture: self.revision });
        self.revision += 1;
        Ok(self.revision)
    }

    fn editable(&mut self) -> Result<&mut ProjectContent, EngineError> {
        if self.open.is_none() {
            return Err(EngineError::NoTransaction);
        }
        Ok(&mut self.content)
    }

    /// Applies a resolved step inside the open transaction.
    pub fn apply_step(&mut self, step: &Step) -> Result<(), EngineError> {
        if self.open.is_none() {
            return Err(EngineError::NoTransaction);
        }
        self.content.apply(step, &self.registry, &mut self.fx_ids)
    }

    /// Inserts a track with default settings; `None` appends.
    pub fn add_track(&mut self, name: impl Into<String>, index: Option<usize>) -> Result<usize, EngineError> {
        let content = self.editable()?;
        let at = index.unwrap_or(content.tracks.len());
        content.insert_track(at, Track::new(name))
    }

    pub fn duplicate_track(&mut self, index: usize) -> Result<usize, EngineError> {
        self.editable()?;
        let at = self.content.tracks.len();
        if index >= at {
            return Err(EngineError::IndexOutOfRange { index, len: at });
        }
        self.content.duplicate_track(index, &mut self.fx_ids)
    }

    pub fn set_track_volume_db(&mut self, track: usize, db: f64) -> Result<(), EngineError> {
        self.editable()?.set_volume_db(track, db)
    }

    pub fn set_track_pan(&mut self, track: usize, pan: f64) -> Result<(), EngineError> {
        self.editable()?.set_pan(track, pan)
    }

    pub fn set_track_mute(&mut self, track: usize, mute: bool) -> Result<(), EngineError> {
        self.editable()?.set_mute(track, mute)
    }

    pub fn set_track_solo(&mut self, track: usize, solo: bool) -> Result<(), EngineError> {
        self.editable()?.set_solo(track, solo)
    }

    pub fn set_item_pitch(&mut self, track: usize, item: usize, semitones: f64) -> Result<(), EngineError> {
        self.editable()?.set_item_pitch(track, item, semitones)
    }

    pub fn set_fx_param_normalized(
        &mut self,
        track: usize,
        fx_id: FxId,
        param: usize,
        value: f64,
    ) -> Result<(), EngineError> {
        let content = self.editable()?;
        let position = content.track(track)?.fx_position(fx_id).ok_or(EngineError::UnknownFxId(fx_id))?;
        content.set_fx_param(track, position, param, value)
    }

    pub fn add_fx(&mut self, track: usize, fx_name: &str) -> Result<FxId, EngineError> {
        if self.open.is_none() {
            return Err(EngineError::NoTransaction);
        }
        self.content.add_fx(track, fx_name, &self.registry, &mut self.fx_ids)
    }

    pub fn import_item(&mut self, track: usize, item: MediaItem) -> Result<usize, EngineError> {
        self.editable()?.import_item(track, item)
    }

    pub fn add_send(&mut self, track: usize, target: usize, gain_db: f64) -> Result<(), EngineError> {
        self.editable()?.add_send(track, target, gain_db)
    }

    pub fn set_tempo(&mut self, bpm: f64) -> Result<(), EngineError> {
        self.editable()?.set_tempo(bpm)
    }

    /// Play/stop/record. Outside history: no transaction, no revision bump.
    pub fn transport_control(&mut self, action: TransportAction) -> TransportState {
        self.transport.apply(action);
        self.transport
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn committed(engine: &mut Engine, f: impl FnOnce(&mut Engine)) -> u64 {
        engine.begin("test").unwrap();
        f(engine);
        engine.commit().unwrap()
    }

    #[test]
    fn new_project_defaults() {
        let mut e = Engine::new();
        assert_eq!(e.revision(), 0);
        assert!(e.tracks().is_empty());
        assert_eq!(e.content().tempo_bpm, 120.0);
        assert!(!e.transport().playing && !e.transport().recording);
        assert_eq!(e.undo(), Err(EngineError::NothingToUndo));
        assert_eq!(e.redo(), Err(EngineError::NothingToRedo));
        let doc = e.state_summary().to_json();
        assert!(doc.contains("\"tracks\":[]"), "{doc}");
        assert!(doc.starts_with("{\"revision\":0,"), "{doc}");
    }

    #[test]
    fn one_transaction_is_one_revision() {
        let mut e = Engine::new();
        let rev = committed(&mut e, |e| {
            e.add_track("a", None).unwrap();
            e.add_track("b", None).unwrap();
        });
        assert_eq!(rev, 1);
        assert_eq!(e.tracks().len(), 2);
        assert_eq!(e.undo_depth(), 1);
    }

    #[test]
    fn rollback_restores_snapshot() {
        let mut e = Engine::new();
        committed(&mut e, |e| {
            e.add_track("keep", None).unwrap();
        });
        let before = e.content().clone();
        e.begin("scratch").unwrap();
        e.add_track("discard", None).unwrap();
        e.set_track_volume_db(0, -6.0).unwrap();
        e.rollback().unwrap();
        assert_eq!(e.content(), &before);
        assert_eq!(e.revision(), 1);
    }

    #[test]
    fn transaction_errors() {
        let mut e = Engine::new();
        e.begin("one").unwrap();
        assert_eq!(e.begin("two"), Err(EngineError::NestedTransaction));
        assert_eq!(e.undo(), Err(EngineError::TransactionOpen));
        e.commit().unwrap();
        assert_eq!(e.commit(), Err(EngineError::CommitWithoutTransaction));
        assert_eq!(e.add_track("x", None), Err(EngineError::NoTransaction));
        assert_eq!(e.rollback(), Err(EngineError::NoTransaction));
    }

    #[test]
    fn undo_redo_round_trip() {
        let mut e = Engine::new();
        committed(&mut e, |e| {
            e.add_track("Vocals", None).unwrap();
        });
        let after = e.content().clone();
        assert_eq!(e.undo(), Ok(2));
        assert!(e.tracks().is_empty());
        assert_eq!(e.redo(), Ok(3));
        assert_eq!(e.content(), &after);
    }

    #[test]
    fn undo_exhausts() {
        let mut e = Engine::new();
        for i in 0..3 {
            committed(&mut e, |e| {
                e.add_track(alloc::format!("t{i}"), None).unwrap();
            });
        }
        for _ in 0..3 {
            e.undo().unwrap();
        }
        assert!(e.tracks().is_empty());
        assert_eq!(e.undo(), Err(EngineError::NothingToUndo));
    }

    #[test]
    fn new_commit_clears_redo() {
        let mut e = Engine::new();
        committed(&mut e, |e| {
            e.add_track("a", None).unwrap();
        });
        e.undo().unwrap();
        assert_eq!(e.redo_depth(), 1);
        committed(&mut e, |e| {
            e.add_track("b", None).unwrap();
        });
        assert_eq!(e.redo_depth(), 0);
    }

    #[test]
    fn undo_cap_evicts_oldest() {
        let mut e = Engine::new().with_undo_cap(2);
        for i in 0..3 {
            committed(&mut e, |e| {
                e.add_track(alloc::format!("t{i}"), None).unwrap();
            });
        }
        assert_eq!(e.undo_depth(), 2);
        e.undo().unwrap();
        e.undo().unwrap();
        assert_eq!(e.tracks().len(), 1);
        assert_eq!(e.undo(), Err(EngineError::NothingToUndo));
    }

    #[test]
    fn default_undo_cap() {
        let mut e = Engine::new();
        for _ in 0..300 {
            committed(&mut e, |e| {
                e.add_track("t", None).unwrap();
            });
        }
        assert_eq!(e.undo_depth(), DEFAULT_UNDO_CAP);
    }

    #[test]
    fn add_track_positions() {
        let mut e = Engine::new();
        e.begin("t").unwrap();
        assert_eq!(e.add_track("Vocals", None), Ok(0));
        e.add_track("Bass", None).unwrap();
        e.add_track("Drums", Some(0)).unwrap();
        assert_eq!(e.tracks()[1].name, "Vocals");
        assert_eq!(e.add_track("x", Some(5)), Err(EngineError::IndexOutOfRange { index: 5, len: 3 }));
        e.commit().unwrap();
        assert_eq!(e.tracks()[0].volume_db, 0.0);
        assert_eq!(e.tracks()[0].pan, 0.0);
    }

    #[test]
    fn duplicate_is_independent() {
        let mut e = Engine::new();
        e.begin("t").unwrap();
        e.add_track("a", None).unwrap();
        e.add_track("b", None).unwrap();
        e.set_track_volume_db(0, -3.0).unwrap();
        e.add_fx(0, "ReaComp").unwrap();
        assert_eq!(e.duplicate_track(0), Ok(1));
        assert_eq!(e.tracks()[1].volume_db, -3.0);
        e.set_track_volume_db(1, -10.0).unwrap();
        assert_eq!(e.tracks()[0].volume_db, -3.0);
        assert_eq!(e.duplicate_track(7), Err(EngineError::IndexOutOfRange { index: 7, len: 3 }));
        e.commit().unwrap();
    }

    #[test]
    fn parameter_setters() {
        let mut e = Engine::new();
        e.begin("t").unwrap();
        e.add_track("a", None).unwrap();
        e.import_item(0, MediaItem::new(SourceKind::Midi, "m", 2.0)).unwrap();
        // 20*log10(2), the "double the volume" gain
        e.set_track_volume_db(0, 6.0206).unwrap();
        assert_eq!(e.tracks()[0].volume_db, 6.0206);
        e.set_item_pitch(0, 0, 12.0).unwrap();
        assert_eq!(e.tracks()[0].items[0].pitch_shift_semitones, 12.0);
        let fx = e.add_fx(0, "ReaComp").unwrap();
        assert!(matches!(e.set_fx_param_normalized(0, fx, 2, 1.3), Err(EngineError::ValueOutOfRange { .. })));
        e.set_fx_param_normalized(0, fx, 2, 0.02).unwrap();
        assert_eq!(e.set_fx_param_normalized(0, FxId(99), 2, 0.1), Err(EngineError::UnknownFxId(FxId(99))));
        assert_eq!(e.set_item_pitch(0, 3, 1.0), Err(EngineError::UnknownItem { track: 0, item: 3 }));
        assert_eq!(e.set_track_volume_db(4, 0.0), Err(EngineError::UnknownTrack(4)));
        assert!(e.import_item(0, MediaItem::new(SourceKind::Audio, "a", 0.0)).is_err());
        e.commit().unwrap();
    }

    #[test]
    fn transport_outside_history() {
        let mut e = Engine::new();
        let t = e.transport_control(TransportAction::Record);
        assert!(t.recording && !t.playing);
        e.transport_control(TransportAction::Play);
        assert_eq!(e.revision(), 0);
        assert_eq!(e.undo_depth(), 0);
        let t = e.transport_control(TransportAction::Stop);
        assert!(!t.playing && !t.recording);
    }

    #[test]
    fn summary_renders_human_units_and_is_stable() {
        let mut registry = UnitRegistry::stock();
        registry.fx[0].params[2].unit =
            crate::units::UnitSpec::linear(crate::units::UnitKind::Milliseconds, 0.0, 100.0);
        let mut e = Engine::with_registry(registry);
        e.begin("t").unwrap();
        e.add_track("a", None).unwrap();
        let fx = e.add_fx(0, "ReaComp").unwrap();
        e.set_fx_param_normalized(0, fx, 2, 0.5).unwrap();
        e.commit().unwrap();
        let doc = e.state_summary();
        assert_eq!(doc.tracks[0].fx[0].params[2].display, "50 ms");
        assert_eq!(e.state_summary().to_json(), doc.to_json());
        assert_eq!(e.revision(), 1);
    }

    #[test]
    fn load_round_trip() {
        let mut e = Engine::new();
        e.begin("t").unwrap();
        e.add_track("a", None).unwrap();
        e.add_track("b", None).unwrap();
        e.add_fx(0, "ReaEQ").unwrap();
        e.add_send(0, 1, -6.0).unwrap();
        e.import_item(1, MediaItem::new(SourceKind::Audio, "beat", 2.0)).unwrap();
        e.commit().unwrap();
        let doc = ProjectStateDoc::from_json(&e.state_summary().to_json()).unwrap();
        let loaded = Engine::from_doc(&doc, UnitRegistry::stock()).unwrap();
        assert_eq!(loaded.content(), e.content());
        assert_eq!(loaded.revision(), 1);
        assert_eq!(loaded.undo_depth(), 0);
    }

    #[test]
    fn load_rejects_sparse_indices() {
        let mut e = Engine::new();
        e.transact("t", |e| e.add_track("a", None)).unwrap();
        let mut doc = e.state_summary();
        doc.tracks[0].index = 3;
        assert!(matches!(Engine::from_doc(&doc, UnitRegistry::stock()), Err(EngineError::InvalidDocument(_))));
    }
}
