use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::units::{UnitRegistry, UnitSpec};

pub const MIN_VOLUME_DB: f64 = -150.0;
pub const MAX_VOLUME_DB: f64 = 12.0;
pub const DEFAULT_TEMPO_BPM: f64 = 120.0;

/// Opaque FX identity, unique among the FX of a project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FxId(pub u64);

impl core::fmt::Display for FxId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "fx-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxParam {
    pub name: String,
    pub normalized_value: f64,
    pub unit: UnitSpec,
}

impl FxParam {
    pub fn slider_max(&self) -> f64 {
        self.unit.slider_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxInstance {
    pub fx_id: FxId,
    pub fx_name: String,
    pub params: Vec<FxParam>,
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Midi,
    Audio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaItem {
    pub position_s: f64,
    pub length_s: f64,
    pub source_kind: SourceKind,
    pub source_ref: String,
    #[serde(default)]
    pub pitch_shift_semitones: f64,
}

impl MediaItem {
    pub fn new(source_kind: SourceKind, source_ref: impl Into<String>, length_s: f64) -> Self {
        MediaItem { position_s: 0.0, length_s, source_kind, source_ref: source_ref.into(), pitch_shift_semitones: 0.0 }
    }

    pub(crate) fn check(&self) -> Result<(), EngineError> {
        if !(self.length_s > 0.0 && self.length_s.is_finite()) {
            return Err(EngineError::ValueOutOfRange {
                what: "item length_s",
                value: self.length_s,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if !(self.position_s >= 0.0 && self.position_s.is_finite()) {
            return Err(EngineError::ValueOutOfRange {
                what: "item position_s",
                value: self.position_s,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        check_finite("item pitch_shift_semitones", self.pitch_shift_semitones)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSend {
    pub target: usize,
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub name: String,
    pub volume_db: f64,
    pub pan: f64,
    pub mute: bool,
    pub solo: bool,
    pub fx_chain: Vec<FxInstance>,
    pub items: Vec<MediaItem>,
    pub sends: Vec<TrackSend>,
}

impl Track {
    pub fn new(name: impl Into<String>) -> Self {
        Track {
            name: name.into(),
            volume_db: 0.0,
            pan: 0.0,
            mute: false,
            solo: false,
            fx_chain: Vec::new(),
            items: Vec::new(),
            sends: Vec::new(),
        }
    }

    pub fn fx_position(&self, fx_id: FxId) -> Option<usize> {
        self.fx_chain.iter().position(|fx| fx.fx_id == fx_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportAction {
    Play,
    Stop,
    Record,
}

impl TransportAction {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "play" | "start" => Some(TransportAction::Play),
            "stop" => Some(TransportAction::Stop),
            "record" => Some(TransportAction::Record),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransportAction::Play => "play",
            TransportAction::Stop => "stop",
            TransportAction::Record => "record",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransportState {
    pub playing: bool,
    /// Armed for recording; playback may still be stopped.
    pub recording: bool,
    pub playhead_s: f64,
}

impl TransportState {
    pub fn apply(&mut self, action: TransportAction) {
        match action {
            TransportAction::Play => self.playing = true,
            TransportAction::Stop => {
                self.playing = false;
                self.recording = false;
            }
            TransportAction::Record => self.recording = true,
        }
    }
}

/// Everything that undo restores: tempo and the track tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectContent {
    pub tempo_bpm: f64,
    pub tracks: Vec<Track>,
}

impl Default for ProjectContent {
    fn default() -> Self {
        ProjectContent { tempo_bpm: DEFAULT_TEMPO_BPM, tracks: Vec::new() }
    }
}

/// A concrete, fully resolved engine mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    AddTrack {
        index: usize,
        name: String,
    },
    RemoveTrack {
        index: usize,
    },
    /// Inserts a deep copy of `source` at `source + 1`.
    DuplicateTrack {
        source: usize,
    },
    SetVolume {
        track: usize,
        volume_db: f64,
    },
    SetPan {
        track: usize,
        pan: f64,
    },
    SetMute {
        track: usize,
        mute: bool,
    },
    /// Appends a registered FX to the end of the chain.
    AddFx {
        track: usize,
        fx_name: String,
    },
    RemoveFx {
        track: usize,
        position: usize,
    },
    SetFxParam {
        track: usize,
        fx: usize,
        param: usize,
        normalized: f64,
    },
    SetItemPitch {
        track: usize,
        item: usize,
        semitones: f64,
    },
    /// Inserts a new track holding a single item.
    ImportTrack {
        index: usize,
        name: String,
        item: MediaItem,
    },
}

fn check_finite(what: &'static str, value: f64) -> Result<(), EngineError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(EngineError::ValueOutOfRange { what, value, min: f64::MIN, max: f64::MAX })
    }
}

fn check_range(what: &'static str, value: f64, min: f64, max: f64) -> Result<(), EngineError> {
    if value >= min && value <= max {
        Ok(())
    } else {
        Err(EngineError::ValueOutOfRange { what, value, min, max })
    }
}

impl ProjectContent {
    pub fn track(&self, index: usize) -> Result<&Track, EngineError> {
        self.tracks.get(index).ok_or(EngineError::UnknownTrack(index))
    }

    fn track_mut(&mut self, index: usize) -> Result<&mut Track, EngineError> {
        self.tracks.get_mut(index).ok_or(EngineError::UnknownTrack(index))
    }

    /// Largest FX id in use, if any.
    pub fn max_fx_id(&self) -> Option<FxId> {
        self.tracks.iter().flat_map(|t| t.fx_chain.iter().map(|fx| fx.fx_id)).max()
    }

    pub fn insert_track(&mut self, index: usize, track: Track) -> Result<usize, EngineError> {
        if index > self.tracks.len() {
            return Err(EngineError::IndexOutOfRange { index, len: self.tracks.len() });
        }
        for t in &mut self.tracks {
            for send in &mut t.sends {
                if send.target >= index {
                    send.target += 1;
                }
            }
        }
        self.tracks.insert(index, track);
        Ok(index)
    }

    pub fn remove_track(&mut self, index: usize) -> Result<Track, EngineError> {
        if index >= self.tracks.len() {
            return Err(EngineError::UnknownTrack(index));
        }
        let removed = self.tracks.remove(index);
        for t in &mut self.tracks {
            t.sends.retain(|s| s.target != index);
            for send in &mut t.sends {
                if send.target > index {
                    send.target -= 1;
                }
            }
        }
        Ok(removed)
    }

    pub fn duplicate_track(&mut self, source: usize, ids: &mut u64) -> Result<usize, EngineError> {
        let mut copy = self.track(source)?.clone();
        for fx in &mut copy.fx_chain {
            fx.fx_id = next_id(ids);
        }
        let at = source + 1;
        self.insert_track(at, copy)?;
        // sends were shifted by the insert; the copy's targets must match the source's
        let sends = self.tracks[source].sends.clone();
        self.tracks[at].sends = sends;
        Ok(at)
    }

    pub fn set_volume_db(&mut self, track: usize, db: f64) -> Result<(), EngineError> {
        check_range("volume_db", db, MIN_VOLUME_DB, MAX_VOLUME_DB)?;
        self.track_mut(track)?.volume_db = db;
        Ok(())
    }

    pub fn set_pan(&mut self, track: usize, pan: f64) -> Result<(), EngineError> {
        check_range("pan", pan, -1.0, 1.0)?;
        self.track_mut(track)?.pan = pan;
        Ok(())
    }

    pub fn set_mute(&mut self, track: usize, mute: bool) -> Result<(), EngineError> {
        self.track_mut(track)?.mute = mute;
        Ok(())
    }

    pub fn set_solo(&mut self, track: usize, solo: bool) -> Result<(), EngineError> {
        self.track_mut(track)?.solo = solo;
        Ok(())
    }

    pub fn add_fx(
        &mut self,
        track: usize,
        fx_name: &str,
        registry: &UnitRegistry,
        ids: &mut u64,
    ) -> Result<FxId, EngineError> {
        let def = registry.fx(fx_name).ok_or_else(|| EngineError::UnknownFxType(fx_name.into()))?;
        let t = self.track_mut(track)?;
        let fx_id = next_id(ids);
        t.fx_chain.push(FxInstance {
            fx_id,
            fx_name: def.name.clone(),
            params: def
                .params
                .iter()
                .map(|p| FxParam { name: p.name.clone(), normalized_value: p.default_normalized, unit: p.unit })
                .collect(),
            enabled: true,
        });
        Ok(fx_id)
    }

    pub fn remove_fx(&mut self, track: usize, position: usize) -> Result<FxInstance, EngineError> {
        let t = self.track_mut(track)?;
        if position >= t.fx_chain.len() {
            return Err(EngineError::UnknownFx { track, fx: position });
        }
        Ok(t.fx_chain.remove(position))
    }

    pub fn set_fx_param(&mut self, track: usize, fx: usize, param: usize, normalized: f64) -> Result<(), EngineError> {
        let t = self.track_mut(track)?;
        let instance = t.fx_chain.get_mut(fx).ok_or(EngineError::UnknownFx { track, fx })?;
        let p = instance.params.get_mut(param).ok_or(EngineError::UnknownParam { track, fx, param })?;
        check_range("normalized_value", normalized, 0.0, p.slider_max())?;
        p.normalized_value = normalized;
        Ok(())
    }

    pub fn set_item_pitch(&mut self, track: usize, item: usize, semitones: f64) -> Result<(), EngineError> {
        check_finite("pitch_shift_semitones", semitones)?;
        let t = self.track_mut(track)?;
        let it = t.items.get_mut(item).ok_or(EngineError::UnknownItem { track, item })?;
        it.pitch_shift_semitones = semitones;
        Ok(())
    }

    pub fn import_item(&mut self, track: usize, item: MediaItem) -> Result<usize, EngineError> {
        item.check()?;
        let t = self.track_mut(track)?;
        t.items.push(item);
        Ok(t.items.len() - 1)
    }

    pub fn add_send(&mut self, track: usize, target: usize, gain_db: f64) -> Result<(), EngineError> {
        check_range("send gain_db", gain_db, MIN_VOLUME_DB, MAX_VOLUME_DB)?;
        if target >= self.tracks.len() {
            return Err(EngineError::UnknownTrack(target));
        }
        if target == track {
            return Err(EngineError::SelfSend(track));
        }
        self.track_mut(track)?.sends.push(TrackSend { target, gain_db });
        Ok(())
    }

    pub fn set_tempo(&mut self, bpm: f64) -> Result<(), EngineError> {
        check_range("tempo_bpm", bpm, 1.0, 960.0)?;
        self.tempo_bpm = bpm;
        Ok(())
    }

    /// Applies one resolved step. FX ids for new FX are drawn from `ids`.
    pub fn apply(&mut self, step: &Step, registry: &UnitRegistry, ids: &mut u64) -> Result<(), EngineError> {
        match step {
            Step::AddTrack { index, name } => self.insert_track(*index, Track::new(name.clone())).map(drop),
            Step::RemoveTrack { index } => self.remove_track(*index).map(drop),
            Step::DuplicateTrack { source } => self.duplicate_track(*source, ids).map(drop),
            Step::SetVolume { track, volume_db } => self.set_volume_db(*track, *volume_db),
            Step::SetPan { track, pan } => self.set_pan(*track, *pan),
            Step::SetMute { track, mute } => self.set_mute(*track, *mute),
            Step::AddFx { track, fx_name } => self.add_fx(*track, fx_name, registry, ids).map(drop),
            Step::RemoveFx { track, position } => self.remove_fx(*track, *position).map(drop),
            Step::SetFxParam { track, fx, param, normalized } => self.set_fx_param(*track, *fx, *param, *normalized),
            Step::SetItemPitch { track, item, semitones } => self.set_item_pitch(*track, *item, *semitones),
            Step::ImportTrack { index, name, item } => {
                item.check()?;
                let mut track = Track::new(name.clone());
                track.items.push(item.clone());
                self.insert_track(*index, track).map(drop)
            }
        }
    }

    /// Checks every structural invariant; used when loading external documents.
    pub fn check(&self) -> Result<(), EngineError> {
        check_range("tempo_bpm", self.tempo_bpm, 1.0, 960.0)?;
        let mut seen: Vec<FxId> = Vec::new();
        for (i, t) in self.tracks.iter().enumerate() {
            check_range("volume_db", t.volume_db, MIN_VOLUME_DB, MAX_VOLUME_DB)?;
            check_range("pan", t.pan, -1.0, 1.0)?;
            for s in &t.sends {
                if s.target >= self.tracks.len() {
                    return Err(EngineError::UnknownTrack(s.target));
                }
                if s.target == i {
                    return Err(EngineError::SelfSend(i));
                }
                check_range("send gain_db", s.gain_db, MIN_VOLUME_DB, MAX_VOLUME_DB)?;
            }
            for fx in &t.fx_chain {
                if seen.contains(&fx.fx_id) {
                    return Err(EngineError::DuplicateFxId(fx.fx_id));
                }
                seen.push(fx.fx_id);
                for p in &fx.params {
                    p.unit.check().map_err(|_| EngineError::InvalidUnit)?;
                    check_range("normalized_value", p.normalized_value, 0.0, p.slider_max())?;
                }
            }
            for item in &t.items {
                item.check()?;
            }
        }
        Ok(())
    }
}

fn next_id(ids: &mut u64) -> FxId {
    *ids += 1;
    FxId(*ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tracks() -> ProjectContent {
        let mut c = ProjectContent::default();
        c.insert_track(0, Track::new("A")).unwrap();
        c.insert_track(1, Track::new("B")).unwrap();
        c
    }

    #[test]
    fn insert_shifts_send_targets() {
        let mut c = two_tracks();
        c.add_send(0, 1, -6.0).unwrap();
        c.insert_track(1, Track::new("mid")).unwrap();
        assert_eq!(c.tracks[0].sends[0].target, 2);
        c.remove_track(1).unwrap();
        assert_eq!(c.tracks[0].sends[0].target, 1);
    }

    #[test]
    fn removing_a_send_target_drops_the_send() {
        let mut c = two_tracks();
        c.add_send(0, 1, 0.0).unwrap();
        c.remove_track(1).unwrap();
        assert!(c.tracks[0].sends.is_empty());
    }

    #[test]
    fn duplicate_copies_sends_and_regenerates_ids() {
        let reg = UnitRegistry::stock();
        let mut ids = 0;
        let mut c = two_tracks();
        c.add_fx(0, "ReaComp", &reg, &mut ids).unwrap();
        c.add_send(0, 1, -3.0).unwrap();
        c.add_send(1, 0, -9.0).unwrap();
        let at = c.duplicate_track(0, &mut ids).unwrap();
        assert_eq!(at, 1);
        assert_eq!(c.tracks[1].sends, alloc::vec![TrackSend { target: 2, gain_db: -3.0 }]);
        assert_eq!(c.tracks[0].sends, c.tracks[1].sends);
        assert_eq!(c.tracks[2].sends[0].target, 0);
        assert_ne!(c.tracks[0].fx_chain[0].fx_id, c.tracks[1].fx_chain[0].fx_id);
        c.check().unwrap();
    }

    #[test]
    fn self_send_rejected() {
        let mut c = two_tracks();
        assert_eq!(c.add_send(1, 1, 0.0), Err(EngineError::SelfSend(1)));
    }

    #[test]
    fn out_of_range_values_rejected() {
        let reg = UnitRegistry::stock();
        let mut ids = 0;
        let mut c = two_tracks();
        assert!(matches!(c.set_volume_db(0, 12.5), Err(EngineError::ValueOutOfRange { .. })));
        assert!(matches!(c.set_pan(0, -1.5), Err(EngineError::ValueOutOfRange { .. })));
        c.add_fx(0, "ReaComp", &reg, &mut ids).unwrap();
        assert!(matches!(c.set_fx_param(0, 0, 2, 1.3), Err(EngineError::ValueOutOfRange { .. })));
        // the volume param is an amplitude slider up to 4
        c.set_fx_param(0, 0, 4, 3.9).unwrap();
        assert_eq!(c.set_fx_param(0, 0, 9, 0.1), Err(EngineError::UnknownParam { track: 0, fx: 0, param: 9 }));
        assert_eq!(c.add_fx(0, "Nope", &reg, &mut ids), Err(EngineError::UnknownFxType("Nope".into())));
    }
}
