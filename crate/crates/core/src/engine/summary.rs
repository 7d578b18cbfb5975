//! The canonical JSON view of a project.
//!
//! Field order is fixed by the struct definitions, so serialization is a pure
//! function of project content. The same document doubles as the project
//! file format: loading one rebuilds the content exactly, minus undo history.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::project::{
    FxId, FxInstance, FxParam, MediaItem, ProjectContent, SourceKind, Track, TrackSend, TransportState,
};
use super::EngineError;
use crate::units::{from_normalized, UnitSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStateDoc {
    pub revision: u64,
    pub tempo_bpm: f64,
    pub transport: TransportState,
    pub tracks: Vec<TrackDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackDoc {
    pub index: usize,
    pub name: String,
    pub volume_db: f64,
    pub pan: f64,
    pub mute: bool,
    pub solo: bool,
    pub fx: Vec<FxDoc>,
    pub items: Vec<ItemDoc>,
    pub sends: Vec<SendDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxDoc {
    pub index: usize,
    pub fx_id: FxId,
    pub fx_name: String,
    pub enabled: bool,
    pub params: Vec<ParamDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDoc {
    pub index: usize,
    pub name: String,
    pub normalized: f64,
    pub slider_max: f64,
    /// The normalized value expressed in the parameter's human unit.
    pub human: f64,
    pub display: String,
    pub unit: UnitSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDoc {
    pub index: usize,
    pub position_s: f64,
    pub length_s: f64,
    pub source_kind: SourceKind,
    pub source_ref: String,
    pub pitch_shift_semitones: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SendDoc {
    pub target: usize,
    pub gain_db: f64,
}

impl ProjectStateDoc {
    pub fn build(revision: u64, content: &ProjectContent, transport: &TransportState) -> Self {
        ProjectStateDoc {
            revision,
            tempo_bpm: content.tempo_bpm,
            transport: *transport,
            tracks: content.tracks.iter().enumerate().map(|(i, t)| track_doc(i, t)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        // every field is a plain number, string or bool; this cannot fail
        serde_json::to_string(self).unwrap_or_default()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        serde_json::from_str(text).map_err(|e| EngineError::InvalidDocument(alloc::format!("{e}")))
    }

    /// Rebuilds project content, checking index density and every range.
    pub fn to_content(&self) -> Result<ProjectContent, EngineError> {
        let mut tracks = Vec::with_capacity(self.tracks.len());
        for (i, t) in self.tracks.iter().enumerate() {
            if t.index != i {
                return Err(EngineError::InvalidDocument(alloc::format!(
                    "track at position {i} claims index {}",
                    t.index
                )));
            }
            let mut fx_chain = Vec::with_capacity(t.fx.len());
            for (k, fx) in t.fx.iter().enumerate() {
                if fx.index != k || fx.params.iter().enumerate().any(|(j, p)| p.index != j) {
                    return Err(EngineError::InvalidDocument(alloc::format!("fx indices on track {i} are not dense")));
                }
                fx_chain.push(FxInstance {
                    fx_id: fx.fx_id,
                    fx_name: fx.fx_name.clone(),
                    enabled: fx.enabled,
                    params: fx
                        .params
                        .iter()
                        .map(|p| FxParam { name: p.name.clone(), normalized_value: p.normalized, unit: p.unit })
                        .collect(),
                });
            }
            tracks.push(Track {
                name: t.name.clone(),
                volume_db: t.volume_db,
                pan: t.pan,
                mute: t.mute,
                solo: t.solo,
                fx_chain,
                items: t
                    .items
                    .iter()
                    .map(|it| MediaItem {
                        position_s: it.position_s,
                        length_s: it.length_s,
                        source_kind: it.source_kind,
                        source_ref: it.source_ref.clone(),
                        pitch_shift_semitones: it.pitch_shift_semitones,
                    })
                    .collect(),
                sends: t.sends.iter().map(|s| TrackSend { target: s.target, gain_db: s.gain_db }).collect(),
            });
        }
        let content = ProjectContent { tempo_bpm: self.tempo_bpm, tracks };
        content.check()?;
        Ok(content)
    }
}

fn track_doc(index: usize, t: &Track) -> TrackDoc {
    TrackDoc {
        index,
        name: t.name.clone(),
        volume_db: t.volume_db,
        pan: t.pan,
        mute: t.mute,
        solo: t.solo,
        fx: t
            .fx_chain
            .iter()
            .enumerate()
            .map(|(k, fx)| FxDoc {
                index: k,
                fx_id: fx.fx_id,
                fx_name: fx.fx_name.clone(),
                enabled: fx.enabled,
                params: fx.params.iter().enumerate().map(|(j, p)| param_doc(j, p)).collect(),
            })
            .collect(),
        items: t
            .items
            .iter()
            .enumerate()
            .map(|(j, it)| ItemDoc {
                index: j,
                position_s: it.position_s,
                length_s: it.length_s,
                source_kind: it.source_kind,
                source_ref: it.source_ref.clone(),
                pitch_shift_semitones: it.pitch_shift_semitones,
            })
            .collect(),
        sends: t.sends.iter().map(|s| SendDoc { target: s.target, gain_db: s.gain_db }).collect(),
    }
}

fn param_doc(index: usize, p: &FxParam) -> ParamDoc {
    let human = from_normalized(p.normalized_value, &p.unit).unwrap_or(p.unit.min_human);
    ParamDoc {
        index,
        name: p.name.clone(),
        normalized: p.normalized_value,
        slider_max: p.unit.slider_max,
        human,
        display: p.unit.render(human),
        unit: p.unit,
    }
}
