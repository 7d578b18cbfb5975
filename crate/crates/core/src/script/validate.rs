//! Resolution of a parsed script against a concrete session.
//!
//! Every statement is simulated on a scratch copy of the content with the
//! same step semantics the engine uses, so a plan that validates applies
//! cleanly at the revision it was resolved against. Each forward step is
//! paired with the step that undoes it, recorded against the state the
//! forward step saw.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use crate::beat::{parse_beat_prompt, BeatSpec};
use crate::engine::{
    EngineError, MediaItem, ProjectContent, ProjectStateDoc, SourceKind, Step, Track, TransportAction, MAX_VOLUME_DB,
    MIN_VOLUME_DB,
};
use crate::units::{
    db_to_gain, from_normalized, render_value, to_normalized, to_normalized_clamped, UnitError, UnitKind, UnitRegistry,
    UnitSpec,
};

/// Largest accepted item transpose, either direction.
pub const MAX_ITEM_PITCH_ST: f64 = 48.0;
pub const DEFAULT_BEAT_TRACK_NAME: &str = "Beat";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiHint {
    pub hint: String,
    pub track: usize,
}

/// Audio a plan needs rendered and stored under `content_id` before it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatAsset {
    pub content_id: String,
    pub spec: BeatSpec,
}

/// A script bound to one revision of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPlan {
    pub base_revision: u64,
    pub label: String,
    /// Canonical text of the statements the plan was built from.
    pub script: String,
    pub steps: Vec<Step>,
    /// `inverse_steps[i]` undoes `steps[i]`; undoing a plan runs them last to first.
    pub inverse_steps: Vec<Step>,
    pub explanation: Vec<String>,
    #[serde(default)]
    pub ui_hints: Vec<UiHint>,
    #[serde(default)]
    pub transport: Vec<TransportAction>,
    #[serde(default)]
    pub beats: Vec<BeatAsset>,
}

impl ResolvedPlan {
    /// True when the plan changes content and therefore creates an undo point.
    pub fn is_edit(&self) -> bool {
        !self.steps.is_empty()
    }

    /// The revision the session will be at after the plan runs.
    pub fn revision_after(&self) -> u64 {
        self.base_revision + self.is_edit() as u64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The plan that reverts `plan` once it has run.
pub fn invert(plan: &ResolvedPlan) -> ResolvedPlan {
    ResolvedPlan {
        base_revision: plan.revision_after(),
        label: alloc::format!("revert {}", plan.label),
        script: String::new(),
        steps: plan.inverse_steps.iter().rev().cloned().collect(),
        inverse_steps: plan.steps.iter().rev().cloned().collect(),
        explanation: alloc::vec![alloc::format!("revert: {}", plan.label)],
        ui_hints: Vec::new(),
        transport: Vec::new(),
        beats: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatementError {
    #[error("no track matches {0}")]
    UnknownTrack(String),
    #[error("track name {name:?} matches {candidates:?}")]
    AmbiguousTrackName { name: String, candidates: Vec<String> },
    #[error("track {track} has no fx {fx}")]
    UnknownFx { track: usize, fx: String },
    #[error("no fx type named {0:?}")]
    UnknownFxType(String),
    #[error("{fx} has no parameter {param:?}")]
    UnknownFxParam { fx: String, param: String },
    #[error("{what} takes {expected}, got {found}")]
    UnitMismatch { what: String, expected: String, found: String },
    #[error("{what} {value} is outside [{min}, {max}]")]
    ValueOutOfRange { what: String, value: f64, min: f64, max: f64 },
    #[error("track {track} has no item {item}")]
    UnknownItem { track: usize, item: usize },
    #[error("no stored content with id {0:?}")]
    UnknownSource(String),
    #[error("engine rejected the step: {0}")]
    Engine(EngineError),
}

impl StatementError {
    pub fn code(&self) -> &'static str {
        match self {
            StatementError::UnknownTrack(_) => "unknown_track",
            StatementError::AmbiguousTrackName { .. } => "ambiguous_track",
            StatementError::UnknownFx { .. } | StatementError::UnknownFxType(_) => "unknown_fx",
            StatementError::UnknownFxParam { .. } => "unknown_param",
            StatementError::UnitMismatch { .. } => "unit_mismatch",
            StatementError::ValueOutOfRange { .. } => "value_out_of_range",
            StatementError::UnknownItem { .. } => "unknown_item",
            StatementError::UnknownSource(_) => "unknown_source",
            StatementError::Engine(_) => "invalid_step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("script has no statements")]
    EmptyScript,
    #[error("statement {index} (line {line}): {error}")]
    Statement { index: usize, line: u32, error: StatementError },
    #[error("session document is invalid: {0}")]
    InvalidDocument(EngineError),
}

impl ValidationError {
    pub fn code(&self) -> &'static str {
        match self {
            ValidationError::EmptyScript => "empty_script",
            ValidationError::Statement { error, .. } => error.code(),
            ValidationError::InvalidDocument(_) => "invalid_document",
        }
    }
}

pub struct Validator<'a> {
    registry: &'a UnitRegistry,
    source_exists: Option<&'a dyn Fn(&str) -> bool>,
}

impl<'a> Validator<'a> {
    pub fn new(registry: &'a UnitRegistry) -> Self {
        Validator { registry, source_exists: None }
    }

    /// Import statements must name content that `exists` accepts.
    pub fn with_source_check(mut self, exists: &'a dyn Fn(&str) -> bool) -> Self {
        self.source_exists = Some(exists);
        self
    }

    pub fn validate(&self, script: &EditScript, doc: &ProjectStateDoc) -> Result<ResolvedPlan, ValidationError> {
        let content = doc.to_content().map_err(ValidationError::InvalidDocument)?;
        self.validate_content(script, &content, doc.revision)
    }

    pub fn validate_content(
        &self,
        script: &EditScript,
        content: &ProjectContent,
        revision: u64,
    ) -> Result<ResolvedPlan, ValidationError> {
        if script.is_empty() {
            return Err(ValidationError::EmptyScript);
        }
        let mut sim = Simulation {
            registry: self.registry,
            source_exists: self.source_exists,
            content: content.clone(),
            ids: content.max_fx_id().map_or(0, |id| id.0),
            plan: ResolvedPlan {
                base_revision: revision,
                label: label_for(script),
                script: script.pretty(),
                steps: Vec::new(),
                inverse_steps: Vec::new(),
                explanation: Vec::new(),
                ui_hints: Vec::new(),
                transport: Vec::new(),
                beats: Vec::new(),
            },
        };
        for (index, statement) in script.statements.iter().enumerate() {
            sim.statement(statement).map_err(|error| ValidationError::Statement {
                index,
                line: script.lines.get(index).copied().unwrap_or(0),
                error,
            })?;
        }
        Ok(sim.plan)
    }
}

fn label_for(script: &EditScript) -> String {
    let verbs: Vec<&str> = script.statements.iter().map(|s| s.verb()).collect();
    match verbs.as_slice() {
        [one] => one.to_string(),
        many => alloc::format!("{} ({} statements)", many[0], many.len()),
    }
}

struct Simulation<'a> {
    registry: &'a UnitRegistry,
    source_exists: Option<&'a dyn Fn(&str) -> bool>,
    content: ProjectContent,
    ids: u64,
    plan: ResolvedPlan,
}

type Res<T> = Result<T, StatementError>;

fn out_of_range(what: impl Into<String>, value: f64, min: f64, max: f64) -> StatementError {
    StatementError::ValueOutOfRange { what: what.into(), value, min, max }
}

fn bounded(what: &str, value: f64, min: f64, max: f64, clamp: bool) -> Res<f64> {
    if value.is_nan() {
        return Err(out_of_range(what, value, min, max));
    }
    if clamp {
        return Ok(value.clamp(min, max));
    }
    if value < min || value > max {
        return Err(out_of_range(what, value, min, max));
    }
    Ok(value)
}

fn db_text(db: f64) -> String {
    let text = render_value(db, UnitKind::DecibelGain);
    if db > 0.0 && !text.starts_with('0') {
        alloc::format!("+{text}")
    } else {
        text
    }
}

/// Plain-language note on what a gain change does to the signal level.
pub fn describe_gain_change(delta_db: f64) -> String {
    let ratio = db_to_gain(delta_db);
    if (ratio - 2.0).abs() < 1e-6 {
        alloc::format!("{} doubles the amplitude", db_text(delta_db))
    } else if (ratio - 0.5).abs() < 1e-6 {
        alloc::format!("{} halves the amplitude", db_text(delta_db))
    } else {
        let rendered = render_value(ratio, UnitKind::Raw);
        alloc::format!("{} scales the amplitude by {rendered}x", db_text(delta_db))
    }
}

impl Simulation<'_> {
    fn push(&mut self, step: Step, inverse: Step, explanation: String) -> Res<()> {
        self.content.apply(&step, self.registry, &mut self.ids).map_err(StatementError::Engine)?;
        self.plan.steps.push(step);
        self.plan.inverse_steps.push(inverse);
        self.plan.explanation.push(explanation);
        Ok(())
    }

    fn track_index(&self, sel: &TrackSel) -> Res<usize> {
        let tracks = &self.content.tracks;
        match sel {
            TrackSel::Index(i) if *i < tracks.len() => Ok(*i),
            TrackSel::Index(i) => Err(StatementError::UnknownTrack(alloc::format!("#{i}"))),
            TrackSel::Name(name) => resolve_name(name, tracks.iter().map(|t| t.name.as_str())),
        }
    }

    fn track(&self, index: usize) -> &Track {
        &self.content.tracks[index]
    }

    fn statement(&mut self, statement: &Statement) -> Res<()> {
        match statement {
            Statement::AddTrack { name, at } => {
                let len = self.content.tracks.len();
                let index = at.unwrap_or(len);
                if index > len {
                    return Err(out_of_range("track position", index as f64, 0.0, len as f64));
                }
                self.push(
                    Step::AddTrack { index, name: name.clone() },
                    Step::RemoveTrack { index },
                    alloc::format!("add track {name:?} at #{index}"),
                )
            }
            Statement::DuplicateTrack { track } => {
                let source = self.track_index(track)?;
                let name = self.track(source).name.clone();
                self.push(
                    Step::DuplicateTrack { source },
                    Step::RemoveTrack { index: source + 1 },
                    alloc::format!("duplicate {name:?} (#{source}) as #{}", source + 1),
                )
            }
            Statement::SetVolume { track, change, clamp } => self.set_volume(track, change, *clamp),
            Statement::SetPan { track, amount, clamp } => {
                let t = self.track_index(track)?;
                let current = self.track(t).pan;
                let (value, relative) = match amount {
                    Amount::Set(q) => (pan_value(q), false),
                    Amount::By(q) => (current + pan_value(q), true),
                };
                let pan = bounded("pan", value, -1.0, 1.0, *clamp)?;
                let name = self.track(t).name.clone();
                let how = if relative { "move" } else { "set" };
                self.push(
                    Step::SetPan { track: t, pan },
                    Step::SetPan { track: t, pan: current },
                    alloc::format!("{how} {name:?} pan to {} (was {})", pan_text(pan), pan_text(current)),
                )
            }
            Statement::SetMute { track, mute } => {
                let t = self.track_index(track)?;
                let current = self.track(t).mute;
                let name = self.track(t).name.clone();
                self.push(
                    Step::SetMute { track: t, mute: *mute },
                    Step::SetMute { track: t, mute: current },
                    alloc::format!("{} {name:?}", if *mute { "mute" } else { "unmute" }),
                )
            }
            Statement::AddFx { track, fx_name } => {
                let t = self.track_index(track)?;
                let def = self.registry.fx(fx_name).ok_or_else(|| StatementError::UnknownFxType(fx_name.clone()))?;
                let fx_name = def.name.clone();
                let position = self.track(t).fx_chain.len();
                let name = self.track(t).name.clone();
                self.push(
                    Step::AddFx { track: t, fx_name: fx_name.clone() },
                    Step::RemoveFx { track: t, position },
                    alloc::format!("add {fx_name} to {name:?} at slot {position}"),
                )
            }
            Statement::SetFxParam { track, fx, param, change, clamp } => {
                self.set_fx_param(track, fx, param, change, *clamp)
            }
            Statement::SetItemPitch { track, item, amount } => {
                let t = self.track_index(track)?;
                let current = self
                    .track(t)
                    .items
                    .get(*item)
                    .ok_or(StatementError::UnknownItem { track: t, item: *item })?
                    .pitch_shift_semitones;
                let value = match amount {
                    Amount::Set(q) => q.value,
                    Amount::By(q) => current + q.value,
                };
                let semitones = bounded("pitch", value, -MAX_ITEM_PITCH_ST, MAX_ITEM_PITCH_ST, false)?;
                let name = self.track(t).name.clone();
                self.push(
                    Step::SetItemPitch { track: t, item: *item, semitones },
                    Step::SetItemPitch { track: t, item: *item, semitones: current },
                    alloc::format!(
                        "transpose item {item} on {name:?} to {} (was {})",
                        render_value(semitones, UnitKind::Semitones),
                        render_value(current, UnitKind::Semitones)
                    ),
                )
            }
            Statement::ImportMidi { name, source, length, position } => {
                self.import(SourceKind::Midi, name, source, length, position.as_ref())
            }
            Statement::ImportAudio { name, source, length, position } => {
                self.import(SourceKind::Audio, name, source, length, position.as_ref())
            }
            Statement::GenerateBeatTrack { prompt, name } => {
                let spec = parse_beat_prompt(prompt);
                let content_id = spec.content_id();
                let index = self.content.tracks.len();
                let name = name.clone().unwrap_or_else(|| DEFAULT_BEAT_TRACK_NAME.to_string());
                let item = MediaItem::new(SourceKind::Audio, content_id.clone(), spec.duration_s());
                let explanation = alloc::format!(
                    "generate a {} beat at {} bpm, {} beats ({} s) on new track {name:?}",
                    spec.preset.name(),
                    spec.tempo_bpm,
                    spec.beats,
                    render_value(spec.duration_s(), UnitKind::Raw)
                );
                self.push(Step::ImportTrack { index, name, item }, Step::RemoveTrack { index }, explanation)?;
                if !self.plan.beats.iter().any(|b| b.content_id == content_id) {
                    self.plan.beats.push(BeatAsset { content_id, spec });
                }
                Ok(())
            }
            Statement::Transport { action } => {
                self.plan.transport.push(*action);
                self.plan.explanation.push(alloc::format!("transport {}", action.as_str()));
                Ok(())
            }
            Statement::UiHint { hint, track } => {
                let t = self.track_index(track)?;
                let name = self.track(t).name.clone();
                self.plan.ui_hints.push(UiHint { hint: hint.as_str().to_string(), track: t });
                self.plan.explanation.push(alloc::format!("suggest {} for {name:?}", hint.as_str().replace('_', " ")));
                Ok(())
            }
        }
    }

    fn set_volume(&mut self, track: &TrackSel, change: &VolumeChange, clamp: bool) -> Res<()> {
        let t = self.track_index(track)?;
        let current = self.track(t).volume_db;
        let target = match change {
            VolumeChange::Amount(Amount::Set(q)) => q.value,
            VolumeChange::Amount(Amount::By(q)) => current + q.value,
            VolumeChange::Double => current + 20.0 * libm::log10(2.0),
            VolumeChange::Halve => current - 20.0 * libm::log10(2.0),
            VolumeChange::Blend(pct) => {
                if !(*pct > 0.0 && pct.is_finite()) {
                    return Err(out_of_range("blend percent", *pct, 0.0, f64::INFINITY));
                }
                current + 20.0 * libm::log10(pct / 100.0)
            }
        };
        let volume_db = bounded("volume_db", target, MIN_VOLUME_DB, MAX_VOLUME_DB, clamp)?;
        let name = self.track(t).name.clone();
        let mut explanation =
            alloc::format!("set {name:?} volume to {} (was {})", db_text(volume_db), db_text(current));
        if !matches!(change, VolumeChange::Amount(Amount::Set(_))) {
            explanation.push_str("; ");
            explanation.push_str(&describe_gain_change(volume_db - current));
        }
        self.push(
            Step::SetVolume { track: t, volume_db },
            Step::SetVolume { track: t, volume_db: current },
            explanation,
        )
    }

    fn set_fx_param(
        &mut self,
        track: &TrackSel,
        fx: &FxSel,
        param: &str,
        change: &ParamChange,
        clamp: bool,
    ) -> Res<()> {
        let t = self.track_index(track)?;
        let chain = &self.track(t).fx_chain;
        let position = match fx {
            FxSel::Index(i) if *i < chain.len() => *i,
            FxSel::Index(i) => return Err(StatementError::UnknownFx { track: t, fx: alloc::format!("#{i}") }),
            FxSel::Name(name) => chain
                .iter()
                .position(|f| f.fx_name.eq_ignore_ascii_case(name))
                .or_else(|| resolve_name(name, chain.iter().map(|f| f.fx_name.as_str())).ok())
                .ok_or_else(|| StatementError::UnknownFx { track: t, fx: alloc::format!("{name:?}") })?,
        };
        let instance = &chain[position];
        let fx_name = instance.fx_name.clone();
        let p = resolve_param(self.registry, &fx_name, instance.params.iter().map(|p| p.name.as_str()), param)
            .ok_or_else(|| StatementError::UnknownFxParam { fx: fx_name.clone(), param: param.to_string() })?;
        let fx_param = &instance.params[p];
        let spec: UnitSpec = fx_param.unit;
        let param_name = fx_param.name.clone();
        let current = fx_param.normalized_value;
        let what = alloc::format!("{fx_name} {param_name}");

        let normalized = match change {
            ParamChange::Normalized(n) => bounded(&what, *n, 0.0, spec.slider_max, clamp)?,
            ParamChange::Amount(amount) => {
                let (Amount::Set(q) | Amount::By(q)) = amount;
                check_unit(&what, q, &spec)?;
                let current_human = from_normalized(current, &spec).map_err(|e| unit_error(&what, e))?;
                let human = match amount {
                    Amount::Set(q) => q.value,
                    Amount::By(q) => current_human + q.value,
                };
                let converted = if clamp { to_normalized_clamped(human, &spec) } else { to_normalized(human, &spec) };
                converted.map_err(|e| unit_error(&what, e))?
            }
        };
        let before = from_normalized(current, &spec).map_or_else(|_| "?".into(), |h| spec.render(h));
        let after = from_normalized(normalized, &spec).map_or_else(|_| "?".into(), |h| spec.render(h));
        let name = self.track(t).name.clone();
        self.push(
            Step::SetFxParam { track: t, fx: position, param: p, normalized },
            Step::SetFxParam { track: t, fx: position, param: p, normalized: current },
            alloc::format!("set {fx_name} {param_name} on {name:?} to {after} (was {before})"),
        )
    }

    fn import(
        &mut self,
        kind: SourceKind,
        name: &str,
        source: &str,
        length: &Quantity,
        position: Option<&Quantity>,
    ) -> Res<()> {
        if let Some(exists) = self.source_exists {
            if !exists(source) {
                return Err(StatementError::UnknownSource(source.to_string()));
            }
        }
        if !(length.value > 0.0 && length.value.is_finite()) {
            return Err(out_of_range("length_ms", length.value, 0.0, f64::INFINITY));
        }
        let position_ms = position.map_or(0.0, |q| q.value);
        if !(position_ms >= 0.0 && position_ms.is_finite()) {
            return Err(out_of_range("position_ms", position_ms, 0.0, f64::INFINITY));
        }
        let mut item = MediaItem::new(kind, source, length.value / 1000.0);
        item.position_s = position_ms / 1000.0;
        let index = self.content.tracks.len();
        let what = match kind {
            SourceKind::Midi => "MIDI",
            SourceKind::Audio => "audio",
        };
        self.push(
            Step::ImportTrack { index, name: name.to_string(), item },
            Step::RemoveTrack { index },
            alloc::format!(
                "import {what} {source:?} ({}) on new track {name:?}",
                render_value(length.value, UnitKind::Milliseconds)
            ),
        )
    }
}

fn pan_value(q: &Quantity) -> f64 {
    match q.unit {
        Some(UnitKind::Percent) => q.value / 100.0,
        _ => q.value,
    }
}

fn pan_text(pan: f64) -> String {
    if pan == 0.0 {
        "center".into()
    } else {
        let pct = render_value(libm::fabs(pan) * 100.0, UnitKind::Percent);
        alloc::format!("{pct} {}", if pan < 0.0 { "left" } else { "right" })
    }
}

fn check_unit(what: &str, q: &Quantity, spec: &UnitSpec) -> Res<()> {
    match q.unit {
        None => Ok(()),
        Some(kind) if kind == spec.kind => Ok(()),
        Some(kind) => Err(StatementError::UnitMismatch {
            what: what.to_string(),
            expected: expected_unit(spec.kind),
            found: alloc::format!("'{}'", kind.symbol()),
        }),
    }
}

fn expected_unit(kind: UnitKind) -> String {
    match kind {
        UnitKind::Raw => "a plain number".into(),
        other => alloc::format!("'{}'", other.symbol()),
    }
}

fn unit_error(what: &str, e: UnitError) -> StatementError {
    match e {
        UnitError::OutOfRange { value, min, max } => out_of_range(what, value, min, max),
        UnitError::CurveDomain(v) => out_of_range(what, v, f64::MIN_POSITIVE, f64::INFINITY),
        other => StatementError::ValueOutOfRange {
            what: alloc::format!("{what} ({other})"),
            value: f64::NAN,
            min: 0.0,
            max: 0.0,
        },
    }
}

/// Exact name, then case-insensitive name, then a unique case-insensitive prefix.
fn resolve_name<'n>(name: &str, names: impl Iterator<Item = &'n str> + Clone) -> Res<usize> {
    let exact: Vec<usize> = names.clone().enumerate().filter(|(_, n)| *n == name).map(|(i, _)| i).collect();
    if let [one] = exact.as_slice() {
        return Ok(*one);
    }
    let folded: Vec<usize> =
        names.clone().enumerate().filter(|(_, n)| n.eq_ignore_ascii_case(name)).map(|(i, _)| i).collect();
    if let [one] = folded.as_slice() {
        return Ok(*one);
    }
    let lower = name.to_lowercase();
    let candidates: Vec<(usize, &str)> = if exact.len() > 1 || folded.len() > 1 {
        let pick = if exact.len() > 1 { &exact } else { &folded };
        names.enumerate().filter(|(i, _)| pick.contains(i)).collect()
    } else if lower.is_empty() {
        Vec::new()
    } else {
        names.enumerate().filter(|(_, n)| n.to_lowercase().starts_with(&lower)).collect()
    };
    match candidates.as_slice() {
        [] => Err(StatementError::UnknownTrack(alloc::format!("{name:?}"))),
        [(i, _)] => Ok(*i),
        many => Err(StatementError::AmbiguousTrackName {
            name: name.to_string(),
            candidates: many.iter().map(|(_, n)| n.to_string()).collect(),
        }),
    }
}

/// Param position by name, registry alias, or unique case-insensitive prefix.
fn resolve_param<'n>(
    registry: &UnitRegistry,
    fx_name: &str,
    names: impl Iterator<Item = &'n str> + Clone,
    wanted: &str,
) -> Option<usize> {
    if let Some(i) = names.clone().position(|n| n.eq_ignore_ascii_case(wanted)) {
        return Some(i);
    }
    if let Some(def) = registry.param(fx_name, wanted) {
        if let Some(i) = names.clone().position(|n| n == def.name) {
            return Some(i);
        }
    }
    let lower = wanted.to_lowercase();
    if lower.is_empty() {
        return None;
    }
    let hits: Vec<usize> =
        names.enumerate().filter(|(_, n)| n.to_lowercase().starts_with(&lower)).map(|(i, _)| i).collect();
    match hits.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}
