//! Binds utterances to tools: read fresh state, plan, apply, explain.
//!
//! Reads and writes go through a [`ToolBackend`], the same surface an
//! external agent sees over JSON-RPC. Edits always carry the revision the
//! plan was grounded on; a stale result triggers one refresh and replan.

pub mod planner;
pub mod remote;
pub mod transcript;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use base64::Engine as _;
use dawzy_core::engine::ProjectStateDoc;
use dawzy_core::hum::{hum_to_midi, HumError};
use dawzy_core::planner::OutcomeKind;
use dawzy_core::script::UiHint;
use dawzy_core::units::UnitRegistry;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::host::{Event, Host};
use crate::mcp::{ToolBackend, ToolResult};
pub use planner::{PlanError, Planner, RulesPlanner};
use transcript::{Modality, TranscriptLog, TranscriptRecord};

pub const DEFAULT_HUM_TRACK_NAME: &str = "Hum";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldChange {
    pub path: String,
    pub before: Value,
    pub after: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub kind: OutcomeKind,
    pub explanation: String,
    /// What the planner said it would do.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
    pub revision_before: u64,
    pub revision_after: u64,
    pub state_diff: Vec<FieldChange>,
    pub ui_hints: Vec<UiHint>,
    /// Tool output for hum imports: track index, content id, note count.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub import: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ChatError>,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid audio: {0}")]
    InvalidAudio(HumError),
    #[error("tool call failed: {0}")]
    Tool(String),
}

pub struct Gateway {
    tools: Arc<dyn ToolBackend>,
    host: Arc<Host>,
    planner: Box<dyn Planner>,
    registry: UnitRegistry,
    transcripts: Option<TranscriptLog>,
    sessions: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn new(tools: Arc<dyn ToolBackend>, host: Arc<Host>, planner: Box<dyn Planner>) -> Self {
        let registry = host.lock().engine.registry().clone();
        Gateway { tools, host, planner, registry, transcripts: None, sessions: Mutex::new(HashMap::new()) }
    }

    pub fn with_transcripts(mut self, log: TranscriptLog) -> Self {
        self.transcripts = Some(log);
        self
    }

    pub fn planner_name(&self) -> &str {
        self.planner.name()
    }

    fn session_lock(&self, session_id: &str) -> Arc<Mutex<()>> {
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        Arc::clone(sessions.entry(session_id.to_owned()).or_default())
    }

    fn call(&self, name: &str, args: Value) -> Result<ToolResult, GatewayError> {
        self.tools.call(name, args).map_err(|e| GatewayError::Tool(e.to_string()))
    }

    fn read_state(&self) -> Result<ProjectStateDoc, GatewayError> {
        let r = self.call("get_project_state", json!({}))?;
        serde_json::from_value(r.structured).map_err(|e| GatewayError::Tool(e.to_string()))
    }

    /// Handles one text utterance. Failures that the user should see are
    /// reported inside the response; `Err` means the tool surface itself broke.
    pub fn handle_text(&self, session_id: &str, text: &str) -> Result<ChatResponse, GatewayError> {
        let lock = self.session_lock(session_id);
        let _serial = lock.lock().unwrap_or_else(|p| p.into_inner());

        let mut doc = self.read_state()?;
        let first_revision = doc.revision;
        let mut response = None;
        for attempt in 0..2 {
            let outcome = match self.planner.plan(text, &doc, &self.registry) {
                Ok(o) => o,
                Err(e) => {
                    let detail = match &e {
                        PlanError::ScriptRejected { errors } => json!({ "errors": errors }),
                        PlanError::Unavailable(_) => Value::Null,
                    };
                    response = Some(self.respond(session_id, OutcomeKind::Answer, &doc, &doc).with_error(
                        e.code(),
                        e.to_string(),
                        detail,
                    ));
                    break;
                }
            };
            let mut r = self.respond(session_id, outcome.kind, &doc, &doc);
            r.summary = outcome.explanation.clone();
            let Some(script) = outcome.script_text.clone().filter(|_| outcome.kind != OutcomeKind::Answer) else {
                r.explanation = outcome.explanation;
                response = Some(r);
                break;
            };
            r.script = Some(script.clone());
            let result =
                self.call("apply_edit_script", json!({ "script_text": script, "expected_revision": doc.revision }))?;
            if result.error_code() == Some("stale_revision") && attempt == 0 {
                doc = self.read_state()?;
                continue;
            }
            if result.is_error {
                let e = &result.structured["error"];
                let code = e["code"].as_str().unwrap_or("engine_error");
                let message = e["message"].as_str().unwrap_or_default();
                r.explanation = format!("The edit was not applied: {message}");
                response = Some(r.with_error(code, message, e.clone()));
                break;
            }
            let lines: Vec<&str> =
                result.structured["explanation"].as_array().into_iter().flatten().filter_map(Value::as_str).collect();
            r.explanation = if lines.is_empty() { outcome.explanation } else { lines.join("\n") };
            r.ui_hints = serde_json::from_value(result.structured["ui_hints"].clone()).unwrap_or_default();
            let after = self.read_state()?;
            r.revision_after = after.revision;
            r.state_diff = state_diff(&doc, &after);
            response = Some(r);
            break;
        }
        // the loop always sets a response: the second attempt never continues
        let mut response = response.unwrap_or_else(|| self.respond(session_id, OutcomeKind::Answer, &doc, &doc));
        response.revision_before = first_revision;
        self.record(Modality::Text, Some(text), None, &response);
        Ok(response)
    }

    /// Transcribes a hummed WAV and imports it as a MIDI track.
    pub fn handle_hum(
        &self,
        session_id: &str,
        wav: &[u8],
        track_name: Option<&str>,
    ) -> Result<ChatResponse, GatewayError> {
        let lock = self.session_lock(session_id);
        let _serial = lock.lock().unwrap_or_else(|p| p.into_inner());

        let midi = hum_to_midi(wav).map_err(GatewayError::InvalidAudio)?;
        let name = track_name.unwrap_or(DEFAULT_HUM_TRACK_NAME);
        let mut doc = self.read_state()?;
        let first_revision = doc.revision;
        let encoded = base64::engine::general_purpose::STANDARD.encode(&midi);
        let import = |revision: u64| {
            self.call(
                "import_midi",
                json!({ "midi_bytes": encoded, "track_name": name, "expected_revision": revision }),
            )
        };
        let mut result = import(doc.revision)?;
        if result.error_code() == Some("stale_revision") {
            doc = self.read_state()?;
            result = import(doc.revision)?;
        }
        let mut r = self.respond(session_id, OutcomeKind::Edit, &doc, &doc);
        r.revision_before = first_revision;
        if result.is_error {
            let e = &result.structured["error"];
            let code = e["code"].as_str().unwrap_or("engine_error");
            let message = e["message"].as_str().unwrap_or_default();
            r.explanation = format!("The recording could not be imported: {message}");
            r = r.with_error(code, message, e.clone());
        } else {
            let s = &result.structured;
            r.explanation = format!(
                "Transcribed {} note(s) spanning {:.2} s into a new MIDI track {:?} at index {}.",
                s["notes"],
                s["length_s"].as_f64().unwrap_or_default(),
                name,
                s["track"]
            );
            r.import = json!({
                "track": s["track"], "content_id": s["content_id"], "length_s": s["length_s"], "notes": s["notes"],
            });
            let after = self.read_state()?;
            r.revision_after = after.revision;
            r.state_diff = state_diff(&doc, &after);
        }
        self.record(Modality::Hum, None, Some(wav.len()), &r);
        Ok(r)
    }

    fn respond(
        &self,
        session_id: &str,
        kind: OutcomeKind,
        before: &ProjectStateDoc,
        after: &ProjectStateDoc,
    ) -> ChatResponse {
        ChatResponse {
            session_id: session_id.to_owned(),
            kind,
            explanation: String::new(),
            summary: String::new(),
            script: None,
            revision_before: before.revision,
            revision_after: after.revision,
            state_diff: Vec::new(),
            ui_hints: Vec::new(),
            import: Value::Null,
            error: None,
        }
    }

    fn record(&self, modality: Modality, text: Option<&str>, audio_bytes: Option<usize>, r: &ChatResponse) {
        self.host.publish(Event::Chat { session_id: r.session_id.clone(), explanation: r.explanation.clone() });
        if let Some(log) = &self.transcripts {
            let record = TranscriptRecord::new(modality, text, audio_bytes, r);
            if let Err(e) = log.append(&record) {
                tracing::warn!("transcript write failed: {e}");
            }
        }
    }
}

impl ChatResponse {
    fn with_error(mut self, code: &str, message: impl Into<String>, detail: Value) -> Self {
        let message = message.into();
        if self.explanation.is_empty() {
            self.explanation = message.clone();
        }
        self.error = Some(ChatError { code: code.to_owned(), message, detail });
        self
    }
}

/// Leaf values of a state doc keyed by path, without the revision and
/// without static unit descriptions.
pub fn flatten(doc: &ProjectStateDoc) -> BTreeMap<String, Value> {
    fn walk(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    if k == "unit" || (prefix.is_empty() && k == "revision") {
                        continue;
                    }
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, v, out);
                }
            }
            Value::Array(items) => {
                for (i, v) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), v, out);
                }
            }
            leaf => {
                out.insert(prefix.to_owned(), leaf.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk("", &serde_json::to_value(doc).unwrap_or(Value::Null), &mut out);
    out
}

/// Every leaf that differs between two docs; absent leaves read as null.
pub fn state_diff(before: &ProjectStateDoc, after: &ProjectStateDoc) -> Vec<FieldChange> {
    let (a, b) = (flatten(before), flatten(after));
    let mut paths: Vec<&String> = a.keys().chain(b.keys()).collect();
    paths.sort();
    paths.dedup();
    paths
        .into_iter()
        .filter_map(|p| {
            let before = a.get(p).cloned().unwrap_or(Value::Null);
            let after = b.get(p).cloned().unwrap_or(Value::Null);
            (before != after).then(|| FieldChange { path: p.clone(), before, after })
        })
        .collect()
}
