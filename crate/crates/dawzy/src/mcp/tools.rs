//! The tool registry. Arguments are deserialized into typed structs that
//! reject unknown fields, so anything the published schema would refuse
//! fails here as invalid params.

use std::sync::Arc;

use base64::Engine as _;
use dawzy_core::beat::parse_beat_prompt;
use dawzy_core::engine::TransportAction;
use dawzy_core::script::{self, quote, ExecuteError, ParseError, ResolvedPlan, ValidationError, Validator};
use dawzy_core::smf::read_smf;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::host::{Event, Host, Session};

pub struct ToolDescriptor {
    pub name: &'static str,
    pub description: &'static str,
    pub mutating: bool,
    pub input_schema: Value,
}

/// What a tool call produced. Errors are data here; only malformed
/// arguments become protocol errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolResult {
    pub structured: Value,
    pub is_error: bool,
}

impl ToolResult {
    pub fn ok(structured: Value) -> Self {
        ToolResult { structured, is_error: false }
    }

    pub fn error(code: &str, message: impl Into<String>, revision: u64, detail: Value) -> Self {
        let mut error = json!({ "code": code, "message": message.into() });
        if let (Value::Object(e), Value::Object(d)) = (&mut error, detail) {
            e.extend(d);
        }
        ToolResult { structured: json!({ "error": error, "revision": revision }), is_error: true }
    }

    pub fn error_code(&self) -> Option<&str> {
        self.is_error.then(|| self.structured["error"]["code"].as_str()).flatten()
    }

    pub fn revision_after(&self) -> Option<u64> {
        self.structured.get("revision_after").and_then(Value::as_u64)
    }

    /// The `tools/call` result object.
    pub fn to_wire(&self) -> Value {
        json!({
            "content": [{ "type": "text", "text": self.structured.to_string() }],
            "structuredContent": self.structured,
            "isError": self.is_error,
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid arguments for {tool}: {message}")]
pub struct InvalidParams {
    pub tool: String,
    pub message: String,
}

/// Anything that can run tools: the real registry, or a wrapper in tests.
pub trait ToolBackend: Send + Sync {
    fn call(&self, name: &str, args: Value) -> Result<ToolResult, InvalidParams>;
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Selector {
    Index(usize),
    Name(String),
}

impl Selector {
    fn track(&self) -> String {
        match self {
            Selector::Index(i) => format!("#{i}"),
            Selector::Name(n) => quote(n),
        }
    }

    fn fx(&self) -> String {
        match self {
            Selector::Index(i) => i.to_string(),
            Selector::Name(n) => quote(n),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoArgs {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFxParamArgs {
    track: Selector,
    fx: Selector,
    param: String,
    value: f64,
    #[serde(default)]
    unit: Option<String>,
    #[serde(default)]
    clamp: bool,
    expected_revision: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateBeatArgs {
    prompt: String,
    #[serde(default)]
    track_name: Option<String>,
    expected_revision: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplyScriptArgs {
    script_text: String,
    expected_revision: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportMidiArgs {
    midi_bytes: String,
    track_name: String,
    expected_revision: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransportArgs {
    action: TransportAction,
}

pub fn descriptors() -> Vec<ToolDescriptor> {
    let selector = |what: &str| {
        json!({ "description": format!("{what} index (0-based) or name"), "oneOf": [
            { "type": "integer", "minimum": 0 }, { "type": "string" }
        ]})
    };
    let revision = json!({ "type": "integer", "minimum": 0, "description": "revision the caller last read" });
    vec![
        ToolDescriptor {
            name: "get_project_state",
            description: "Enumerate tracks, items, FX with parameter values in human units, sends and transport.",
            mutating: false,
            input_schema: json!({ "type": "object", "properties": {}, "additionalProperties": false }),
        },
        ToolDescriptor {
            name: "set_fx_param",
            description: "Set one FX parameter from a value in human units (dB, ms, Hz, %, st, ratio) or 'norm' for a raw slider position.",
            mutating: true,
            input_schema: json!({
                "type": "object",
                "properties": {
                    "track": selector("track"),
                    "fx": selector("fx"),
                    "param": { "type": "string" },
                    "value": { "type": "number" },
                    "unit": { "type": "string" },
                    "clamp": { "type": "boolean", "default": false },
                    "expected_revision": revision,
                },
                "required": ["track", "fx", "param", "value", "expected_revision"],
                "additionalProperties": false,
            }),
        },
        ToolDescriptor {
            name: "generate_beat",
            description: "Render a drum loop from a text description and place it on a new track.",
            mutating: true,
            input_schema: json!({
                "type": "object",
                "properties": {
                    "prompt": { "type": "string", "minLength": 1 },
                    "track_name": { "type": "string" },
                    "expected_revision": revision,
                },
                "required": ["prompt", "expected_revision"],
                "additionalProperties": false,
            }),
        },
        ToolDescriptor {
            name: "apply_edit_script",
            description: "Parse, validate and atomically execute an edit script. One script is one undo point.",
            mutating: true,
            input_schema: json!({
                "type": "object",
                "properties": {
                    "script_text": { "type": "string" },
                    "expected_revision": revision,
                },
                "required": ["script_text", "expected_revision"],
                "additionalProperties": false,
            }),
        },
        ToolDescriptor {
            name: "import_midi",
            description: "Import a Standard MIDI File (base64) as a new track holding one MIDI item.",
            mutating: true,
            input_schema: json!({
                "type": "object",
                "properties": {
                    "midi_bytes": { "type": "string", "contentEncoding": "base64" },
                    "track_name": { "type": "string" },
                    "expected_revision": revision,
                },
                "required": ["midi_bytes", "track_name", "expected_revision"],
                "additionalProperties": false,
            }),
        },
        ToolDescriptor {
            name: "transport_control",
            description: "Play, stop or arm recording. Never changes the revision.",
            mutating: false,
            input_schema: json!({
                "type": "object",
                "properties": { "action": { "type": "string", "enum": ["play", "stop", "record"] } },
                "required": ["action"],
                "additionalProperties": false,
            }),
        },
    ]
}

pub struct Tools {
    host: Arc<Host>,
}

impl ToolBackend for Tools {
    fn call(&self, name: &str, args: Value) -> Result<ToolResult, InvalidParams> {
        match name {
            "get_project_state" => {
                decode::<NoArgs>(name, args)?;
                Ok(self.get_project_state())
            }
            "set_fx_param" => Ok(self.set_fx_param(decode(name, args)?)),
            "generate_beat" => Ok(self.generate_beat(decode(name, args)?)),
            "apply_edit_script" => Ok(self.apply_edit_script(decode(name, args)?)),
            "import_midi" => Ok(self.import_midi(decode(name, args)?)),
            "transport_control" => Ok(self.transport_control(decode(name, args)?)),
            _ => {
                Ok(ToolResult::error("unknown_tool", format!("unknown tool {name:?}"), self.host.revision(), json!({})))
            }
        }
    }
}

fn decode<T: DeserializeOwned>(tool: &str, args: Value) -> Result<T, InvalidParams> {
    serde_json::from_value(args).map_err(|e| InvalidParams { tool: tool.into(), message: e.to_string() })
}

/// Formats a number so the script lexer reads back the same value.
fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

impl Tools {
    pub fn new(host: Arc<Host>) -> Self {
        Tools { host }
    }

    pub fn host(&self) -> &Arc<Host> {
        &self.host
    }

    fn get_project_state(&self) -> ToolResult {
        ToolResult::ok(serde_json::to_value(self.host.state()).unwrap_or(Value::Null))
    }

    fn set_fx_param(&self, a: SetFxParamArgs) -> ToolResult {
        let value = match a.unit.as_deref().map(str::trim) {
            Some("norm") => format!("norm:{}", number(a.value)),
            Some(unit) => format!("{}{unit}", number(a.value)),
            None => number(a.value),
        };
        let text = format!(
            "set_fx_param {} fx:{} param:{} {value}{}",
            a.track.track(),
            a.fx.fx(),
            quote(&a.param),
            if a.clamp { " clamp" } else { "" }
        );
        self.run_script(&text, a.expected_revision, |s, plan| {
            let Some(dawzy_core::engine::Step::SetFxParam { track, fx, param, normalized }) = plan.steps.first() else {
                return json!({});
            };
            let doc = s.engine.state_summary();
            let p = &doc.tracks[*track].fx[*fx].params[*param];
            json!({
                "track": track,
                "fx": fx,
                "fx_name": doc.tracks[*track].fx[*fx].fx_name,
                "param": p.name,
                "normalized": normalized,
                "human": p.human,
                "display": p.display,
            })
        })
    }

    /// Staleness wins over argument errors; the locked path checks again.
    fn early_stale(&self, expected: u64) -> Option<ToolResult> {
        stale(&self.host.lock(), expected)
    }

    fn generate_beat(&self, a: GenerateBeatArgs) -> ToolResult {
        if let Some(stale) = self.early_stale(a.expected_revision) {
            return stale;
        }
        if a.prompt.trim().is_empty() {
            return ToolResult::error("invalid_prompt", "prompt is empty", self.host.revision(), json!({}));
        }
        let mut text = format!("generate_beat_track {}", quote(&a.prompt));
        if let Some(name) = &a.track_name {
            text.push_str(&format!(" name:{}", quote(name)));
        }
        let spec = parse_beat_prompt(&a.prompt);
        self.run_script(&text, a.expected_revision, |s, plan| {
            let track = s.engine.tracks().len() - 1;
            json!({
                "track": track,
                "track_name": s.engine.tracks()[track].name,
                "content_id": plan.beats.first().map(|b| b.content_id.clone()),
                "duration_s": spec.duration_s(),
                "sample_count": spec.sample_count(),
                "tempo_bpm": spec.tempo_bpm,
                "beats": spec.beats,
                "preset": spec.preset.name(),
            })
        })
    }

    fn apply_edit_script(&self, a: ApplyScriptArgs) -> ToolResult {
        self.run_script(&a.script_text, a.expected_revision, |_, _| json!({}))
    }

    fn import_midi(&self, a: ImportMidiArgs) -> ToolResult {
        if let Some(stale) = self.early_stale(a.expected_revision) {
            return stale;
        }
        let revision = self.host.revision();
        let bytes = match base64::engine::general_purpose::STANDARD.decode(a.midi_bytes.trim()) {
            Ok(b) => b,
            Err(e) => return ToolResult::error("invalid_base64", e.to_string(), revision, json!({})),
        };
        let summary = match read_smf(&bytes) {
            Ok(s) => s,
            Err(e) => return ToolResult::error("malformed_midi", e.to_string(), revision, json!({})),
        };
        if summary.length_s <= 0.0 {
            return ToolResult::error("malformed_midi", "file contains no timed events", revision, json!({}));
        }
        let notes = summary.notes.len();
        let length_s = summary.length_s;
        let mut session = self.host.lock();
        if let Some(stale) = stale(&session, a.expected_revision) {
            return stale;
        }
        let id = session.store.put("midi", bytes);
        let text = format!("import_midi {} src:{} len:{}s", quote(&a.track_name), quote(&id), number(length_s));
        self.run_locked(&mut session, &text, a.expected_revision, |s, _| {
            let track = s.engine.tracks().len() - 1;
            json!({ "track": track, "content_id": id, "length_s": length_s, "notes": notes })
        })
    }

    fn transport_control(&self, a: TransportArgs) -> ToolResult {
        let mut session = self.host.lock();
        let transport = session.engine.transport_control(a.action);
        let revision = session.engine.revision();
        self.host.changed(&session);
        ToolResult::ok(json!({ "action": a.action.as_str(), "transport": transport, "revision": revision }))
    }

    fn run_script(
        &self,
        text: &str,
        expected_revision: u64,
        extra: impl FnOnce(&Session, &ResolvedPlan) -> Value,
    ) -> ToolResult {
        let mut session = self.host.lock();
        if let Some(stale) = stale(&session, expected_revision) {
            return stale;
        }
        self.run_locked(&mut session, text, expected_revision, extra)
    }

    fn run_locked(
        &self,
        session: &mut Session,
        text: &str,
        expected_revision: u64,
        extra: impl FnOnce(&Session, &ResolvedPlan) -> Value,
    ) -> ToolResult {
        let revision = session.engine.revision();
        debug_assert_eq!(revision, expected_revision);
        let parsed = match script::parse(text) {
            Ok(s) => s,
            Err(e) => return parse_error(&e, revision),
        };
        let plan = {
            let store = &session.store;
            let exists = |id: &str| store.contains(id);
            let validator = Validator::new(session.engine.registry()).with_source_check(&exists);
            match validator.validate_content(&parsed, session.engine.content(), revision) {
                Ok(p) => p,
                Err(e) => return validation_error(&e, revision),
            }
        };
        session.store.materialize(&plan.beats);
        let report = match script::execute(&mut session.engine, &plan) {
            Ok(r) => r,
            Err(e) => return execute_error(&e, session.engine.revision()),
        };
        if plan.is_edit() || !plan.transport.is_empty() {
            self.host.changed(session);
        }
        for hint in &report.ui_hints {
            self.host.publish(Event::UiHint { action: hint.hint.clone(), track: hint.track });
        }
        let mut out = json!({
            "revision_before": revision,
            "revision_after": report.new_revision,
            "label": plan.label,
            "script": plan.script,
            "applied_steps": report.applied_steps,
            "explanation": report.explanation,
            "ui_hints": report.ui_hints,
            "transport": report.transport,
        });
        if let (Value::Object(o), Value::Object(x)) = (&mut out, extra(session, &plan)) {
            o.extend(x);
        }
        ToolResult::ok(out)
    }
}

fn stale(session: &Session, expected: u64) -> Option<ToolResult> {
    let actual = session.engine.revision();
    (expected != actual).then(|| {
        ToolResult::error(
            "stale_revision",
            format!("expected revision {expected} but the session is at {actual}; re-read the state"),
            actual,
            json!({ "expected": expected, "actual": actual }),
        )
    })
}

fn parse_error(e: &ParseError, revision: u64) -> ToolResult {
    ToolResult::error(
        "parse_error",
        e.to_string(),
        revision,
        json!({ "line": e.line, "col": e.col, "expected": e.expected, "found": e.found }),
    )
}

fn validation_error(e: &ValidationError, revision: u64) -> ToolResult {
    let detail = match e {
        ValidationError::Statement { index, line, .. } => {
            json!({ "statement": index, "line": line })
        }
        _ => json!({}),
    };
    ToolResult::error(e.code(), e.to_string(), revision, detail)
}

fn execute_error(e: &ExecuteError, revision: u64) -> ToolResult {
    let detail = match e {
        ExecuteError::StepFailed { index, .. } => json!({ "step": index }),
        ExecuteError::StaleRevision { expected, actual } => {
            json!({ "expected": expected, "actual": actual })
        }
        ExecuteError::Engine(_) => json!({}),
    };
    ToolResult::error(e.code(), e.to_string(), revision, detail)
}
