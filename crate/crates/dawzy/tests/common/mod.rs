#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use dawzy::gateway::RulesPlanner;
use dawzy::host::Host;
use dawzy::mcp::{Server, ToolBackend, Tools};
use dawzy_core::engine::{Engine, ProjectStateDoc};
use dawzy_core::fuzz::{random_engine, random_script};
use dawzy_core::hum::AudioBuffer;
use dawzy_core::script::execute;
use dawzy_core::wav::encode_pcm16;
use rand::Rng;
use serde_json::{json, Value};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn blessing() -> bool {
    std::env::var_os("DAWZY_BLESS").is_some()
}

pub fn sine(freq_hz: f64, seconds: f64, sample_rate: u32) -> AudioBuffer {
    let n = (seconds * sample_rate as f64).round() as usize;
    let samples =
        (0..n).map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / sample_rate as f64).sin()).collect();
    AudioBuffer { samples, sample_rate_hz: sample_rate }
}

pub fn sine_wav(freq_hz: f64, seconds: f64) -> Vec<u8> {
    encode_pcm16(&sine(freq_hz, seconds, 16_000))
}

/// Replaces stored-content ids (`midi-…`, `beat-…` plus 16 hex digits).
pub fn mask_content_ids(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        let prefix = ["midi-", "beat-"].into_iter().find(|p| rest.starts_with(p));
        if let Some(p) = prefix {
            let hex = &bytes[i + p.len()..];
            if hex.len() >= 16 && hex[..16].iter().all(|b| b.is_ascii_hexdigit()) {
                out.push_str("<content-id>");
                i += p.len() + 16;
                continue;
            }
        }
        let ch = rest.chars().next().unwrap();
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

/// A golden transcript: `-> request` lines, each followed by the expected
/// `<- response` line unless the request gets no reply. `#` lines are notes.
pub struct Transcript {
    pub path: PathBuf,
    pub lines: Vec<String>,
}

pub fn transcripts() -> Vec<Transcript> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(golden_dir())
        .expect("golden dir")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "rpc"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let lines = std::fs::read_to_string(&path).unwrap().lines().map(str::to_owned).collect();
            Transcript { path, lines }
        })
        .collect()
}

fn fresh_server() -> Server {
    Server::new(Arc::new(Tools::new(Host::new(Engine::new()))))
}

/// Replays one transcript against a fresh session. Returns the number of
/// exchanges, or the first mismatch. With `DAWZY_BLESS` set the file is
/// rewritten from the actual replies instead.
pub fn replay(t: &Transcript) -> Result<usize, String> {
    let server = fresh_server();
    let mut exchanges = 0;
    let mut blessed = Vec::new();
    let mut i = 0;
    while i < t.lines.len() {
        let line = &t.lines[i];
        i += 1;
        let Some(request) = line.strip_prefix("-> ") else {
            if !line.starts_with("<- ") {
                blessed.push(line.clone());
            }
            continue;
        };
        blessed.push(line.clone());
        exchanges += 1;
        let actual = server.handle_text(request).map(|r| mask_content_ids(&r));
        let expected = t.lines.get(i).and_then(|l| l.strip_prefix("<- ")).map(str::to_owned);
        if expected.is_some() {
            i += 1;
        }
        if let Some(a) = &actual {
            blessed.push(format!("<- {a}"));
        }
        if !blessing() && actual != expected {
            return Err(format!(
                "{} exchange {exchanges}\nrequest:  {request}\nexpected: {}\nactual:   {}",
                t.path.display(),
                expected.as_deref().unwrap_or("(no reply)"),
                actual.as_deref().unwrap_or("(no reply)"),
            ));
        }
    }
    if blessing() {
        std::fs::write(&t.path, blessed.join("\n") + "\n").unwrap();
    }
    Ok(exchanges)
}

pub fn call(tools: &dyn ToolBackend, name: &str, args: Value) -> dawzy::mcp::ToolResult {
    tools.call(name, args).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const ONE_NOTE_SMF_B64: &str = "TVRoZAAAAAYAAAABAeBNVHJrAAAAFAD/UQMHoSAAkEVgh0CARQAA/y8A";

/// Arguments for a mutating tool call grounded on `revision`.
pub fn mutating_call<R: Rng>(rng: &mut R, engine: &Engine, revision: u64) -> (&'static str, Value) {
    match rng.random_range(0..4) {
        0 => {
            let (script, _) = random_script(rng, engine, 4);
            ("apply_edit_script", json!({ "script_text": script.pretty(), "expected_revision": revision }))
        }
        1 => (
            "set_fx_param",
            json!({ "track": 0, "fx": 0, "param": "Attack", "value": 10, "unit": "ms", "expected_revision": revision }),
        ),
        2 => ("generate_beat", json!({ "prompt": "90 bpm boom bap, 4 beats", "expected_revision": revision })),
        _ => (
            "import_midi",
            json!({ "midi_bytes": ONE_NOTE_SMF_B64, "track_name": "Hum", "expected_revision": revision }),
        ),
    }
}

/// One grounding scenario: read the state, let a foreign writer commit,
/// then call a mutating tool with the revision that was read. `Ok` when the
/// call is refused as stale and nothing changed.
pub fn grounding_scenario<R: Rng>(rng: &mut R) -> Result<(), String> {
    let engine = random_engine(rng);
    let host = Host::new(engine.clone());
    let tools = Tools::new(Arc::clone(&host));
    let read: ProjectStateDoc =
        serde_json::from_value(call(&tools, "get_project_state", json!({})).structured).unwrap();
    // a foreign writer commits behind the reader's back
    {
        let mut session = host.lock();
        let plan = loop {
            let (_, plan) = random_script(rng, &engine, 3);
            if plan.is_edit() {
                break plan;
            }
        };
        execute(&mut session.engine, &plan).map_err(|e| format!("foreign write failed: {e}"))?;
        host.changed(&session);
    }
    let before = host.state();
    let store_before = host.lock().store.len();
    let (name, args) = mutating_call(rng, &engine, read.revision);
    let r = call(&tools, name, args);
    if r.error_code() != Some("stale_revision") {
        return Err(format!("{name} returned {:?}", r.structured));
    }
    if r.structured["revision"] != json!(before.revision) {
        return Err(format!("{name} did not report the current revision"));
    }
    if host.state() != before || host.lock().store.len() != store_before {
        return Err(format!("{name} changed state despite stale revision"));
    }
    Ok(())
}

/// A server on an ephemeral port with the rules planner; returns its base URL.
pub fn spawn_http(host: Arc<Host>) -> String {
    let state = dawzy::app_state(host, Box::new(RulesPlanner), None);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, dawzy::http::router(state)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

pub fn post_json(agent: &ureq::Agent, url: &str, body: Value) -> (u16, Value) {
    let mut r = agent.post(url).send_json(&body).unwrap();
    (r.status().as_u16(), r.body_mut().read_json().unwrap())
}

pub fn post_empty(agent: &ureq::Agent, url: &str) -> (u16, Value) {
    let mut r = agent.post(url).send_empty().unwrap();
    (r.status().as_u16(), r.body_mut().read_json().unwrap())
}

pub fn get_state(agent: &ureq::Agent, base: &str) -> ProjectStateDoc {
    agent.get(format!("{base}/state")).call().unwrap().body_mut().read_json().unwrap()
}

pub const E2E_GOLDEN: &str = "e2e_state.json";

/// chat edit, undo, hum import, beat request; every step checked along
/// the way. Returns the final state.
pub fn e2e_session() -> Result<ProjectStateDoc, String> {
    let host = Host::new(Engine::new());
    let base = spawn_http(host);
    let agent = agent();
    let chat = |text: &str| post_json(&agent, &format!("{base}/chat"), json!({ "session_id": "e2e", "text": text }));
    let expect = |ok: bool, what: &str| if ok { Ok(()) } else { Err(what.to_owned()) };

    let (status, r) = chat("add a track called Lead");
    expect(status == 200 && r["revision_after"] == 1, &format!("add track: {status} {r}"))?;
    let (status, r) = chat("set the Lead volume to -6 dB");
    expect(status == 200 && r["revision_after"] == 2, &format!("set volume: {status} {r}"))?;
    expect(get_state(&agent, &base).tracks[0].volume_db == -6.0, "volume not applied")?;

    let (status, r) = post_empty(&agent, &format!("{base}/undo"));
    expect(status == 200 && r["revision"] == 3, &format!("undo: {status} {r}"))?;
    expect(get_state(&agent, &base).tracks[0].volume_db == 0.0, "undo did not restore the volume")?;

    let mut resp = agent
        .post(format!("{base}/hum?session_id=e2e"))
        .header("Content-Type", "audio/wav")
        .send(&sine_wav(440.0, 1.0)[..])
        .map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let r: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
    expect(status == 200 && r["import"]["notes"] == 1, &format!("hum: {status} {r}"))?;

    let (status, r) = chat("120 bpm four on the floor, 4 beats");
    expect(status == 200 && r["revision_after"] == 5, &format!("beat: {status} {r}"))?;

    Ok(get_state(&agent, &base))
}

pub fn e2e_golden() -> ProjectStateDoc {
    let text = std::fs::read_to_string(golden_dir().join(E2E_GOLDEN)).expect("e2e golden state");
    ProjectStateDoc::from_json(&text).unwrap()
}
