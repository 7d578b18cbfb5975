mod common;

use std::io::{BufRead, BufReader, Cursor, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use dawzy::host::Host;
use dawzy::mcp::protocol::{INVALID_PARAMS, INVALID_REQUEST, METHOD_NOT_FOUND, PARSE_ERROR};
use dawzy::mcp::transport::{read_frame, serve_framed, serve_lines, serve_tcp, write_frame};
use dawzy::mcp::{descriptors, Server, ToolBackend, Tools};
use dawzy_core::engine::Engine;
use dawzy_core::fuzz::random_engine;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::{call, grounding_scenario, replay, transcripts, ONE_NOTE_SMF_B64};

fn server() -> (Arc<Host>, Server) {
    let host = Host::new(Engine::new());
    (Arc::clone(&host), Server::new(Arc::new(Tools::new(host))))
}

fn rpc(server: &Server, request: Value) -> Value {
    serde_json::from_str(&server.handle_text(&request.to_string()).expect("reply")).unwrap()
}

fn tool(server: &Server, name: &str, args: Value) -> Value {
    rpc(
        server,
        json!({ "jsonrpc": "2.0", "id": 1, "method": "tools/call", "params": { "name": name, "arguments": args } }),
    )
}

#[test]
fn golden_transcripts() {
    let all = transcripts();
    assert!(all.len() >= 20, "only {} golden transcripts", all.len());
    let mut exchanges = 0;
    for t in &all {
        exchanges += replay(t).unwrap_or_else(|e| panic!("{e}"));
    }
    assert!(exchanges >= 60);
}

#[test]
fn malformed_input_codes() {
    let (_, s) = server();
    let code = |text: &str| -> i64 {
        let v: Value = serde_json::from_str(&s.handle_text(text).unwrap()).unwrap();
        v["error"]["code"].as_i64().unwrap()
    };
    assert_eq!(code("{"), PARSE_ERROR);
    assert_eq!(code(""), PARSE_ERROR);
    assert_eq!(code("[]"), INVALID_REQUEST);
    assert_eq!(code(r#"{"id":1,"method":"ping"}"#), INVALID_REQUEST);
    assert_eq!(code(r#"{"jsonrpc":"2.0","id":[1],"method":"ping"}"#), INVALID_REQUEST);
    assert_eq!(code(r#"{"jsonrpc":"2.0","id":1,"method":"frobnicate"}"#), METHOD_NOT_FOUND);
    assert_eq!(code(r#"{"jsonrpc":"2.0","id":1,"method":"tools/call","params":{}}"#), INVALID_PARAMS);
    assert_eq!(
        code(r#"{"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"transport_control","arguments":{}}}"#),
        INVALID_PARAMS
    );
    // a parse error carries a null id
    let v: Value = serde_json::from_str(&s.handle_text("{oops").unwrap()).unwrap();
    assert_eq!(v["id"], Value::Null);
}

#[test]
fn notifications_get_no_reply() {
    let (_, s) = server();
    assert_eq!(s.handle_text(r#"{"jsonrpc":"2.0","method":"notifications/initialized"}"#), None);
    assert_eq!(s.handle_text(r#"{"jsonrpc":"2.0","method":"frobnicate"}"#), None);
}

/// An arguments object each tool accepts on an empty session or a session
/// with one compressor track.
fn example_args(name: &str) -> Value {
    match name {
        "get_project_state" => json!({}),
        "set_fx_param" => {
            json!({ "track": 0, "fx": 0, "param": "Attack", "value": 10, "unit": "ms", "clamp": false, "expected_revision": 1 })
        }
        "generate_beat" => {
            json!({ "prompt": "house", "track_name": "Beat", "expected_revision": 1 })
        }
        "apply_edit_script" => json!({ "script_text": "set_mute #0 on", "expected_revision": 1 }),
        "import_midi" => {
            json!({ "midi_bytes": ONE_NOTE_SMF_B64, "track_name": "Hum", "expected_revision": 1 })
        }
        "transport_control" => json!({ "action": "play" }),
        other => panic!("no example for {other}"),
    }
}

#[test]
fn schemas_agree_with_argument_decoding() {
    let list = descriptors();
    assert_eq!(list.len(), 6);
    let mut names: Vec<&str> = list.iter().map(|d| d.name).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 6);
    for d in &list {
        let schema = &d.input_schema;
        assert_eq!(schema["type"], "object");
        assert_eq!(schema["additionalProperties"], false);
        let props = schema["properties"].as_object().unwrap();
        let required: Vec<&str> =
            schema["required"].as_array().into_iter().flatten().map(|v| v.as_str().unwrap()).collect();
        assert!(required.iter().all(|r| props.contains_key(*r)), "{}", d.name);
        assert_eq!(d.mutating, required.contains(&"expected_revision"), "{}", d.name);

        let fresh = || {
            let host = Host::new(Engine::new());
            let tools = Tools::new(Arc::clone(&host));
            call(
                &tools,
                "apply_edit_script",
                json!({ "script_text": "add_track \"A\"\nadd_fx #0 \"ReaComp\"", "expected_revision": 0 }),
            );
            tools
        };
        let example = example_args(d.name);
        assert!(example.as_object().unwrap().keys().all(|k| props.contains_key(k)), "{}", d.name);
        let r = fresh().call(d.name, example.clone()).unwrap();
        assert!(!r.is_error, "{}: {:?}", d.name, r.structured);
        for key in &required {
            let mut missing = example.clone();
            missing.as_object_mut().unwrap().remove(*key);
            assert!(fresh().call(d.name, missing).is_err(), "{} accepted a call without {key}", d.name);
        }
        let mut extra = example.clone();
        extra.as_object_mut().unwrap().insert("surplus".into(), json!(1));
        assert!(fresh().call(d.name, extra).is_err(), "{} accepted an unknown field", d.name);
    }
}

#[test]
fn spec_examples() {
    let (host, s) = server();
    let r = tool(&s, "get_project_state", json!({}));
    assert_eq!(r["result"]["structuredContent"]["revision"], 0);

    let r = tool(
        &s,
        "apply_edit_script",
        json!({ "script_text": "add_track \"Drums\"\nadd_fx #0 \"ReaComp\"", "expected_revision": 0 }),
    );
    assert_eq!(r["result"]["structuredContent"]["revision_after"], 1);
    tool(&s, "apply_edit_script", json!({ "script_text": "set_mute #0 off", "expected_revision": 1 }));
    let r = tool(
        &s,
        "set_fx_param",
        json!({ "track": 0, "fx": "ReaComp", "param": "Attack", "value": 10, "unit": "ms", "expected_revision": 2 }),
    );
    let sc = &r["result"]["structuredContent"];
    assert_eq!((sc["normalized"].as_f64(), sc["revision_after"].as_u64()), (Some(0.02), Some(3)));
    assert_eq!(host.state().tracks[0].fx[0].params[2].normalized, 0.02);

    let before = host.state();
    let r = tool(
        &s,
        "set_fx_param",
        json!({ "track": 0, "fx": 0, "param": "Attack", "value": 10, "unit": "ms", "expected_revision": 1 }),
    );
    assert_eq!(r["result"]["isError"], true);
    assert_eq!(r["result"]["structuredContent"]["error"]["code"], "stale_revision");
    assert_eq!(r["result"]["structuredContent"]["revision"], 3);
    assert_eq!(host.state(), before);

    let r = tool(&s, "transport_control", json!({ "action": "record" }));
    assert_eq!(r["result"]["structuredContent"]["transport"]["recording"], true);
    assert_eq!(host.revision(), 3);
}

#[test]
fn generate_beat_on_empty_project() {
    let (host, s) = server();
    let r =
        tool(&s, "generate_beat", json!({ "prompt": "120 bpm four on the floor, 4 beats", "expected_revision": 0 }));
    let sc = &r["result"]["structuredContent"];
    assert_eq!(sc["track"], 0);
    assert_eq!(sc["duration_s"], 2.0);
    assert_eq!(sc["sample_count"], 88200);
    let id = sc["content_id"].as_str().unwrap().to_owned();
    let doc = host.state();
    assert_eq!(doc.tracks[0].items[0].length_s, 2.0);
    assert_eq!(doc.tracks[0].items[0].source_ref, id);
    let first = host.lock().store.get(&id).unwrap().to_vec();

    // a second session renders bit-identical audio for the same prompt
    let (other, s2) = server();
    tool(&s2, "generate_beat", json!({ "prompt": "120 bpm four on the floor, 4 beats", "expected_revision": 0 }));
    assert_eq!(other.lock().store.get(&id).unwrap(), &first[..]);
}

#[test]
fn import_one_note_file() {
    let (host, s) = server();
    let r =
        tool(&s, "import_midi", json!({ "midi_bytes": ONE_NOTE_SMF_B64, "track_name": "Hum", "expected_revision": 0 }));
    let sc = &r["result"]["structuredContent"];
    assert_eq!((sc["length_s"].as_f64(), sc["notes"].as_u64()), (Some(1.0), Some(1)));
    let doc = host.state();
    assert_eq!(doc.tracks[0].name, "Hum");
    assert_eq!(doc.tracks[0].items[0].length_s, 1.0);
    assert!(host.lock().store.contains(sc["content_id"].as_str().unwrap()));
}

#[test]
fn framing_round_trip() {
    let mut buf = Vec::new();
    write_frame(&mut buf, br#"{"a":1}"#).unwrap();
    write_frame(&mut buf, "é".as_bytes()).unwrap();
    assert_eq!(&buf[..22], b"Content-Length: 7\r\n\r\n{");
    let mut r = Cursor::new(buf);
    assert_eq!(read_frame(&mut r).unwrap().unwrap(), br#"{"a":1}"#);
    assert_eq!(read_frame(&mut r).unwrap().unwrap(), "é".as_bytes());
    assert_eq!(read_frame(&mut r).unwrap(), None);

    assert!(read_frame(&mut Cursor::new(b"Content-Type: x\r\n\r\n{}".to_vec())).is_err());
    assert!(read_frame(&mut Cursor::new(b"Content-Length: 9\r\n".to_vec())).is_err());
    assert!(read_frame(&mut Cursor::new(b"Content-Length: 9\r\n\r\n{}".to_vec())).is_err());
}

#[test]
fn framed_and_line_transports_agree() {
    let requests = [
        r#"{"jsonrpc":"2.0","id":1,"method":"initialize"}"#,
        r#"{"jsonrpc":"2.0","method":"notifications/initialized"}"#,
        r#"{"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"apply_edit_script","arguments":{"script_text":"add_track \"A\"","expected_revision":0}}}"#,
        "{broken",
        r#"{"jsonrpc":"2.0","id":3,"method":"tools/call","params":{"name":"get_project_state"}}"#,
    ];
    let (_, framed_server) = server();
    let mut input = Vec::new();
    for r in requests {
        write_frame(&mut input, r.as_bytes()).unwrap();
    }
    let mut output = Vec::new();
    serve_framed(&framed_server, Cursor::new(input), &mut output).unwrap();
    let mut framed = Vec::new();
    let mut reader = Cursor::new(output);
    while let Some(body) = read_frame(&mut reader).unwrap() {
        framed.push(String::from_utf8(body).unwrap());
    }

    let (_, line_server) = server();
    let mut output = Vec::new();
    serve_lines(&line_server, Cursor::new(requests.join("\n\n")), &mut output).unwrap();
    let lines: Vec<String> = String::from_utf8(output).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(framed.len(), 4);
    assert_eq!(framed, lines);
}

#[test]
fn concurrent_connections_serialize() {
    const CONNECTIONS: usize = 8;
    const MUTATIONS: usize = 25;
    let host = Host::new(Engine::new());
    let server = Arc::new(Server::new(Arc::new(Tools::new(Arc::clone(&host)))));
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || serve_tcp(server, listener));

    let workers: Vec<_> = (0..CONNECTIONS)
        .map(|c| {
            std::thread::spawn(move || {
                let stream = TcpStream::connect(addr).unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                stream.set_nodelay(true).unwrap();
                let mut writer = stream;
                let mut id = 0;
                let mut send = |args: Value, name: &str| -> Value {
                    id += 1;
                    let req = json!({ "jsonrpc": "2.0", "id": id, "method": "tools/call", "params": { "name": name, "arguments": args } });
                    writer.write_all(format!("{req}\n").as_bytes()).unwrap();
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let v: Value = serde_json::from_str(&line).unwrap();
                    assert_eq!(v["id"], id);
                    v["result"]["structuredContent"].clone()
                };
                let mut revisions = Vec::new();
                for m in 0..MUTATIONS {
                    loop {
                        let rev = send(json!({}), "get_project_state")["revision"].as_u64().unwrap();
                        let script = format!("add_track \"c{c}-m{m}\"");
                        let r = send(json!({ "script_text": script, "expected_revision": rev }), "apply_edit_script");
                        if let Some(after) = r["revision_after"].as_u64() {
                            revisions.push(after);
                            break;
                        }
                        assert_eq!(r["error"]["code"], "stale_revision", "{r}");
                    }
                }
                revisions
            })
        })
        .collect();
    let mut all: Vec<u64> = workers.into_iter().flat_map(|w| w.join().unwrap()).collect();
    all.sort();
    assert_eq!(all, (1..=(CONNECTIONS * MUTATIONS) as u64).collect::<Vec<_>>());
    assert_eq!(host.revision(), (CONNECTIONS * MUTATIONS) as u64);
    assert_eq!(host.state().tracks.len(), CONNECTIONS * MUTATIONS);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn grounding(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Err(e) = grounding_scenario(&mut rng) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn read_tools_never_change_revision(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let host = Host::new(random_engine(&mut rng));
        let tools = Tools::new(Arc::clone(&host));
        let content = host.lock().engine.content().clone();
        let revision = host.revision();
        for _ in 0..20 {
            let (name, args) = match rng.random_range(0..4) {
                0 => ("get_project_state", json!({})),
                1 => {
                    let action = ["play", "stop", "record"][rng.random_range(0..3)];
                    ("transport_control", json!({ "action": action }))
                }
                2 => ("no_such_tool", json!({})),
                _ => ("get_project_state", json!({ "unexpected": 1 })),
            };
            let _ = tools.call(name, args);
            prop_assert_eq!(host.revision(), revision);
        }
        let after = host.lock().engine.content().clone();
        prop_assert_eq!(after, content);
    }
}
