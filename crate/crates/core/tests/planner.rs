use dawzy_core::engine::{Engine, EngineError, FxId, MediaItem, SourceKind, Step};
use dawzy_core::planner::{plan, OutcomeKind, PlannerOutcome};
use dawzy_core::script::{execute, parse, Validator};

fn session() -> Engine {
    let mut e = Engine::new();
    e.transact("setup", |e| {
        e.add_track("Lead", None)?;
        e.add_track("Bass", None)?;
        let comp = e.add_fx(0, "ReaComp")?;
        e.set_fx_param_normalized(0, comp, 2, 0.5)?;
        e.add_fx(1, "ReaComp")?;
        e.import_item(0, MediaItem::new(SourceKind::Midi, "midi-lead", 4.0))?;
        Ok::<_, EngineError>(())
    })
    .unwrap();
    e
}

fn outcome(e: &Engine, text: &str) -> PlannerOutcome {
    plan(text, &e.state_summary(), e.registry())
}

fn run(e: &mut Engine, text: &str) -> PlannerOutcome {
    let o = outcome(e, text);
    if let Some(script) = &o.script_text {
        let parsed = parse(script).unwrap_or_else(|err| panic!("{script}: {err}"));
        let p = Validator::new(e.registry())
            .validate(&parsed, &e.state_summary())
            .unwrap_or_else(|err| panic!("{script}: {err}"));
        execute(e, &p).unwrap();
    }
    o
}

#[test]
fn fx_multi() {
    let mut e = session();
    let decay_before = e.tracks()[0].fx_chain[0].params[3].normalized_value;
    let o = run(&mut e, "Double the first track's volume, increase the decay, and set the attack to 10 ms");
    assert_eq!(o.kind, OutcomeKind::Edit);
    assert_eq!(
        o.script_text.as_deref(),
        Some("set_volume #0 double\nset_fx_param #0 fx:0 param:\"Release\" by +500ms clamp\nset_fx_param #0 fx:0 param:\"Attack\" 10ms\n")
    );
    let t = &e.tracks()[0];
    assert!((t.volume_db - 20.0 * 2f64.log10()).abs() < 1e-9);
    assert!(t.fx_chain[0].params[3].normalized_value > decay_before);
    assert!((t.fx_chain[0].params[2].normalized_value - 0.02).abs() < 1e-12);
}

#[test]
fn increase_decay_by_a_tenth() {
    let mut e = session();
    e.transact("d", |e| e.set_fx_param_normalized(0, FxId(1), 3, 0.3)).unwrap();
    run(&mut e, "increase the decay");
    assert!((e.tracks()[0].fx_chain[0].params[3].normalized_value - 0.4).abs() < 1e-12);
}

#[test]
fn gui_nav() {
    let e = session();
    let o = outcome(&e, "Open the FX browser for the first track");
    assert_eq!(o.kind, OutcomeKind::UiHint);
    assert_eq!(o.script_text.as_deref(), Some("ui_hint open_fx_browser #0\n"));
}

#[test]
fn workflow() {
    let mut e = session();
    let o = run(&mut e, "Duplicate the first track, pitch it up one octave, and blend it in at 20%");
    assert_eq!(
        o.script_text.as_deref(),
        Some("duplicate_track #0\nset_item_pitch #1 item:0 by +12st\nset_volume #1 blend:20%\n")
    );
    assert_eq!(e.tracks().len(), 3);
    assert_eq!(e.tracks()[1].items[0].pitch_shift_semitones, 12.0);
    assert!((e.tracks()[1].volume_db - 20.0 * 0.2f64.log10()).abs() < 1e-9);
}

#[test]
fn workflow_on_empty_project_fails_validation() {
    let e = Engine::new();
    let o = outcome(&e, "Duplicate the first track, pitch it up one octave, and blend it in at 20%");
    let script = parse(o.script_text.as_deref().unwrap()).unwrap();
    let err = Validator::new(e.registry()).validate(&script, &e.state_summary()).unwrap_err();
    assert_eq!(err.code(), "unknown_track");
}

#[test]
fn education() {
    let e = session();
    let o = outcome(&e, "What does attack time do in the second track's compressor?");
    assert_eq!(o.kind, OutcomeKind::Answer);
    assert!(o.script_text.is_none());
    assert!(o.explanation.starts_with("Attack is how quickly a compressor reacts"), "{}", o.explanation);
    assert!(o.explanation.contains("On track 1 (\"Bass\"), ReaComp Attack is currently"), "{}", o.explanation);
}

#[test]
fn unmatched_lists_forms() {
    let e = session();
    let o = outcome(&e, "please do something nice");
    assert_eq!(o.kind, OutcomeKind::Answer);
    assert!(o.explanation.contains("I can handle requests such as"));
}

#[test]
fn assorted_templates() {
    let e = session();
    let script = |text: &str| outcome(&e, text).script_text.unwrap_or_else(|| panic!("no script for {text:?}"));
    assert_eq!(script("halve the volume of the second track"), "set_volume #1 halve\n");
    assert_eq!(script("set the Bass volume to -6 dB"), "set_volume #1 -6dB\n");
    assert_eq!(script("turn the first track down by 3 dB"), "set_volume #0 by -3dB clamp\n");
    assert_eq!(script("pan the second track 30% left"), "set_pan #1 -0.3\n");
    assert_eq!(script("mute the bass"), "set_mute #1 on\n");
    assert_eq!(script("add a reverb to the second track"), "add_fx #1 \"ReaVerb\"\n");
    assert_eq!(script("add a track called Pad"), "add_track \"Pad\"\n");
    assert_eq!(script("transpose the first track down 3 semitones"), "set_item_pitch #0 item:0 by -3st\n");
    assert_eq!(
        script("lower the threshold on the second track by 6 dB"),
        "set_fx_param #1 fx:0 param:\"Threshold\" by -6dB clamp\n"
    );
    assert_eq!(script("set the release to 0.5 s"), "set_fx_param #0 fx:0 param:\"Release\" 500ms\n");
    assert_eq!(script("play"), "transport play\n");
    assert_eq!(
        script("120 bpm four on the floor, 4 beats"),
        "generate_beat_track \"120 bpm four on the floor, 4 beats\"\n"
    );
    assert_eq!(script("generate a boom bap beat"), "generate_beat_track \"generate a boom bap beat\"\n");
}

#[test]
fn deterministic() {
    let e = session();
    let text = "Double the first track's volume, increase the decay, and set the attack to 10 ms";
    assert_eq!(outcome(&e, text), outcome(&e, text));
}

#[test]
fn steps_resolve_to_expected_indices() {
    let e = session();
    let o = outcome(&e, "set the attack to 10 ms");
    let script = parse(o.script_text.as_deref().unwrap()).unwrap();
    let p = Validator::new(e.registry()).validate(&script, &e.state_summary()).unwrap();
    assert_eq!(p.steps, vec![Step::SetFxParam { track: 0, fx: 0, param: 2, normalized: 0.02 }]);
}
