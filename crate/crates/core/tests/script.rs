use dawzy_core::engine::{Engine, EngineError, Step};
use dawzy_core::fuzz::{random_engine, random_script};
use dawzy_core::script::{
    execute, execute_with_hook, invert, parse, ExecuteError, ResolvedPlan, StatementError, ValidationError, Validator,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plan(engine: &Engine, text: &str) -> Result<ResolvedPlan, ValidationError> {
    let script = parse(text).expect("parses");
    Validator::new(engine.registry()).validate(&script, &engine.state_summary())
}

fn session(names: &[&str]) -> Engine {
    let mut e = Engine::new();
    e.transact("setup", |e| {
        for n in names {
            e.add_track(*n, None)?;
        }
        Ok::<_, EngineError>(())
    })
    .unwrap();
    e
}

const DOUBLE_DB: f64 = 6.020599913279624;

#[test]
fn double_from_minus_three() {
    let mut e = session(&["Vox"]);
    e.transact("v", |e| e.set_track_volume_db(0, -3.0)).unwrap();
    let p = plan(&e, "set_volume #0 double").unwrap();
    let Step::SetVolume { volume_db, .. } = p.steps[0] else { panic!() };
    assert!((volume_db - (-3.0 + DOUBLE_DB)).abs() < 1e-12);
    assert_eq!(p.inverse_steps[0], Step::SetVolume { track: 0, volume_db: -3.0 });
    assert_eq!(p.base_revision, e.revision());
    assert!(p.explanation[0].contains("doubles the amplitude"), "{:?}", p.explanation);
}

#[test]
fn ambiguous_prefix() {
    let e = session(&["Vocals", "Vocoder", "Drums"]);
    let err = plan(&e, "set_volume \"Voc\" 0dB").unwrap_err();
    assert!(matches!(
        err,
        ValidationError::Statement { index: 0, line: 1, error: StatementError::AmbiguousTrackName { .. } }
    ));
    assert_eq!(err.code(), "ambiguous_track");
    // an exact match wins over a prefix
    let e = session(&["Voc", "Vocals"]);
    assert!(plan(&e, "set_mute \"Voc\" on").is_ok());
    // a unique case-insensitive prefix resolves
    let e = session(&["Vocals", "Drums"]);
    let p = plan(&e, "set_mute \"dr\" on").unwrap();
    assert_eq!(p.steps[0], Step::SetMute { track: 1, mute: true });
}

#[test]
fn duplicate_pitch_blend() {
    let mut e = session(&["Lead"]);
    e.transact("setup", |e| {
        e.set_track_volume_db(0, -4.0)?;
        e.import_item(0, dawzy_core::engine::MediaItem::new(dawzy_core::engine::SourceKind::Midi, "m", 2.0))
    })
    .unwrap();
    let p = plan(&e, "duplicate_track #0\nset_item_pitch #1 item:0 +12st\nset_volume #1 blend:20%").unwrap();
    assert_eq!(p.steps.len(), 3);
    assert_eq!(p.steps[1], Step::SetItemPitch { track: 1, item: 0, semitones: 12.0 });
    let Step::SetVolume { volume_db, .. } = p.steps[2] else { panic!() };
    assert!((volume_db - (-4.0 + 20.0 * 0.2f64.log10())).abs() < 1e-12);
    let before = e.revision();
    let report = execute(&mut e, &p).unwrap();
    assert_eq!(report.new_revision, before + 1);
    assert_eq!(report.applied_steps, 3);
    assert_eq!(e.tracks().len(), 2);
    assert_eq!(e.undo_depth(), 3);
}

#[test]
fn validation_errors() {
    let mut e = session(&["A"]);
    e.transact("fx", |e| e.add_fx(0, "ReaComp")).unwrap();
    let code = |text: &str| plan(&e, text).unwrap_err().code();
    assert_eq!(code("set_mute #3 on"), "unknown_track");
    assert_eq!(code("set_fx_param #0 fx:0 param:\"Knee\" 1"), "unknown_param");
    assert_eq!(code("set_fx_param #0 fx:\"ReaEQ\" param:\"Gain\" 1dB"), "unknown_fx");
    assert_eq!(code("set_fx_param #0 fx:0 param:\"Attack\" 10Hz"), "unit_mismatch");
    assert_eq!(code("set_fx_param #0 fx:0 param:\"Attack\" 900ms"), "value_out_of_range");
    assert_eq!(code("set_volume #0 40dB"), "value_out_of_range");
    assert_eq!(code("set_item_pitch #0 item:0 +2st"), "unknown_item");
    assert_eq!(code("add_fx #0 \"Frobnicator\""), "unknown_fx");
    assert_eq!(code("# only a comment"), "empty_script");
}

#[test]
fn clamp_saturates() {
    let mut e = session(&["A"]);
    e.transact("fx", |e| e.add_fx(0, "ReaComp")).unwrap();
    let p = plan(&e, "set_fx_param #0 fx:0 param:\"Attack\" 900ms clamp\nset_volume #0 40dB clamp").unwrap();
    assert_eq!(p.steps[0], Step::SetFxParam { track: 0, fx: 0, param: 2, normalized: 1.0 });
    assert_eq!(p.steps[1], Step::SetVolume { track: 0, volume_db: 12.0 });
}

#[test]
fn attack_ten_ms_and_alias() {
    let mut e = session(&["Drums"]);
    e.transact("fx", |e| e.add_fx(0, "ReaComp")).unwrap();
    let p = plan(&e, "set_fx_param #0 fx:\"ReaComp\" param:\"Attack\" 10ms").unwrap();
    assert_eq!(p.steps[0], Step::SetFxParam { track: 0, fx: 0, param: 2, normalized: 0.02 });
    // Decay is an alias of the compressor's Release
    let p = plan(&e, "set_fx_param #0 fx:0 param:\"decay\" 0.5s").unwrap();
    assert_eq!(p.steps[0], Step::SetFxParam { track: 0, fx: 0, param: 3, normalized: 0.1 });
}

#[test]
fn stale_and_step_failure() {
    let mut e = session(&["A", "B"]);
    e.transact("fx", |e| e.add_fx(0, "ReaEQ")).unwrap();
    let p = plan(&e, "set_mute #0 on\nset_fx_param #0 fx:0 param:\"Gain\" 3dB\nset_pan #1 -0.5").unwrap();
    // the fx disappears after planning; step 1 now fails
    let mut edited = e.clone();
    let mut gone = p.clone();
    gone.steps.insert(1, Step::RemoveFx { track: 0, position: 0 });
    gone.inverse_steps.insert(1, Step::AddFx { track: 0, fx_name: "ReaEQ".into() });
    let before = edited.content().clone();
    let err = execute(&mut edited, &gone).unwrap_err();
    assert!(matches!(err, ExecuteError::StepFailed { index: 2, .. }), "{err:?}");
    assert_eq!(edited.content(), &before);
    assert_eq!(edited.revision(), e.revision());

    let p4 = p.clone();
    e.transact("bump", |e| e.set_track_mute(1, true)).unwrap();
    let snapshot = e.content().clone();
    assert_eq!(
        execute(&mut e, &p4).unwrap_err(),
        ExecuteError::StaleRevision { expected: p4.base_revision, actual: p4.base_revision + 1 }
    );
    assert_eq!(e.content(), &snapshot);
}

#[test]
fn invert_examples() {
    let mut e = session(&["A"]);
    let p = plan(&e, "set_volume #0 6.02dB").unwrap();
    let inv = invert(&p);
    assert_eq!(inv.steps, vec![Step::SetVolume { track: 0, volume_db: 0.0 }]);
    assert_eq!(inv.base_revision, p.base_revision + 1);
    let p = plan(&e, "add_track \"New\"").unwrap();
    assert_eq!(invert(&p).steps, vec![Step::RemoveTrack { index: 1 }]);
    let original = e.content().clone();
    execute(&mut e, &p).unwrap();
    execute(&mut e, &invert(&p)).unwrap();
    assert_eq!(e.content(), &original);
}

#[test]
fn non_edit_plans_keep_revision() {
    let mut e = session(&["A"]);
    let p = plan(&e, "transport play\nui_hint open_fx_browser #0").unwrap();
    assert!(!p.is_edit());
    let r = e.revision();
    let report = execute(&mut e, &p).unwrap();
    assert_eq!(report.new_revision, r);
    assert!(report.transport.playing);
    assert_eq!(report.ui_hints.len(), 1);
    assert_eq!(e.undo_depth(), 1);
}

#[test]
fn beat_statement_creates_asset() {
    let e = session(&[]);
    let p = plan(&e, "generate_beat_track \"120 bpm four on the floor, 4 beats\"").unwrap();
    assert_eq!(p.beats.len(), 1);
    let Step::ImportTrack { item, .. } = &p.steps[0] else { panic!() };
    assert_eq!(item.length_s, 2.0);
    assert_eq!(item.source_ref, p.beats[0].content_id);
}

#[test]
fn source_check_rejects_missing_content() {
    let e = session(&[]);
    let script = parse("import_midi \"Hum\" src:\"nope\" len:1s").unwrap();
    let exists = |id: &str| id == "midi-1";
    let err =
        Validator::new(e.registry()).with_source_check(&exists).validate(&script, &e.state_summary()).unwrap_err();
    assert_eq!(err.code(), "unknown_source");
}

#[test]
fn plan_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let e = random_engine(&mut rng);
        let (_, p) = random_script(&mut rng, &e, 6);
        assert_eq!(ResolvedPlan::from_json(&p.to_json()).unwrap(), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reversible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = random_engine(&mut rng);
        let (_, p) = random_script(&mut rng, &e, 8);
        let original = e.content().clone();
        execute(&mut e, &p).unwrap();
        execute(&mut e, &invert(&p)).unwrap();
        prop_assert_eq!(e.content(), &original);
    }

    #[test]
    fn atomic_under_injected_failure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_engine(&mut rng);
        let (_, p) = random_script(&mut rng, &e, 8);
        for fail_at in 0..p.steps.len() {
            let mut run = e.clone();
            let err = execute_with_hook(&mut run, &p, |i| {
                if i == fail_at { Err(EngineError::UnknownTrack(usize::MAX)) } else { Ok(()) }
            })
            .unwrap_err();
            let is_step_failure = matches!(err, ExecuteError::StepFailed { index, .. } if index == fail_at);
            prop_assert!(is_step_failure);
            prop_assert_eq!(run.content(), e.content());
            prop_assert_eq!(run.revision(), e.revision());
            prop_assert_eq!(run.undo_depth(), e.undo_depth());
        }
    }

    #[test]
    fn stale_plans_are_no_ops(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = random_engine(&mut rng);
        let (_, p) = random_script(&mut rng, &e, 4);
        let (_, other) = random_script(&mut rng, &e, 4);
        execute(&mut e, &other).unwrap();
        prop_assume!(other.is_edit());
        let before = (e.content().clone(), e.revision(), *e.transport());
        let stale = matches!(execute(&mut e, &p), Err(ExecuteError::StaleRevision { .. }));
        prop_assert!(stale);
        prop_assert_eq!((e.content().clone(), e.revision(), *e.transport()), before);
    }

    #[test]
    fn pretty_print_reparses(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_engine(&mut rng);
        let (script, _) = random_script(&mut rng, &e, 8);
        let again = parse(&script.pretty()).unwrap();
        prop_assert_eq!(again.statements, script.statements);
    }

    #[test]
    fn parse_is_total(text in "\\PC{0,200}") {
        let _ = parse(&text);
    }
}
