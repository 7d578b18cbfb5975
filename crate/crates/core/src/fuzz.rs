//! Random sessions and scripts for property tests and the acceptance runner.
//!
//! Scripts are built one statement at a time; a candidate is kept only if the
//! script still validates, so every returned script resolves against the
//! session it was generated for.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::engine::{Engine, MediaItem, SourceKind};
use crate::script::{parse, EditScript, ResolvedPlan, Statement, Validator};
use crate::units::{from_normalized, UnitKind, UnitRegistry, UnitSpec};

const TRACK_NAMES: &[&str] = &["Drums", "Bass", "Vocals", "Vocoder", "Keys", "Guitar", "Pad", "FX Return"];
const BEAT_PROMPTS: &[&str] = &[
    "120 bpm four on the floor, 4 beats",
    "90 bpm boom bap",
    "hip hop 8 beats 95 bpm",
    "house 128 bpm 16 beats seed 7",
    "just hats",
];

/// An engine with 1–5 tracks carrying random mix settings, FX and items.
/// History is cleared so the session starts at a fresh revision.
pub fn random_engine<R: Rng + ?Sized>(rng: &mut R) -> Engine {
    let mut engine = Engine::new();
    let tracks = rng.random_range(1..=5);
    let registry = engine.registry().clone();
    let fx_names: Vec<String> = registry.fx.iter().map(|f| f.name.clone()).collect();
    let _ = engine.transact("setup", |e| {
        for i in 0..tracks {
            let name = TRACK_NAMES[(i + rng.random_range(0..TRACK_NAMES.len())) % TRACK_NAMES.len()];
            let t = e.add_track(name, None)?;
            e.set_track_volume_db(t, rng.random_range(-30.0..6.0))?;
            e.set_track_pan(t, rng.random_range(-1.0..=1.0))?;
            e.set_track_mute(t, rng.random_bool(0.2))?;
            for _ in 0..rng.random_range(0..3) {
                let name = fx_names.choose(rng).cloned().unwrap_or_default();
                e.add_fx(t, &name)?;
            }
            for k in 0..rng.random_range(0..3) {
                let mut item = MediaItem::new(SourceKind::Midi, alloc::format!("midi-{i}-{k}"), 2.0);
                item.position_s = k as f64 * 2.0;
                e.import_item(t, item)?;
            }
        }
        Ok::<_, crate::engine::EngineError>(())
    });
    let doc = engine.state_summary();
    Engine::from_doc(&doc, registry).unwrap_or_default()
}

/// A script of up to `max_statements` statements that validates against `engine`.
pub fn random_script<R: Rng + ?Sized>(
    rng: &mut R,
    engine: &Engine,
    max_statements: usize,
) -> (EditScript, ResolvedPlan) {
    let registry = engine.registry();
    let validator = Validator::new(registry);
    let target = rng.random_range(1..=max_statements.max(1));
    let mut text = String::new();
    let mut plan = None;
    let mut attempts = 0;
    let mut kept = 0;
    while kept < target && attempts < target * 8 {
        attempts += 1;
        // the simulated state after the statements kept so far
        let scratch = match &plan {
            Some(p) => simulate(engine, p),
            None => engine.clone(),
        };
        let Some(line) = random_statement(rng, &scratch, registry) else {
            continue;
        };
        let candidate = alloc::format!("{text}{line}\n");
        let Ok(script) = parse(&candidate) else {
            continue;
        };
        if let Ok(p) = validator.validate_content(&script, engine.content(), engine.revision()) {
            text = candidate;
            plan = Some(p);
            kept += 1;
        }
    }
    if plan.is_none() {
        text = String::from("set_mute #0 on\n");
    }
    let script = parse(&text).unwrap_or_else(|_| unreachable!("generated scripts parse"));
    let plan = validator
        .validate_content(&script, engine.content(), engine.revision())
        .unwrap_or_else(|e| unreachable!("generated scripts validate: {e}"));
    (script, plan)
}

fn simulate(engine: &Engine, plan: &ResolvedPlan) -> Engine {
    let mut scratch = engine.clone();
    let _ = crate::script::execute(&mut scratch, plan);
    scratch
}

fn random_statement<R: Rng + ?Sized>(rng: &mut R, engine: &Engine, registry: &UnitRegistry) -> Option<String> {
    let tracks = engine.tracks();
    let n = tracks.len();
    let pick_track = |rng: &mut R| -> Option<(usize, String)> {
        if n == 0 {
            return None;
        }
        let i = rng.random_range(0..n);
        let sel = if rng.random_bool(0.3) {
            let mut name = String::from("\"");
            name.push_str(&tracks[i].name.replace('"', "\\\""));
            name.push('"');
            name
        } else {
            alloc::format!("#{i}")
        };
        Some((i, sel))
    };
    let clamp = |rng: &mut R| if rng.random_bool(0.3) { " clamp" } else { "" };
    let line = match rng.random_range(0..13) {
        0 => {
            let name = TRACK_NAMES.choose(rng)?;
            if rng.random_bool(0.5) {
                alloc::format!("add_track \"{name}\" at:{}", rng.random_range(0..=n))
            } else {
                alloc::format!("add_track \"{name}\"")
            }
        }
        1 => alloc::format!("duplicate_track {}", pick_track(rng)?.1),
        2 | 3 => {
            let (_, sel) = pick_track(rng)?;
            let change = match rng.random_range(0..5) {
                0 => alloc::format!("{:.3}dB", rng.random_range(-60.0..12.0)),
                1 => alloc::format!("by {:+.3}dB", rng.random_range(-12.0..12.0)),
                2 => "double".into(),
                3 => "halve".into(),
                _ => alloc::format!("blend:{}%", rng.random_range(1..=100)),
            };
            alloc::format!("set_volume {sel} {change}{}", clamp(rng))
        }
        4 => {
            let (_, sel) = pick_track(rng)?;
            let value = if rng.random_bool(0.5) {
                alloc::format!("{:.2}", rng.random_range(-1.0..=1.0))
            } else {
                alloc::format!("by {:+}%", rng.random_range(-50..=50))
            };
            alloc::format!("set_pan {sel} {value}{}", clamp(rng))
        }
        5 => alloc::format!("set_mute {} {}", pick_track(rng)?.1, if rng.random_bool(0.5) { "on" } else { "off" }),
        6 => {
            let fx = registry.fx.choose(rng)?;
            alloc::format!("add_fx {} \"{}\"", pick_track(rng)?.1, fx.name)
        }
        7 | 8 => {
            let (i, sel) = pick_track(rng)?;
            let chain = &tracks[i].fx_chain;
            let pos = rng.random_range(0..chain.len().max(1));
            let fx = chain.get(pos)?;
            let param = fx.params.choose(rng)?;
            let spec = param.unit;
            let fx_sel =
                if rng.random_bool(0.5) { alloc::format!("{pos}") } else { alloc::format!("\"{}\"", fx.fx_name) };
            let symbol = spec.kind.symbol();
            let value = match rng.random_range(0..3) {
                0 => alloc::format!("norm:{:.4}", rng.random_range(0.0..=spec.slider_max)),
                1 => {
                    let human = from_normalized(rng.random_range(0.0..=spec.slider_max), &spec).ok()?;
                    alloc::format!("{human:.4}{symbol}")
                }
                _ => alloc::format!("by {:+.3}{symbol}", rng.random_range(-0.2..0.2) * spec.range()),
            };
            alloc::format!("set_fx_param {sel} fx:{fx_sel} param:\"{}\" {value}{}", param.name, clamp(rng))
        }
        9 => {
            let (i, sel) = pick_track(rng)?;
            let items = tracks[i].items.len();
            if items == 0 {
                return None;
            }
            let amount = if rng.random_bool(0.5) {
                alloc::format!("{}st", rng.random_range(-24..=24))
            } else {
                alloc::format!("by {:+}st", rng.random_range(-12..=12))
            };
            alloc::format!("set_item_pitch {sel} item:{} {amount}", rng.random_range(0..items))
        }
        10 => alloc::format!(
            "import_midi \"Hum\" src:\"midi-{}\" len:{}ms at:{}s",
            rng.random_range(0..1000),
            rng.random_range(100..8000),
            rng.random_range(0..16)
        ),
        11 => alloc::format!("generate_beat_track \"{}\"", BEAT_PROMPTS.choose(rng)?),
        _ => {
            if rng.random_bool(0.5) {
                alloc::format!("ui_hint open_fx_browser {}", pick_track(rng)?.1)
            } else {
                alloc::format!("transport {}", ["play", "stop", "record"].choose(rng)?)
            }
        }
    };
    Some(line)
}

/// Statements of `script` that create content steps.
pub fn content_statements(script: &EditScript) -> usize {
    script.statements.iter().filter(|s| !matches!(s, Statement::Transport { .. } | Statement::UiHint { .. })).count()
}

/// A structurally valid spec: linear, logarithmic or amplitude, over a
/// random range.
pub fn random_unit_spec<R: Rng + ?Sized>(rng: &mut R) -> UnitSpec {
    let kinds = [
        UnitKind::DecibelGain,
        UnitKind::Milliseconds,
        UnitKind::Hertz,
        UnitKind::Percent,
        UnitKind::Semitones,
        UnitKind::Raw,
    ];
    match rng.random_range(0..3) {
        0 => UnitSpec::amplitude(rng.random_range(-200.0..-20.0)),
        1 => {
            let min = libm::pow(10.0, rng.random_range(-3.0..3.0));
            let max = min * libm::pow(10.0, rng.random_range(0.1..4.0));
            let mut spec = UnitSpec::logarithmic(*kinds[1..].choose(rng).unwrap_or(&UnitKind::Hertz), min, max);
            spec.slider_max = rng.random_range(0.5..4.0);
            spec
        }
        _ => {
            let min = rng.random_range(-1000.0..1000.0);
            let max = min + libm::pow(10.0, rng.random_range(-2.0..4.0));
            let mut spec = UnitSpec::linear(*kinds.choose(rng).unwrap_or(&UnitKind::Raw), min, max);
            spec.slider_max = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.5..3.0) };
            spec
        }
    }
}

/// A spec plus a human value inside its range, ends included now and then.
pub fn random_unit_case<R: Rng + ?Sized>(rng: &mut R) -> (UnitSpec, f64) {
    let spec = random_unit_spec(rng);
    let h = match rng.random_range(0..10) {
        0 => spec.min_human,
        1 => spec.max_human,
        _ => rng.random_range(spec.min_human..=spec.max_human),
    };
    (spec, h)
}
