//! Deterministic phrase-template planner.
//!
//! An utterance is split into clauses; each clause is matched against a
//! small set of templates and turned into edit-script statements. Every
//! clause is simulated on a scratch copy of the session before the next one
//! is read, so later clauses see shifted indices (a duplicate lands right
//! after its source, and "it" then refers to the copy).
//!
//! Questions are answered from a glossary. Anything unmatched yields an
//! answer listing the supported forms; no partial edits are produced.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, ProjectStateDoc};
use crate::script::{self, ast::quote, Validator};
use crate::units::{UnitKind, UnitRegistry, UnitSpec};

/// Step used by "increase"/"decrease" without a magnitude, as a fraction of
/// the parameter's human range.
pub const DEFAULT_PARAM_STEP: f64 = 0.10;
/// Step used by "louder"/"quieter" without a magnitude.
pub const DEFAULT_VOLUME_STEP_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Edit,
    Answer,
    UiHint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerOutcome {
    pub kind: OutcomeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script_text: Option<String>,
    pub explanation: String,
}

impl PlannerOutcome {
    pub fn answer(text: impl Into<String>) -> Self {
        PlannerOutcome { kind: OutcomeKind::Answer, script_text: None, explanation: text.into() }
    }
}

pub const GLOSSARY: &[(&str, &str)] = &[
    (
        "attack",
        "Attack is how quickly a compressor reacts once the signal rises above the threshold. \
         Short attack times catch transients; longer ones let the initial punch through before gain reduction starts.",
    ),
    (
        "release",
        "Release is how quickly a compressor stops reducing gain after the signal falls back below the threshold.",
    ),
    (
        "decay",
        "Decay is how long a sound or effect takes to die away. On a compressor it is another name for release; \
         on a reverb it sets the length of the tail.",
    ),
    ("threshold", "Threshold is the level above which a compressor starts reducing gain."),
    ("ratio", "Ratio sets how strongly a compressor reduces signal above the threshold; 4:1 turns a 4 dB overshoot into 1 dB."),
    (
        "compressor",
        "A compressor automatically turns down signal that exceeds a threshold, evening out the dynamics of a track.",
    ),
    ("eq", "An equalizer (EQ) boosts or cuts specific frequency bands to shape the tone of a track."),
    ("reverb", "Reverb simulates the reflections of a room so a sound seems to sit in a space."),
    ("delay", "A delay repeats the signal after a set time; feedback controls how many echoes follow."),
    ("pan", "Pan places a track between the left and right speakers."),
    (
        "volume",
        "Track volume is a gain in decibels. +6.02 dB doubles the amplitude and -6.02 dB halves it.",
    ),
];

const SUPPORTED_FORMS: &str = "I can handle requests such as: \
double or halve a track's volume; set volume or pan to a value; set an FX parameter (\"set the attack to 10 ms\"); \
increase or decrease a parameter; duplicate a track; pitch a track up or down by semitones or octaves; \
blend a track in at N%; add a track or an FX; mute or unmute; generate a beat (\"120 bpm four on the floor, 4 beats\"); \
play, stop or record; open the FX browser; and questions about attack, release, decay, threshold, ratio, compressor, EQ, reverb, delay, pan and volume.";

const QUESTION_WORDS: &[&str] = &["what", "what's", "whats", "how", "why", "explain", "define", "describe", "tell"];

const ORDINALS: &[&str] =
    &["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];

const NUMBER_WORDS: &[(&str, f64)] = &[
    ("a", 1.0),
    ("an", 1.0),
    ("one", 1.0),
    ("two", 2.0),
    ("three", 3.0),
    ("four", 4.0),
    ("five", 5.0),
    ("six", 6.0),
    ("seven", 7.0),
    ("eight", 8.0),
    ("nine", 9.0),
    ("ten", 10.0),
    ("eleven", 11.0),
    ("twelve", 12.0),
];

/// FX keywords and the registry names they stand for.
/// Words that follow "the" and name a property or part of a track.
const TRACK_NOUNS: &[&str] = &[
    "volume",
    "pan",
    "track",
    "level",
    "gain",
    "compressor",
    "eq",
    "delay",
    "reverb",
    "fx",
    "effects",
    "attack",
    "release",
    "decay",
    "threshold",
    "ratio",
];
const NOT_NAMES: &[&str] =
    &["last", "same", "other", "new", "next", "master", "whole", "overall", "current", "selected"];

const FX_WORDS: &[(&str, &str)] = &[
    ("compressor", "ReaComp"),
    ("comp", "ReaComp"),
    ("reacomp", "ReaComp"),
    ("eq", "ReaEQ"),
    ("equalizer", "ReaEQ"),
    ("reaeq", "ReaEQ"),
    ("reverb", "ReaVerb"),
    ("reaverb", "ReaVerb"),
    ("delay", "ReaDelay"),
    ("echo", "ReaDelay"),
    ("readelay", "ReaDelay"),
    ("reapitch", "ReaPitch"),
];

/// Plans one utterance against a state document.
pub fn plan(text: &str, doc: &ProjectStateDoc, registry: &UnitRegistry) -> PlannerOutcome {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return PlannerOutcome::answer(not_understood());
    }
    let words = tokenize(trimmed);
    if is_question(trimmed, &words) {
        return answer(&words, doc);
    }
    if is_beat_request(&words) {
        let prompt = trimmed.trim_end_matches(['.', '!']);
        let line = alloc::format!("generate_beat_track {}", quote(prompt));
        return PlannerOutcome {
            kind: OutcomeKind::Edit,
            script_text: Some(line + "\n"),
            explanation: alloc::format!("generate a beat from {}", quote(prompt)),
        };
    }

    let Ok(scratch) = Engine::from_doc(doc, registry.clone()) else {
        return PlannerOutcome::answer("The session state could not be read.");
    };
    let mut planner = ClausePlanner { scratch, context: None, missing: None, lines: Vec::new(), notes: Vec::new() };
    for clause in split_clauses(trimmed) {
        if !planner.clause(&clause) {
            return PlannerOutcome::answer(alloc::format!(
                "I didn't understand \"{}\". {SUPPORTED_FORMS}",
                clause.trim()
            ));
        }
        if let Some(name) = planner.missing.take() {
            let names: Vec<String> = doc.tracks.iter().map(|t| quote(&t.name)).collect();
            let have = if names.is_empty() {
                "The session has no tracks.".into()
            } else {
                alloc::format!("Tracks: {}.", names.join(", "))
            };
            return PlannerOutcome::answer(alloc::format!("There is no track called {}. {have}", quote(&name)));
        }
    }
    if planner.lines.is_empty() {
        return PlannerOutcome::answer(not_understood());
    }
    let only_hints = planner.lines.iter().all(|l| l.starts_with("ui_hint"));
    let mut script_text = planner.lines.join("\n");
    script_text.push('\n');
    PlannerOutcome {
        kind: if only_hints { OutcomeKind::UiHint } else { OutcomeKind::Edit },
        script_text: Some(script_text),
        explanation: planner.notes.join("; "),
    }
}

fn not_understood() -> String {
    alloc::format!("I didn't understand that. {SUPPORTED_FORMS}")
}

/// Lowercased words; digits and letters are split (`10ms` → `10`, `ms`),
/// possessive `'s` is dropped and `%` stands alone.
fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    let mut out: Vec<String> = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.is_empty() {
            out.push(core::mem::take(cur));
        }
    };
    let chars: Vec<char> = lower.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let prev = if i > 0 { chars[i - 1] } else { ' ' };
        let next = chars.get(i + 1).copied().unwrap_or(' ');
        if c.is_ascii_digit() || (c == '.' && prev.is_ascii_digit() && next.is_ascii_digit()) {
            if cur.chars().last().is_some_and(|l| l.is_alphabetic()) {
                flush(&mut cur, &mut out);
            }
            cur.push(c);
        } else if (c == '-' || c == '+') && next.is_ascii_digit() && cur.is_empty() {
            cur.push(c);
        } else if c.is_alphabetic() || c == '#' || (c == '\'' && next.is_alphabetic() && !cur.is_empty()) {
            if cur.chars().last().is_some_and(|l| l.is_ascii_digit()) {
                flush(&mut cur, &mut out);
            }
            cur.push(c);
        } else {
            flush(&mut cur, &mut out);
            if c == '%' {
                out.push("%".into());
            }
        }
    }
    flush(&mut cur, &mut out);
    out.into_iter()
        .map(|w| match w.strip_suffix("'s") {
            Some(stem) => stem.to_string(),
            None => w,
        })
        .collect()
}

fn has(words: &[String], w: &str) -> bool {
    words.iter().any(|x| x == w)
}

fn has_any(words: &[String], ws: &[&str]) -> bool {
    ws.iter().any(|w| has(words, w))
}

fn is_question(text: &str, words: &[String]) -> bool {
    text.ends_with('?') || words.first().is_some_and(|w| QUESTION_WORDS.contains(&w.as_str()))
}

fn is_beat_request(words: &[String]) -> bool {
    let beaty = has_any(words, &["beat", "beats", "drum", "drums", "groove", "loop"]);
    has(words, "bpm") || (beaty && has_any(words, &["generate", "make", "create", "give", "build", "produce"]))
}

fn split_clauses(text: &str) -> Vec<String> {
    let mut clauses = Vec::new();
    for part in text.split([',', ';']) {
        let mut rest = part.to_string();
        loop {
            let lower = rest.to_ascii_lowercase();
            let cut = [" and then ", " then ", " and "]
                .iter()
                .filter_map(|sep| lower.find(sep).map(|i| (i, sep.len())))
                .min();
            match cut {
                Some((i, len)) => {
                    clauses.push(rest[..i].to_string());
                    rest = rest[i + len..].to_string();
                }
                None => {
                    clauses.push(rest);
                    break;
                }
            }
        }
    }
    clauses
        .into_iter()
        .map(|c| {
            let mut c = c.trim().trim_end_matches(['.', '!']).to_string();
            for lead in ["and then ", "and ", "then ", "also ", "please "] {
                if c.to_ascii_lowercase().starts_with(lead) {
                    c = c[lead.len()..].to_string();
                }
            }
            c
        })
        .filter(|c| !c.trim().is_empty())
        .collect()
}

fn number_at(words: &[String], i: usize) -> Option<f64> {
    let w = words.get(i)?;
    w.parse::<f64>().ok().or_else(|| NUMBER_WORDS.iter().find(|(n, _)| n == w).map(|(_, v)| *v))
}

/// First number in the clause with the unit word that follows it, if any.
fn quantity(words: &[String]) -> Option<(f64, Option<String>)> {
    (0..words.len()).find_map(|i| {
        let w = &words[i];
        if w == "a" || w == "an" {
            return None;
        }
        let v = number_at(words, i)?;
        Some((v, words.get(i + 1).cloned()))
    })
}

struct ClausePlanner {
    scratch: Engine,
    /// Track the conversation is currently about.
    context: Option<usize>,
    /// A track the user named that the session does not have.
    missing: Option<String>,
    lines: Vec<String>,
    notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Direction {
    Up,
    Down,
}

impl ClausePlanner {
    fn track_count(&self) -> usize {
        self.scratch.tracks().len()
    }

    /// An explicit track reference in the clause, resolved to an index.
    fn explicit_track(&self, words: &[String]) -> Option<usize> {
        for (i, w) in words.iter().enumerate() {
            if let Some(k) = ORDINALS.iter().position(|o| o == w) {
                if words.get(i + 1).is_some_and(|n| n == "track" || n == "one")
                    || words.get(i + 2).is_some_and(|n| n == "track")
                {
                    return Some(k);
                }
            }
            if w == "last" && words.get(i + 1).is_some_and(|n| n == "track") {
                return Some(self.track_count().saturating_sub(1));
            }
            if let Some(d) = w.strip_prefix('#') {
                if let Ok(k) = d.parse::<usize>() {
                    return Some(k);
                }
            }
            if w == "track" {
                if let Some(n) = words.get(i + 1).and_then(|n| n.trim_start_matches('#').parse::<usize>().ok()) {
                    // spoken track numbers count from one
                    return Some(n.saturating_sub(1));
                }
            }
        }
        let joined = words.join(" ");
        let mut best: Option<(usize, usize)> = None;
        for (i, t) in self.scratch.tracks().iter().enumerate() {
            let name = t.name.to_lowercase();
            if name.is_empty() {
                continue;
            }
            let padded = alloc::format!(" {joined} ");
            if padded.contains(&alloc::format!(" {name} ")) && best.is_none_or(|(_, len)| name.len() > len) {
                best = Some((i, name.len()));
            }
        }
        best.map(|(i, _)| i)
    }

    /// "the drums volume" when no track is called "drums".
    fn unknown_name(&self, words: &[String]) -> Option<String> {
        let known: Vec<String> = self.scratch.tracks().iter().map(|t| t.name.to_lowercase()).collect();
        words.windows(3).find_map(|w| {
            let (name, noun) = (&w[1], w[2].as_str());
            let skip = ORDINALS.contains(&name.as_str())
                || NOT_NAMES.contains(&name.as_str())
                || TRACK_NOUNS.contains(&name.as_str())
                || fx_in(core::slice::from_ref(name)).is_some()
                || known.iter().any(|k| k.split_whitespace().any(|part| part == name));
            (w[0] == "the" && TRACK_NOUNS.contains(&noun) && !skip).then(|| name.clone())
        })
    }

    /// The clause's track: explicit reference, then "it"/context, then track 0.
    fn target(&mut self, words: &[String]) -> usize {
        let explicit = self.explicit_track(words);
        if explicit.is_none() && self.missing.is_none() {
            self.missing = self.unknown_name(words);
        }
        let t = explicit.or(self.context).unwrap_or(0);
        self.context = Some(t);
        t
    }

    fn emit(&mut self, lines: Vec<String>, note: String) {
        let text = lines.join("\n");
        if let Ok(parsed) = script::parse(&text) {
            let registry = self.scratch.registry().clone();
            let validator = Validator::new(&registry);
            if let Ok(plan) = validator.validate_content(&parsed, self.scratch.content(), self.scratch.revision()) {
                let _ = script::execute(&mut self.scratch, &plan);
            }
        }
        self.lines.extend(lines);
        self.notes.push(note);
    }

    fn clause(&mut self, clause: &str) -> bool {
        let words = tokenize(clause);
        if words.is_empty() {
            return true;
        }
        let dir = direction(&words);
        if has_any(&words, &["duplicate", "copy", "clone"]) {
            let t = self.target(&words);
            self.emit(alloc::vec![alloc::format!("duplicate_track #{t}")], alloc::format!("duplicate track {t}"));
            self.context = Some(t + 1);
            return true;
        }
        if has_any(&words, &["add", "insert", "put"]) {
            if let Some(fx) = fx_in(&words) {
                let t = self.target(&words);
                self.emit(
                    alloc::vec![alloc::format!("add_fx #{t} {}", quote(fx))],
                    alloc::format!("add {fx} to track {t}"),
                );
                return true;
            }
        }
        if has(&words, "track") && has_any(&words, &["add", "create", "new", "insert"]) {
            let name = name_after(clause, &["called ", "named "])
                .unwrap_or_else(|| alloc::format!("Track {}", self.track_count() + 1));
            let index = self.track_count();
            self.emit(
                alloc::vec![alloc::format!("add_track {}", quote(&name))],
                alloc::format!("add track {}", quote(&name)),
            );
            self.context = Some(index);
            return true;
        }
        if has(&words, "browser")
            || (has_any(&words, &["open", "show"]) && has_any(&words, &["fx", "effects", "plugins"]))
        {
            let t = self.target(&words);
            self.emit(
                alloc::vec![alloc::format!("ui_hint open_fx_browser #{t}")],
                alloc::format!("open the FX browser for track {t}"),
            );
            return true;
        }
        if has(&words, "blend") {
            let Some(pct) = percent(&words) else {
                return false;
            };
            let t = self.target(&words);
            self.emit(
                alloc::vec![alloc::format!("set_volume #{t} blend:{}%", fmt_num(pct))],
                alloc::format!("blend track {t} in at {}%", fmt_num(pct)),
            );
            return true;
        }
        if has_any(&words, &["pitch", "transpose", "octave", "octaves", "semitone", "semitones"])
            && !has(&words, "shifter")
        {
            return self.pitch(&words, dir);
        }
        if has_any(&words, &["volume", "louder", "quieter", "softer"]) || (has(&words, "turn") && dir.is_some()) {
            return self.volume(&words, dir);
        }
        if has(&words, "pan") || has_any(&words, &["left", "right", "center", "centre"]) {
            return self.pan(&words);
        }
        if has_any(&words, &["mute", "unmute", "silence"]) {
            let t = self.target(&words);
            let on = !has(&words, "unmute");
            self.emit(
                alloc::vec![alloc::format!("set_mute #{t} {}", if on { "on" } else { "off" })],
                alloc::format!("{} track {t}", if on { "mute" } else { "unmute" }),
            );
            return true;
        }
        if self.param(&words, dir) {
            return true;
        }
        for (word, action) in
            [("play", "play"), ("playback", "play"), ("stop", "stop"), ("record", "record"), ("recording", "record")]
        {
            if has(&words, word) {
                self.emit(alloc::vec![alloc::format!("transport {action}")], alloc::format!("transport {action}"));
                return true;
            }
        }
        false
    }

    fn pitch(&mut self, words: &[String], dir: Option<Direction>) -> bool {
        let Some((n, unit)) = quantity(words).or_else(|| {
            // "an octave", "a semitone"
            words.iter().position(|w| w == "a" || w == "an").and_then(|i| {
                words
                    .get(i + 1)
                    .filter(|u| u.starts_with("octave") || u.starts_with("semitone"))
                    .map(|u| (1.0, Some(u.clone())))
            })
        }) else {
            return false;
        };
        let per = match unit.as_deref() {
            Some(u) if u.starts_with("octave") => 12.0,
            Some(u) if u.starts_with("semitone") || u == "st" || u == "half" => 1.0,
            _ if has_any(words, &["octave", "octaves"]) => 12.0,
            _ => 1.0,
        };
        let semis = n * per * if dir == Some(Direction::Down) { -1.0 } else { 1.0 };
        let t = self.target(words);
        let items = self.scratch.tracks().get(t).map_or(0, |tr| tr.items.len());
        let amount = alloc::format!("by {}{}st", if semis >= 0.0 { "+" } else { "" }, fmt_num(semis));
        let lines: Vec<String> =
            (0..items.max(1)).map(|k| alloc::format!("set_item_pitch #{t} item:{k} {amount}")).collect();
        self.emit(lines, alloc::format!("transpose track {t} by {} semitones", fmt_num(semis)));
        true
    }

    fn volume(&mut self, words: &[String], dir: Option<Direction>) -> bool {
        let t = self.target(words);
        let (change, note) = if has_any(words, &["double", "twice"]) {
            ("double".to_string(), "double the volume (+6.02 dB)".to_string())
        } else if has_any(words, &["halve", "half"]) {
            ("halve".to_string(), "halve the volume (-6.02 dB)".to_string())
        } else {
            let db = quantity(words).filter(|(_, u)| u.as_deref().is_none_or(|u| u == "db" || u == "decibels"));
            let relative = has(words, "by") || dir.is_some() && !has(words, "to");
            match (db, relative) {
                (Some((v, _)), false) => {
                    (alloc::format!("{}dB", fmt_num(v)), alloc::format!("set the volume to {} dB", fmt_num(v)))
                }
                (found, _) => {
                    let step = found.as_ref().map_or(DEFAULT_VOLUME_STEP_DB, |(v, _)| libm::fabs(*v));
                    let step = if dir == Some(Direction::Down) || has_any(words, &["quieter", "softer"]) {
                        -step
                    } else {
                        step
                    };
                    if dir.is_none() && found.is_none() && !has(words, "louder") && step > 0.0 {
                        return false;
                    }
                    (
                        alloc::format!("by {}{}dB clamp", if step >= 0.0 { "+" } else { "" }, fmt_num(step)),
                        alloc::format!("change the volume by {} dB", fmt_num(step)),
                    )
                }
            }
        };
        self.emit(alloc::vec![alloc::format!("set_volume #{t} {change}")], alloc::format!("{note} on track {t}"));
        true
    }

    fn pan(&mut self, words: &[String]) -> bool {
        let t = self.target(words);
        let value = if has_any(words, &["center", "centre", "middle"]) {
            0.0
        } else {
            let side = if has(words, "left") {
                -1.0
            } else if has(words, "right") {
                1.0
            } else {
                return false;
            };
            let amount = percent(words).map_or(1.0, |p| p / 100.0);
            side * amount
        };
        self.emit(
            alloc::vec![alloc::format!("set_pan #{t} {}", fmt_num(value))],
            alloc::format!("pan track {t} to {}", fmt_num(value)),
        );
        true
    }

    /// "set the attack to 10 ms", "increase the decay", "lower the threshold by 6 dB".
    fn param(&mut self, words: &[String], dir: Option<Direction>) -> bool {
        let explicit = self.explicit_track(words);
        if explicit.is_none() && self.missing.is_none() {
            self.missing = self.unknown_name(words);
        }
        let fx_hint = fx_in(words);
        let registry = self.scratch.registry().clone();
        // candidate tracks: the named one, then context, then every track
        let mut order: Vec<usize> = Vec::new();
        for t in explicit.into_iter().chain(self.context).chain(0..self.track_count()) {
            if !order.contains(&t) {
                order.push(t);
            }
        }
        let mut found = None;
        'search: for &t in &order {
            let Some(track) = self.scratch.tracks().get(t) else {
                continue;
            };
            for (k, fx) in track.fx_chain.iter().enumerate() {
                if fx_hint.is_some_and(|h| !fx.fx_name.eq_ignore_ascii_case(h)) {
                    continue;
                }
                for (i, w) in words.iter().enumerate() {
                    let two = words.get(i + 1).map(|n| alloc::format!("{w} {n}"));
                    let hit = fx.params.iter().find(|p| {
                        let def = registry.param(&fx.fx_name, &p.name);
                        let names_match = |cand: &str| {
                            p.name.eq_ignore_ascii_case(cand)
                                || def.is_some_and(|d| d.name == p.name && d.answers_to(cand))
                        };
                        names_match(w) || two.as_deref().is_some_and(names_match)
                    });
                    if let Some(p) = hit {
                        found = Some((t, k, fx.fx_name.clone(), p.name.clone(), p.unit));
                        break 'search;
                    }
                }
            }
        }
        let Some((t, k, fx_name, param_name, spec)) = found else {
            return false;
        };
        self.context = Some(t);
        let q =
            quantity(words).filter(|(_, u)| !u.as_deref().is_some_and(|u| u == "%" && spec.kind != UnitKind::Percent));
        let setting = has(words, "to") || has(words, "set") && q.is_some();
        let value = match (q, setting, dir) {
            (Some((v, unit)), true, _) => {
                let (symbol, scale) = unit_of(unit.as_deref(), &spec);
                alloc::format!("{}{symbol}", fmt_num(v * scale))
            }
            (Some((v, unit)), false, Some(d)) => {
                let (symbol, scale) = unit_of(unit.as_deref(), &spec);
                let v = libm::fabs(v * scale) * if d == Direction::Down { -1.0 } else { 1.0 };
                alloc::format!("by {}{}{symbol} clamp", if v >= 0.0 { "+" } else { "" }, fmt_num(v))
            }
            (None, _, Some(d)) => {
                let step = spec.range() * DEFAULT_PARAM_STEP * if d == Direction::Down { -1.0 } else { 1.0 };
                alloc::format!("by {}{}{} clamp", if step >= 0.0 { "+" } else { "" }, fmt_num(step), spec.kind.symbol())
            }
            _ => return false,
        };
        let line = alloc::format!("set_fx_param #{t} fx:{k} param:{} {value}", quote(&param_name));
        let note = alloc::format!("{fx_name} {param_name} on track {t}: {}", value.trim_end_matches(" clamp"));
        self.emit(alloc::vec![line], note);
        true
    }
}

fn direction(words: &[String]) -> Option<Direction> {
    const UP: &[&str] = &["increase", "raise", "up", "boost", "more", "longer", "louder", "higher"];
    const DOWN: &[&str] = &["decrease", "lower", "down", "reduce", "cut", "less", "shorter", "quieter", "softer"];
    words.iter().find_map(|w| {
        if UP.contains(&w.as_str()) {
            Some(Direction::Up)
        } else if DOWN.contains(&w.as_str()) {
            Some(Direction::Down)
        } else {
            None
        }
    })
}

fn percent(words: &[String]) -> Option<f64> {
    (0..words.len()).find_map(|i| {
        let v = words[i].parse::<f64>().ok()?;
        words.get(i + 1).is_some_and(|u| u == "%" || u == "percent").then_some(v)
    })
}

fn fx_in(words: &[String]) -> Option<&'static str> {
    words.iter().find_map(|w| FX_WORDS.iter().find(|(k, _)| k == w).map(|(_, name)| *name))
}

/// Canonical unit symbol for a spoken unit word and the factor into it;
/// a missing or unknown word takes the parameter's own unit.
fn unit_of(word: Option<&str>, spec: &UnitSpec) -> (&'static str, f64) {
    match word.and_then(crate::units::parse_unit_token) {
        Some((UnitKind::Raw, _)) | None => (spec.kind.symbol(), 1.0),
        Some((kind, scale)) => (kind.symbol(), scale),
    }
}

fn name_after(clause: &str, markers: &[&str]) -> Option<String> {
    let lower = clause.to_ascii_lowercase();
    markers.iter().find_map(|m| {
        let at = lower.find(m)? + m.len();
        let name = clause[at..].trim().trim_matches(['"', '\'']).trim();
        (!name.is_empty()).then(|| name.to_string())
    })
}

/// Shortest decimal text that reparses to the same value, without exponent.
fn fmt_num(v: f64) -> String {
    let rounded = libm::round(v * 1e6) / 1e6;
    let mut s = alloc::format!("{rounded:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn answer(words: &[String], doc: &ProjectStateDoc) -> PlannerOutcome {
    let term = words.iter().find_map(|w| {
        let w = match w.as_str() {
            "equalizer" | "equaliser" => "eq",
            "compression" | "comp" => "compressor",
            other => other,
        };
        GLOSSARY.iter().find(|(t, _)| *t == w)
    });
    let Some((term, definition)) = term else {
        return PlannerOutcome::answer(not_understood());
    };
    let mut text = definition.to_string();
    // ground the answer in the session when the question names a track
    if let Some(t) = ordinal_track(words).and_then(|t| doc.tracks.get(t)) {
        for fx in &t.fx {
            if let Some(p) = fx.params.iter().find(|p| p.name.eq_ignore_ascii_case(term)) {
                text.push_str(&alloc::format!(
                    " On track {} ({}), {} {} is currently {}.",
                    t.index,
                    quote(&t.name),
                    fx.fx_name,
                    p.name,
                    p.display
                ));
                break;
            }
        }
    }
    PlannerOutcome::answer(text)
}

fn ordinal_track(words: &[String]) -> Option<usize> {
    words.iter().enumerate().find_map(|(i, w)| {
        let k = ORDINALS.iter().position(|o| o == w)?;
        words.get(i + 1).filter(|n| *n == "track").map(|_| k)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_units_and_possessives() {
        assert_eq!(
            tokenize("the first track's attack to 10ms, 20%"),
            ["the", "first", "track", "attack", "to", "10", "ms", "20", "%"]
        );
        assert_eq!(tokenize("-6.5dB"), ["-6.5", "db"]);
    }

    #[test]
    fn clause_split() {
        assert_eq!(
            split_clauses("Double the first track's volume, increase the decay, and set the attack to 10 ms"),
            ["Double the first track's volume", "increase the decay", "set the attack to 10 ms"]
        );
        assert_eq!(
            split_clauses("Duplicate the first track, pitch it up one octave, and blend it in at 20%"),
            ["Duplicate the first track", "pitch it up one octave", "blend it in at 20%"]
        );
    }

    #[test]
    fn unknown_track_names_are_not_retargeted() {
        let mut e = Engine::new();
        e.transact("t", |e| e.add_track("Lead Vox", None).map(|_| ())).unwrap();
        let doc = e.state_summary();
        let r = plan("set the Drums volume to -6 dB", &doc, e.registry());
        assert_eq!(r.kind, OutcomeKind::Answer);
        assert!(r.explanation.contains("no track called \"drums\""), "{}", r.explanation);
        assert!(r.explanation.contains("\"Lead Vox\""));
        for ok in ["set the lead volume to -6 dB", "turn the master volume down", "set the track volume to -3 dB"] {
            assert_eq!(plan(ok, &doc, e.registry()).kind, OutcomeKind::Edit, "{ok}");
        }
    }

    #[test]
    fn numbers_print_plainly() {
        assert_eq!(fmt_num(500.0), "500");
        assert_eq!(fmt_num(-0.25), "-0.25");
        assert_eq!(fmt_num(1e-9), "0");
    }
}
