//! Text prompt to drum loop.
//!
//! A prompt is reduced to a [`BeatSpec`] (tempo, length, a 16th-note grid per
//! voice, seed) and rendered with three procedural voices. Output is a pure
//! function of the spec.
//!
//! Preset grids, one bar of sixteen steps, repeated to fill the loop:
//!
//! | preset | kick | snare | hat |
//! |---|---|---|---|
//! | `four_on_the_floor` | 0 4 8 12 | 4 12 | 2 6 10 14 |
//! | `house` | 0 4 8 12 | 4 12 | every step |
//! | `boom_bap` | 0 7 10 | 4 12 | even steps |
//! | `hip_hop` | 0 6 10 | 4 12 | even steps |
//! | `hats` | none | none | even steps |
//! | `backbeat` (default) | 0 8 | 4 12 | even steps |

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::hash::Hasher;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hum::AudioBuffer;

pub const BEAT_SAMPLE_RATE: u32 = 44_100;
pub const MIN_TEMPO: u32 = 40;
pub const MAX_TEMPO: u32 = 240;
pub const DEFAULT_TEMPO: u32 = 120;
pub const DEFAULT_BEATS: u32 = 8;
pub const MAX_BEATS: u32 = 256;
pub const PEAK_LEVEL: f64 = 0.9;

const KICK_S: f64 = 0.150;
const SNARE_S: f64 = 0.120;
const HAT_S: f64 = 0.040;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    FourOnTheFloor,
    House,
    BoomBap,
    HipHop,
    Hats,
    Backbeat,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::FourOnTheFloor => "four_on_the_floor",
            Preset::House => "house",
            Preset::BoomBap => "boom_bap",
            Preset::HipHop => "hip_hop",
            Preset::Hats => "hats",
            Preset::Backbeat => "backbeat",
        }
    }

    fn bar(self) -> [&'static [usize]; 3] {
        const EVEN: &[usize] = &[0, 2, 4, 6, 8, 10, 12, 14];
        const ALL: &[usize] = &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15];
        const BACK: &[usize] = &[4, 12];
        match self {
            Preset::FourOnTheFloor => [&[0, 4, 8, 12], BACK, &[2, 6, 10, 14]],
            Preset::House => [&[0, 4, 8, 12], BACK, ALL],
            Preset::BoomBap => [&[0, 7, 10], BACK, EVEN],
            Preset::HipHop => [&[0, 6, 10], BACK, EVEN],
            Preset::Hats => [&[], &[], EVEN],
            Preset::Backbeat => [&[0, 8], BACK, EVEN],
        }
    }
}

/// Per-16th-step hit grid for each voice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub kick: Vec<bool>,
    pub snare: Vec<bool>,
    pub hat: Vec<bool>,
}

impl Pattern {
    pub fn from_preset(preset: Preset, steps: usize) -> Self {
        let [kick, snare, hat] = preset.bar();
        let fill = |hits: &[usize]| (0..steps).map(|s| hits.contains(&(s % 16))).collect();
        Pattern { kick: fill(kick), snare: fill(snare), hat: fill(hat) }
    }

    pub fn steps(&self) -> usize {
        self.kick.len()
    }

    pub fn hit_count(&self) -> usize {
        [&self.kick, &self.snare, &self.hat].iter().map(|v| v.iter().filter(|h| **h).count()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeatSpec {
    pub tempo_bpm: u32,
    pub beats: u32,
    pub preset: Preset,
    pub pattern: Pattern,
    pub seed: u64,
}

impl Default for BeatSpec {
    fn default() -> Self {
        BeatSpec::new(DEFAULT_TEMPO, DEFAULT_BEATS, Preset::Backbeat, 0)
    }
}

impl BeatSpec {
    pub fn new(tempo_bpm: u32, beats: u32, preset: Preset, seed: u64) -> Self {
        let tempo_bpm = tempo_bpm.clamp(MIN_TEMPO, MAX_TEMPO);
        let beats = beats.clamp(1, MAX_BEATS);
        BeatSpec { tempo_bpm, beats, preset, pattern: Pattern::from_preset(preset, beats as usize * 4), seed }
    }

    /// Exact loop length: `beats · 60 / tempo` seconds.
    pub fn duration_s(&self) -> f64 {
        self.beats as f64 * 60.0 / self.tempo_bpm as f64
    }

    pub fn sample_count(&self) -> usize {
        libm::round(self.duration_s() * BEAT_SAMPLE_RATE as f64) as usize
    }

    /// Valid when the grid is `beats·4` steps long and something plays.
    pub fn is_valid(&self) -> bool {
        let steps = self.beats as usize * 4;
        (MIN_TEMPO..=MAX_TEMPO).contains(&self.tempo_bpm)
            && self.pattern.kick.len() == steps
            && self.pattern.snare.len() == steps
            && self.pattern.hat.len() == steps
            && self.pattern.hit_count() > 0
    }

    /// Stable content id for the rendered loop.
    pub fn content_id(&self) -> String {
        let mut h = fnv::FnvHasher::default();
        h.write(&self.tempo_bpm.to_le_bytes());
        h.write(&self.beats.to_le_bytes());
        h.write(&self.seed.to_le_bytes());
        for voice in [&self.pattern.kick, &self.pattern.snare, &self.pattern.hat] {
            for hit in voice {
                h.write_u8(*hit as u8);
            }
            h.write_u8(0xff);
        }
        alloc::format!("beat-{:016x}", h.finish())
    }
}

/// Reads tempo (`N bpm`), length (`N beats`), an optional `seed N` and a
/// style keyword. Never fails: anything unrecognized keeps the defaults.
pub fn parse_beat_prompt(text: &str) -> BeatSpec {
    let lower = text.to_ascii_lowercase();
    let words: Vec<&str> =
        lower.split(|c: char| !(c.is_ascii_alphanumeric() || c == '.')).filter(|w| !w.is_empty()).collect();

    let mut tempo = DEFAULT_TEMPO;
    let mut beats = DEFAULT_BEATS;
    let mut seed = 0u64;
    for (i, w) in words.iter().enumerate() {
        let next = words.get(i + 1).copied().unwrap_or("");
        // "120bpm" as one word
        if let Some(num) = w.strip_suffix("bpm").filter(|n| !n.is_empty()) {
            if let Some(n) = parse_count(num) {
                tempo = n;
            }
            continue;
        }
        if let Some(n) = parse_count(w) {
            match next {
                "bpm" => tempo = n,
                "beats" | "beat" => beats = n,
                _ => {}
            }
        }
        if *w == "seed" {
            if let Ok(s) = next.parse::<u64>() {
                seed = s;
            }
        }
    }

    let squashed: String = lower.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    let preset = if squashed.contains("fouronthefloor") {
        Preset::FourOnTheFloor
    } else if squashed.contains("boombap") {
        Preset::BoomBap
    } else if squashed.contains("hiphop") {
        Preset::HipHop
    } else if squashed.contains("house") {
        Preset::House
    } else if squashed.contains("hats") || squashed.contains("hihat") {
        Preset::Hats
    } else {
        Preset::Backbeat
    };
    BeatSpec::new(tempo, beats, preset, seed)
}

fn parse_count(word: &str) -> Option<u32> {
    let v: f64 = word.parse().ok()?;
    if v.is_finite() && (1.0..=10_000.0).contains(&v) {
        Some(libm::round(v) as u32)
    } else {
        None
    }
}

fn kick(out: &mut [f64], start: usize, sr: f64) {
    // exponential sweep 120 Hz -> 45 Hz over the hit; phase is the closed-form integral
    let (f0, f1) = (120.0, 45.0);
    let ratio_log = libm::log(f1 / f0);
    let len = (KICK_S * sr) as usize;
    for n in 0..len {
        let Some(slot) = out.get_mut(start + n) else {
            break;
        };
        let t = n as f64 / sr;
        let phase = 2.0 * PI * f0 * KICK_S / ratio_log * (libm::exp(ratio_log * t / KICK_S) - 1.0);
        let env = libm::exp(-t / 0.045);
        *slot += env * libm::sin(phase);
    }
}

fn snare(out: &mut [f64], start: usize, sr: f64, rng: &mut ChaCha8Rng) {
    let len = (SNARE_S * sr) as usize;
    for n in 0..len {
        let noise: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let Some(slot) = out.get_mut(start + n) else {
            continue;
        };
        let t = n as f64 / sr;
        let body = libm::sin(2.0 * PI * 180.0 * t) * libm::exp(-t / 0.05);
        *slot += 0.6 * noise * libm::exp(-t / 0.03) + 0.4 * body;
    }
}

fn hat(out: &mut [f64], start: usize, sr: f64, rng: &mut ChaCha8Rng) {
    let len = (HAT_S * sr) as usize;
    let mut prev = 0.0;
    for n in 0..len {
        let noise: f64 = rng.random::<f64>() * 2.0 - 1.0;
        // first difference: a crude high-pass
        let bright = noise - prev;
        prev = noise;
        let Some(slot) = out.get_mut(start + n) else {
            continue;
        };
        let t = n as f64 / sr;
        *slot += 0.35 * bright * libm::exp(-t / 0.01);
    }
}

/// Renders the loop at 44.1 kHz mono, peak-normalized to 0.9. Hits that ring
/// past the end are cut at the loop length.
pub fn render_beat(spec: &BeatSpec) -> AudioBuffer {
    let sr = BEAT_SAMPLE_RATE as f64;
    let total = spec.sample_count();
    let mut out = alloc::vec![0.0f64; total];
    let step_s = 60.0 / (spec.tempo_bpm as f64 * 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for step in 0..spec.pattern.steps() {
        let start = libm::round(step as f64 * step_s * sr) as usize;
        if start >= total {
            break;
        }
        if spec.pattern.kick[step] {
            kick(&mut out, start, sr);
        }
        if spec.pattern.snare[step] {
            snare(&mut out, start, sr, &mut rng);
        }
        if spec.pattern.hat[step] {
            hat(&mut out, start, sr, &mut rng);
        }
    }
    let peak = out.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let gain = PEAK_LEVEL / peak;
        for s in &mut out {
            *s *= gain;
        }
    }
    AudioBuffer { samples: out, sample_rate_hz: BEAT_SAMPLE_RATE }
}

/// Prompt straight to WAV bytes.
pub fn render_prompt_wav(prompt: &str) -> (BeatSpec, Vec<u8>) {
    let spec = parse_beat_prompt(prompt);
    let wav = crate::wav::encode_pcm16(&render_beat(&spec));
    (spec, wav)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hits(v: &[bool]) -> Vec<usize> {
        v.iter().enumerate().filter(|(_, h)| **h).map(|(i, _)| i).collect()
    }

    #[test]
    fn four_on_the_floor_prompt() {
        let spec = parse_beat_prompt("120 bpm four on the floor, 4 beats");
        assert_eq!(spec.tempo_bpm, 120);
        assert_eq!(spec.beats, 4);
        assert_eq!(hits(&spec.pattern.kick), alloc::vec![0, 4, 8, 12]);
        assert!(spec.is_valid());
    }

    #[test]
    fn empty_prompt_defaults() {
        let spec = parse_beat_prompt("");
        assert_eq!(spec, BeatSpec::default());
        assert_eq!((spec.tempo_bpm, spec.beats, spec.preset), (120, 8, Preset::Backbeat));
    }

    #[test]
    fn boom_bap_prompt() {
        let spec = parse_beat_prompt("90 bpm boom bap");
        assert_eq!(spec.tempo_bpm, 90);
        assert_eq!(spec.preset, Preset::BoomBap);
        assert_eq!(hits(&spec.pattern.kick)[..3], [0, 7, 10]);
    }

    #[test]
    fn prompt_variants() {
        assert_eq!(parse_beat_prompt("a 100bpm house groove").tempo_bpm, 100);
        assert_eq!(parse_beat_prompt("house").preset, Preset::House);
        assert_eq!(parse_beat_prompt("Hip-Hop").preset, Preset::HipHop);
        assert_eq!(parse_beat_prompt("just hats").preset, Preset::Hats);
        assert_eq!(parse_beat_prompt("1000 bpm").tempo_bpm, MAX_TEMPO);
        assert_eq!(parse_beat_prompt("10 bpm").tempo_bpm, MIN_TEMPO);
        assert_eq!(parse_beat_prompt("seed 7").seed, 7);
        assert_eq!(parse_beat_prompt("6 beats").pattern.steps(), 24);
    }

    #[test]
    fn duration_is_exact() {
        let spec = parse_beat_prompt("120 bpm four on the floor, 4 beats");
        let buf = render_beat(&spec);
        // 4 beats * 60 / 120 = 2.0 s
        assert_eq!(buf.samples.len(), 88_200);
        let odd = BeatSpec::new(97, 5, Preset::HipHop, 3);
        assert_eq!(render_beat(&odd).samples.len(), libm::round(5.0 * 60.0 / 97.0 * 44_100.0) as usize);
    }

    #[test]
    fn deterministic_and_normalized() {
        let spec = parse_beat_prompt("house 128 bpm");
        let a = render_beat(&spec);
        let b = render_beat(&spec);
        assert_eq!(a, b);
        let peak = a.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((peak - PEAK_LEVEL).abs() < 1e-9);
        assert_eq!(spec.content_id(), parse_beat_prompt("house 128 bpm").content_id());
        assert_ne!(spec.content_id(), parse_beat_prompt("house 129 bpm").content_id());
    }

    #[test]
    fn single_kick_energy_stays_in_first_150ms() {
        let mut spec = BeatSpec::new(120, 4, Preset::Hats, 0);
        spec.pattern = Pattern {
            kick: (0..16).map(|s| s == 0).collect(),
            snare: alloc::vec![false; 16],
            hat: alloc::vec![false; 16],
        };
        assert!(spec.is_valid());
        let buf = render_beat(&spec);
        let cut = (0.150 * 44_100.0) as usize;
        let head: f64 = buf.samples[..cut].iter().map(|s| s * s).sum();
        let tail: f64 = buf.samples[cut..].iter().map(|s| s * s).sum();
        assert!(head > 0.0);
        assert!(tail <= head * 1e-9, "head {head} tail {tail}");
    }

    #[test]
    fn empty_grid_is_invalid() {
        let mut spec = BeatSpec { pattern: Pattern::from_preset(Preset::Hats, 32), ..BeatSpec::default() };
        spec.pattern.hat.iter_mut().for_each(|h| *h = false);
        assert!(!spec.is_valid());
    }
}
