//! Monophonic hum transcription: framewise pitch, note segmentation, SMF.
//!
//! Pitch comes from the normalized autocorrelation
//!
//! ```text
//! r(τ) = Σ x[i]·x[i+τ] / sqrt(Σ x[i]² · Σ x[i+τ]²)
//! ```
//!
//! searched over lags for 50–1500 Hz. The chosen lag is the first local
//! maximum that reaches 90% of the best peak, which keeps a pure tone from
//! locking onto a multiple of its period. Parabolic interpolation refines the
//! lag; the peak height is the voicing confidence.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smf::{write_smf, DEFAULT_PPQ};
use crate::wav::{self, WavError};

pub const MIN_F0_HZ: f64 = 50.0;
pub const MAX_F0_HZ: f64 = 1500.0;
pub const MIN_SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HumError {
    #[error("window of {len} samples is shorter than the {needed} needed")]
    WindowTooShort { len: usize, needed: usize },
    #[error("sample rate {0} Hz is below {MIN_SAMPLE_RATE} Hz")]
    SampleRateTooLow(u32),
    #[error("audio buffer is empty")]
    EmptyBuffer,
    #[error(transparent)]
    Wav(#[from] WavError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchEstimate {
    /// 0 when unvoiced.
    pub f0_hz: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchFrame {
    pub time_s: f64,
    pub f0_hz: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub hop_s: f64,
    pub frames: Vec<PitchFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub onset_s: f64,
    pub duration_s: f64,
    pub midi_pitch: u8,
    pub velocity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchParams {
    pub min_f0_hz: f64,
    pub max_f0_hz: f64,
    pub voicing_threshold: f64,
    pub hop_s: f64,
    pub window_s: f64,
    /// Width of the median filter over the f0 sequence; 1 disables it.
    pub median_width: usize,
}

impl Default for PitchParams {
    fn default() -> Self {
        PitchParams {
            min_f0_hz: MIN_F0_HZ,
            max_f0_hz: MAX_F0_HZ,
            voicing_threshold: 0.5,
            hop_s: 0.010,
            window_s: 0.040,
            median_width: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub min_note_s: f64,
    /// Unvoiced gaps shorter than this between equal pitches are bridged.
    pub max_gap_s: f64,
    pub velocity: u8,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams { min_note_s: 0.08, max_gap_s: 0.03, velocity: 96 }
    }
}

pub fn hz_to_midi(f0_hz: f64) -> f64 {
    69.0 + 12.0 * libm::log2(f0_hz / 440.0)
}

pub fn midi_to_hz(midi: f64) -> f64 {
    440.0 * libm::pow(2.0, (midi - 69.0) / 12.0)
}

/// Minimum window for a detector covering `min_f0_hz`: two of its periods.
pub fn min_window_len(sample_rate: u32, min_f0_hz: f64) -> usize {
    libm::ceil(2.0 * sample_rate as f64 / min_f0_hz) as usize
}

pub fn detect_pitch_frame(window: &[f64], sample_rate: u32) -> Result<PitchEstimate, HumError> {
    detect_pitch_frame_with(window, sample_rate, &PitchParams::default())
}

pub fn detect_pitch_frame_with(
    window: &[f64],
    sample_rate: u32,
    params: &PitchParams,
) -> Result<PitchEstimate, HumError> {
    // floor(2·sr/min_f0) keeps a 40 ms window valid at any sample rate
    let needed = (2.0 * sample_rate as f64 / params.min_f0_hz) as usize;
    if window.len() < needed {
        return Err(HumError::WindowTooShort { len: window.len(), needed });
    }
    let unvoiced = PitchEstimate { f0_hz: 0.0, confidence: 0.0 };
    let n = window.len();
    let energy: f64 = window.iter().map(|x| x * x).sum();
    if energy <= 1e-12 * n as f64 {
        return Ok(unvoiced);
    }

    let sr = sample_rate as f64;
    let min_lag = libm::floor(sr / params.max_f0_hz).max(2.0) as usize;
    let max_lag = (libm::ceil(sr / params.min_f0_hz) as usize).min(n - 2);

    // prefix sums of x² give each lag's normalizer in O(1)
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    for x in window {
        let last = *prefix.last().unwrap_or(&0.0);
        prefix.push(last + x * x);
    }
    let lo = min_lag - 1;
    let hi = max_lag + 1;
    let mut nacf = alloc::vec![0.0f64; hi - lo + 1];
    for (slot, lag) in nacf.iter_mut().zip(lo..=hi) {
        let m = n - lag;
        let cross: f64 = window[..m].iter().zip(&window[lag..]).map(|(a, b)| a * b).sum();
        let head = prefix[m];
        let tail = prefix[n] - prefix[lag];
        let denom = libm::sqrt(head * tail);
        *slot = if denom > 0.0 { cross / denom } else { 0.0 };
    }

    // local maxima strictly inside [lo, hi]
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for k in 1..nacf.len() - 1 {
        if nacf[k] > 0.0 && nacf[k] >= nacf[k - 1] && nacf[k] > nacf[k + 1] {
            peaks.push((k, nacf[k]));
        }
    }
    let best = peaks.iter().map(|p| p.1).fold(0.0f64, f64::max);
    if best <= 0.0 {
        return Ok(unvoiced);
    }
    let Some(&(k, height)) = peaks.iter().find(|p| p.1 >= 0.9 * best) else {
        return Ok(unvoiced);
    };

    let (a, b, c) = (nacf[k - 1], nacf[k], nacf[k + 1]);
    let curvature = a - 2.0 * b + c;
    let offset = if curvature < 0.0 { (0.5 * (a - c) / curvature).clamp(-0.5, 0.5) } else { 0.0 };
    let lag = (lo + k) as f64 + offset;
    let refined = b - 0.25 * (a - c) * offset;
    let confidence = refined.clamp(0.0, 1.0);
    let f0 = sr / lag;

    if confidence < params.voicing_threshold || f0 < params.min_f0_hz || f0 > params.max_f0_hz {
        return Ok(PitchEstimate { f0_hz: 0.0, confidence: height.clamp(0.0, 1.0) });
    }
    Ok(PitchEstimate { f0_hz: f0, confidence })
}

/// Runs the detector every `hop_s` over `window_s` windows. Frame times are
/// window centers.
pub fn track_pitch(buffer: &AudioBuffer) -> Result<PitchTrack, HumError> {
    track_pitch_with(buffer, &PitchParams::default())
}

pub fn track_pitch_with(buffer: &AudioBuffer, params: &PitchParams) -> Result<PitchTrack, HumError> {
    if buffer.sample_rate_hz < MIN_SAMPLE_RATE {
        return Err(HumError::SampleRateTooLow(buffer.sample_rate_hz));
    }
    let sr = buffer.sample_rate_hz as f64;
    let window = libm::round(params.window_s * sr) as usize;
    let hop = (libm::round(params.hop_s * sr) as usize).max(1);
    let mut frames = Vec::new();
    if buffer.samples.len() >= window {
        let count = (buffer.samples.len() - window) / hop + 1;
        for i in 0..count {
            let start = i * hop;
            let est = detect_pitch_frame_with(&buffer.samples[start..start + window], buffer.sample_rate_hz, params)?;
            frames.push(PitchFrame {
                time_s: (start as f64 + window as f64 / 2.0) / sr,
                f0_hz: est.f0_hz,
                confidence: est.confidence,
            });
        }
    }
    median_filter(&mut frames, params.median_width);
    Ok(PitchTrack { hop_s: hop as f64 / sr, frames })
}

fn median_filter(frames: &mut [PitchFrame], width: usize) {
    if width < 3 || frames.len() < width {
        return;
    }
    let half = width / 2;
    let original: Vec<f64> = frames.iter().map(|f| f.f0_hz).collect();
    let mut scratch = Vec::with_capacity(width);
    for i in half..frames.len() - half {
        scratch.clear();
        scratch.extend_from_slice(&original[i - half..=i + half]);
        scratch.sort_by(|a, b| a.total_cmp(b));
        frames[i].f0_hz = scratch[half];
    }
}

/// Groups voiced frames into notes of constant rounded MIDI pitch.
pub fn segment_notes(track: &PitchTrack, params: &SegmentParams) -> Vec<NoteEvent> {
    // runs of (pitch, first frame, last frame)
    let mut runs: Vec<(u8, usize, usize)> = Vec::new();
    for (i, frame) in track.frames.iter().enumerate() {
        if frame.f0_hz <= 0.0 {
            continue;
        }
        let pitch = libm::round(hz_to_midi(frame.f0_hz)).clamp(0.0, 127.0) as u8;
        match runs.last_mut() {
            Some(run) if run.0 == pitch && run.2 + 1 == i => run.2 = i,
            Some(run) if run.0 == pitch => {
                let gap = (i - run.2 - 1) as f64 * track.hop_s;
                let unvoiced_between = track.frames[run.2 + 1..i].iter().all(|f| f.f0_hz <= 0.0);
                if unvoiced_between && gap < params.max_gap_s + 1e-9 {
                    run.2 = i;
                } else {
                    runs.push((pitch, i, i));
                }
            }
            _ => runs.push((pitch, i, i)),
        }
    }
    runs.into_iter()
        .filter_map(|(pitch, first, last)| {
            let onset = (track.frames[first].time_s - track.hop_s / 2.0).max(0.0);
            let offset = track.frames[last].time_s + track.hop_s / 2.0;
            let duration = offset - onset;
            (duration + 1e-9 >= params.min_note_s).then_some(NoteEvent {
                onset_s: onset,
                duration_s: duration,
                midi_pitch: pitch,
                velocity: params.velocity,
            })
        })
        .collect()
}

/// Notes from a buffer with default parameters.
pub fn transcribe(buffer: &AudioBuffer) -> Result<Vec<NoteEvent>, HumError> {
    if buffer.samples.is_empty() {
        return Err(HumError::EmptyBuffer);
    }
    let track = track_pitch(buffer)?;
    Ok(segment_notes(&track, &SegmentParams::default()))
}

/// WAV bytes in, format-0 SMF bytes out (480 ppq, 120 bpm).
pub fn hum_to_midi(wav_bytes: &[u8]) -> Result<Vec<u8>, HumError> {
    let buffer = wav::decode(wav_bytes)?;
    let notes = transcribe(&buffer)?;
    Ok(write_smf(&notes, DEFAULT_PPQ, 120.0))
}
