//! RIFF/WAVE reading and writing.
//!
//! Reads 16-bit PCM and 32-bit float (plain or `WAVE_FORMAT_EXTENSIBLE`),
//! downmixing any channel count to mono. Writes 16-bit PCM mono.

use alloc::vec::Vec;

use thiserror::Error;

use crate::hum::AudioBuffer;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xfffe;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WavError {
    #[error("malformed wav: {0}")]
    MalformedWav(&'static str),
    #[error("unsupported encoding: format {format}, {bits} bits")]
    UnsupportedEncoding { format: u16, bits: u16 },
}

fn u16_at(b: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_le_bytes(b.get(at..at + 2)?.try_into().ok()?))
}

fn u32_at(b: &[u8], at: usize) -> Option<u32> {
    Some(u32::from_le_bytes(b.get(at..at + 4)?.try_into().ok()?))
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

pub fn decode(bytes: &[u8]) -> Result<AudioBuffer, WavError> {
    use WavError::MalformedWav;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(MalformedWav("missing RIFF/WAVE header"));
    }
    let mut fmt: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4).ok_or(MalformedWav("chunk header"))? as usize;
        let body_start = at + 8;
        let body_end = body_start.checked_add(size).ok_or(MalformedWav("chunk size"))?;
        if body_end > bytes.len() {
            return Err(MalformedWav("chunk runs past end of file"));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(MalformedWav("fmt chunk too short"));
                }
                let mut tag = u16_at(body, 0).unwrap_or(0);
                if tag == FORMAT_EXTENSIBLE {
                    // sub-format GUID starts at offset 24; its first two bytes are the real tag
                    tag = u16_at(body, 24).ok_or(MalformedWav("extensible fmt chunk too short"))?;
                }
                fmt = Some(Format {
                    tag,
                    channels: u16_at(body, 2).unwrap_or(0),
                    sample_rate: u32_at(body, 4).unwrap_or(0),
                    bits: u16_at(body, 14).unwrap_or(0),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        at = body_end + (size & 1);
    }
    let fmt = fmt.ok_or(MalformedWav("no fmt chunk"))?;
    let data = data.ok_or(MalformedWav("no data chunk"))?;
    if fmt.channels == 0 || fmt.sample_rate == 0 {
        return Err(MalformedWav("zero channels or sample rate"));
    }
    let channels = fmt.channels as usize;
    let samples = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => {
            downmix(data.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0), channels)
        }
        (FORMAT_FLOAT, 32) => {
            downmix(data.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64), channels)
        }
        (format, bits) => return Err(WavError::UnsupportedEncoding { format, bits }),
    };
    Ok(AudioBuffer { samples, sample_rate_hz: fmt.sample_rate })
}

fn downmix(values: impl Iterator<Item = f64>, channels: usize) -> Vec<f64> {
    let all: Vec<f64> = values.collect();
    if channels == 1 {
        return all;
    }
    all.chunks_exact(channels).map(|frame| frame.iter().sum::<f64>() / channels as f64).collect()
}

/// 16-bit PCM mono. Samples are clamped to [-1, 1].
pub fn encode_pcm16(buffer: &AudioBuffer) -> Vec<u8> {
    encode_pcm16_channels(&buffer.samples, buffer.sample_rate_hz, 1)
}

/// 16-bit PCM with `channels` identical copies of each sample.
pub fn encode_pcm16_channels(samples: &[f64], sample_rate: u32, channels: u16) -> Vec<u8> {
    let block_align = 2 * channels as u32;
    let data_len = samples.len() as u32 * block_align;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        let v = libm::round(s.clamp(-1.0, 1.0) * 32767.0) as i16;
        for _ in 0..channels {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// 32-bit float mono.
pub fn encode_f32(buffer: &AudioBuffer) -> Vec<u8> {
    let data_len = buffer.samples.len() as u32 * 4;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_FLOAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate_hz * 4).to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &buffer.samples {
        out.extend_from_slice(&(*s as f32).to_le_bytes());
    }
    out
}
