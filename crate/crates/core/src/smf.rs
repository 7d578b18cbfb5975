//! Standard MIDI File encoding (format 0) and a reader for imports.

use alloc::vec::Vec;

use thiserror::Error;

use crate::hum::NoteEvent;

pub const DEFAULT_PPQ: u16 = 480;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmfError {
    #[error("malformed midi: {0}")]
    MalformedMidi(&'static str),
}

/// Appends `value` as a MIDI variable-length quantity (7 bits per byte, MSB first).
pub fn write_vlq(out: &mut Vec<u8>, value: u32) {
    let value = value & 0x0fff_ffff;
    let mut buf = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        buf[n] = (v & 0x7f) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Reads a VLQ at `*pos`, advancing it.
pub fn read_vlq(bytes: &[u8], pos: &mut usize) -> Result<u32, SmfError> {
    let mut value = 0u32;
    for _ in 0..4 {
        let b = *bytes.get(*pos).ok_or(SmfError::MalformedMidi("truncated variable-length value"))?;
        *pos += 1;
        value = (value << 7) | (b & 0x7f) as u32;
        if b & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(SmfError::MalformedMidi("variable-length value longer than 4 bytes"))
}

pub fn seconds_to_ticks(seconds: f64, ppq: u16, tempo_bpm: f64) -> u32 {
    libm::round(seconds * ppq as f64 * tempo_bpm / 60.0).max(0.0) as u32
}

/// Format 0, one track: tempo meta, note on/off pairs, end of track.
/// At equal ticks note-offs precede note-ons.
pub fn write_smf(notes: &[NoteEvent], ppq: u16, tempo_bpm: f64) -> Vec<u8> {
    // (tick, order, status, pitch, velocity)
    let mut events: Vec<(u32, u8, u8, u8, u8)> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        let on = seconds_to_ticks(n.onset_s, ppq, tempo_bpm);
        let off = seconds_to_ticks(n.onset_s + n.duration_s, ppq, tempo_bpm).max(on + 1);
        let pitch = n.midi_pitch.min(127);
        events.push((on, 1, 0x90, pitch, n.velocity.clamp(1, 127)));
        events.push((off, 0, 0x80, pitch, 0));
    }
    events.sort_by_key(|e| (e.0, e.1));

    let mut track = Vec::new();
    let micros = libm::round(60_000_000.0 / tempo_bpm) as u32;
    write_vlq(&mut track, 0);
    track.extend_from_slice(&[0xff, 0x51, 0x03]);
    track.extend_from_slice(&micros.to_be_bytes()[1..]);
    let mut last = 0u32;
    for (tick, _, status, pitch, vel) in events {
        write_vlq(&mut track, tick - last);
        last = tick;
        track.extend_from_slice(&[status, pitch, vel]);
    }
    write_vlq(&mut track, 0);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&ppq.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

/// What an import needs to know about a MIDI file.
#[derive(Debug, Clone, PartialEq)]
pub struct SmfSummary {
    pub format: u16,
    pub tracks: u16,
    pub ppq: u16,
    pub notes: Vec<NoteEvent>,
    /// Time of the last event of any track, in seconds.
    pub length_s: f64,
}

/// Parses formats 0 and 1 with metrical timing, honoring tempo changes.
pub fn read_smf(bytes: &[u8]) -> Result<SmfSummary, SmfError> {
    use SmfError::MalformedMidi;
    let be16 = |at: usize| -> Result<u16, SmfError> {
        Ok(u16::from_be_bytes(bytes.get(at..at + 2).ok_or(MalformedMidi("truncated header"))?.try_into().unwrap()))
    };
    if bytes.len() < 14 || &bytes[0..4] != b"MThd" {
        return Err(MalformedMidi("missing MThd header"));
    }
    let header_len = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if header_len < 6 {
        return Err(MalformedMidi("header chunk too short"));
    }
    let format = be16(8)?;
    let ntracks = be16(10)?;
    let division = be16(12)?;
    if division & 0x8000 != 0 || division == 0 {
        return Err(MalformedMidi("only metrical (ticks per quarter) timing is supported"));
    }
    if format > 1 {
        return Err(MalformedMidi("only formats 0 and 1 are supported"));
    }

    // raw events across tracks: (tick, kind)
    let mut tempo_changes: Vec<(u64, u32)> = Vec::new();
    let mut raw_notes: Vec<(u64, u64, u8, u8)> = Vec::new();
    let mut last_tick = 0u64;
    let mut at = 8 + header_len;
    let mut seen = 0u16;
    while seen < ntracks {
        let head = bytes.get(at..at + 8).ok_or(MalformedMidi("missing track chunk"))?;
        let len = u32::from_be_bytes(head[4..8].try_into().unwrap()) as usize;
        let start = at + 8;
        let end = start.checked_add(len).filter(|e| *e <= bytes.len()).ok_or(MalformedMidi("track runs past end"))?;
        if &head[0..4] != b"MTrk" {
            at = end;
            continue;
        }
        seen += 1;
        let body = &bytes[start..end];
        let mut pos = 0usize;
        let mut tick = 0u64;
        let mut running: Option<u8> = None;
        let mut open: Vec<(u8, u64, u8)> = Vec::new();
        let mut ended = false;
        while pos < body.len() {
            tick += read_vlq(body, &mut pos)? as u64;
            last_tick = last_tick.max(tick);
            let first = *body.get(pos).ok_or(MalformedMidi("truncated event"))?;
            let status = if first & 0x80 != 0 {
                pos += 1;
                first
            } else {
                running.ok_or(MalformedMidi("running status without a prior status"))?
            };
            match status {
                0xff => {
                    let kind = *body.get(pos).ok_or(MalformedMidi("truncated meta event"))?;
                    pos += 1;
                    let mlen = read_vlq(body, &mut pos)? as usize;
                    let data = body.get(pos..pos + mlen).ok_or(MalformedMidi("truncated meta data"))?;
                    pos += mlen;
                    match kind {
                        0x51 if mlen == 3 => {
                            let micros = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                            if micros == 0 {
                                return Err(MalformedMidi("zero tempo"));
                            }
                            tempo_changes.push((tick, micros));
                        }
                        0x2f => {
                            ended = true;
                            break;
                        }
                        _ => {}
                    }
                }
                0xf0 | 0xf7 => {
                    let slen = read_vlq(body, &mut pos)? as usize;
                    pos = pos.checked_add(slen).filter(|p| *p <= body.len()).ok_or(MalformedMidi("truncated sysex"))?;
                }
                0x80..=0xef => {
                    running = Some(status);
                    let data_len = if matches!(status & 0xf0, 0xc0 | 0xd0) { 1 } else { 2 };
                    let data = body.get(pos..pos + data_len).ok_or(MalformedMidi("truncated channel event"))?;
                    pos += data_len;
                    if data.iter().any(|b| b & 0x80 != 0) {
                        return Err(MalformedMidi("data byte with high bit set"));
                    }
                    let (kind, pitch) = (status & 0xf0, data[0]);
                    let velocity = data.get(1).copied().unwrap_or(0);
                    if kind == 0x90 && velocity > 0 {
                        open.push((pitch, tick, velocity));
                    } else if kind == 0x80 || kind == 0x90 {
                        if let Some(i) = open.iter().position(|(p, _, _)| *p == pitch) {
                            let (p, on, vel) = open.remove(i);
                            raw_notes.push((on, tick, p, vel));
                        }
                    }
                }
                _ => return Err(MalformedMidi("unexpected status byte")),
            }
        }
        if !ended {
            return Err(MalformedMidi("track without end-of-track event"));
        }
        at = end;
    }

    tempo_changes.sort_by_key(|t| t.0);
    let to_seconds = |tick: u64| -> f64 {
        let mut seconds = 0.0;
        let mut cursor = 0u64;
        let mut micros = 500_000u32;
        for &(at, m) in &tempo_changes {
            if at >= tick {
                break;
            }
            seconds += (at - cursor) as f64 * micros as f64 / (division as f64 * 1e6);
            cursor = at;
            micros = m;
        }
        seconds + (tick - cursor) as f64 * micros as f64 / (division as f64 * 1e6)
    };
    raw_notes.sort_by_key(|n| (n.0, n.2));
    let notes = raw_notes
        .iter()
        .map(|&(on, off, pitch, velocity)| {
            let onset_s = to_seconds(on);
            NoteEvent { onset_s, duration_s: to_seconds(off) - onset_s, midi_pitch: pitch, velocity }
        })
        .collect();
    Ok(SmfSummary { format, tracks: ntracks, ppq: division, notes, length_s: to_seconds(last_tick) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn note(onset_s: f64, duration_s: f64, midi_pitch: u8) -> NoteEvent {
        NoteEvent { onset_s, duration_s, midi_pitch, velocity: 96 }
    }

    #[test]
    fn vlq_reference_values() {
        // values from the SMF 1.0 specification table
        let cases: &[(u32, &[u8])] = &[
            (0x00, &[0x00]),
            (0x40, &[0x40]),
            (0x7f, &[0x7f]),
            (0x80, &[0x81, 0x00]),
            (0x2000, &[0xc0, 0x00]),
            (0x3fff, &[0xff, 0x7f]),
            (0x4000, &[0x81, 0x80, 0x00]),
            (0x10_0000, &[0xc0, 0x80, 0x00]),
            (0x1f_ffff, &[0xff, 0xff, 0x7f]),
            (0x20_0000, &[0x81, 0x80, 0x80, 0x00]),
            (0x0fff_ffff, &[0xff, 0xff, 0xff, 0x7f]),
        ];
        for (value, encoded) in cases {
            let mut out = Vec::new();
            write_vlq(&mut out, *value);
            assert_eq!(&out[..], *encoded, "{value:#x}");
            let mut pos = 0;
            assert_eq!(read_vlq(encoded, &mut pos).unwrap(), *value);
        }
    }

    #[test]
    fn empty_file_structure() {
        let bytes = write_smf(&[], DEFAULT_PPQ, 120.0);
        let expected: &[u8] = &[
            b'M', b'T', b'h', b'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0, //
            b'M', b'T', b'r', b'k', 0, 0, 0, 11, //
            0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20, //
            0x00, 0xff, 0x2f, 0x00,
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn one_second_note_is_960_ticks() {
        let bytes = write_smf(&[note(0.0, 1.0, 69)], DEFAULT_PPQ, 120.0);
        // track body after the tempo event: on at delta 0, off at delta 960 (0x87 0x40)
        let body = &bytes[22 + 7..];
        assert_eq!(&body[..4], &[0x00, 0x90, 69, 96]);
        assert_eq!(&body[4..9], &[0x87, 0x40, 0x80, 69, 0]);
        let summary = read_smf(&bytes).unwrap();
        assert_eq!(summary.length_s, 1.0);
        assert_eq!(summary.notes, alloc::vec![note(0.0, 1.0, 69)]);
    }

    #[test]
    fn reader_rejects_garbage() {
        assert!(read_smf(b"MThd").is_err());
        let mut bytes = write_smf(&[note(0.0, 1.0, 60)], DEFAULT_PPQ, 120.0);
        bytes.truncate(bytes.len() - 3);
        assert!(read_smf(&bytes).is_err());
        assert!(read_smf(&[0u8; 40]).is_err());
    }

    #[test]
    fn reader_handles_tempo_changes_and_running_status() {
        // format 0, ppq 96: tempo 120, note on, running-status note on(vel 0) after 96 ticks,
        // tempo 60, another 96 ticks, end
        let mut track = Vec::new();
        track.extend_from_slice(&[0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20]);
        track.extend_from_slice(&[0x00, 0x90, 60, 100]);
        track.extend_from_slice(&[0x60, 60, 0]);
        track.extend_from_slice(&[0x00, 0xff, 0x51, 0x03, 0x0f, 0x42, 0x40]);
        track.extend_from_slice(&[0x60, 0xff, 0x2f, 0x00]);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"MThd\0\0\0\x06\0\0\0\x01\0\x60MTrk");
        bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&track);
        let s = read_smf(&bytes).unwrap();
        assert_eq!(s.notes.len(), 1);
        assert_eq!(s.notes[0].duration_s, 0.5);
        assert_eq!(s.length_s, 1.5);
    }

    proptest! {
        #[test]
        fn vlq_round_trip(v in 0u32..0x1000_0000) {
            let mut out = Vec::new();
            write_vlq(&mut out, v);
            prop_assert!(out.len() <= 4);
            prop_assert!(out[..out.len() - 1].iter().all(|b| b & 0x80 != 0));
            prop_assert_eq!(out[out.len() - 1] & 0x80, 0);
            let mut pos = 0;
            prop_assert_eq!(read_vlq(&out, &mut pos).unwrap(), v);
            prop_assert_eq!(pos, out.len());
        }

        #[test]
        fn reader_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = read_smf(&bytes);
        }
    }
}
