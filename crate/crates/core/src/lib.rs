//! Core of the natural-language DAW assistant: a virtual session engine with
//! atomic, undoable transactions; a reversible edit-script language; unit
//! conversion for FX parameters; hum-to-MIDI transcription; and a procedural
//! beat synthesizer.
//!
//! Everything here is pure computation over byte buffers and values, so the
//! crate is `no_std` and only needs an allocator.

#![no_std]

extern crate alloc;

pub mod beat;
pub mod engine;
pub mod fuzz;
pub mod hum;
pub mod planner;
pub mod script;
pub mod smf;
pub mod units;
pub mod wav;
