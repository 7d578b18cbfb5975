use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::TransportAction;
use crate::units::UnitKind;

/// A parsed edit script: one statement per non-empty line.
#[derive(Debug, Clone, PartialEq)]
pub struct EditScript {
    pub statements: Vec<Statement>,
    /// 1-based source line of each statement.
    pub lines: Vec<u32>,
    pub source_text: String,
}

impl EditScript {
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Canonical text: reparsing it yields the same statements.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for s in &self.statements {
            out.push_str(&alloc::format!("{s}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackSel {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FxSel {
    Index(usize),
    Name(String),
}

/// A number with an optional unit, already scaled to the canonical kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Option<UnitKind>,
}

impl Quantity {
    pub fn plain(value: f64) -> Self {
        Quantity { value, unit: None }
    }

    pub fn with(value: f64, unit: UnitKind) -> Self {
        Quantity { value, unit: Some(unit) }
    }
}

/// How a statement changes a numeric field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amount {
    /// Absolute target.
    Set(Quantity),
    /// Offset from the current value (`by +3dB`).
    By(Quantity),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolumeChange {
    Amount(Amount),
    /// +20·log10(2) dB.
    Double,
    /// −20·log10(2) dB.
    Halve,
    /// Relative gain of 20·log10(percent/100) dB.
    Blend(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamChange {
    Amount(Amount),
    /// Raw slider position.
    Normalized(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UiHintKind {
    OpenFxBrowser,
}

impl UiHintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UiHintKind::OpenFxBrowser => "open_fx_browser",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    AddTrack { name: String, at: Option<usize> },
    DuplicateTrack { track: TrackSel },
    SetVolume { track: TrackSel, change: VolumeChange, clamp: bool },
    SetPan { track: TrackSel, amount: Amount, clamp: bool },
    SetMute { track: TrackSel, mute: bool },
    AddFx { track: TrackSel, fx_name: String },
    SetFxParam { track: TrackSel, fx: FxSel, param: String, change: ParamChange, clamp: bool },
    SetItemPitch { track: TrackSel, item: usize, amount: Amount },
    ImportMidi { name: String, source: String, length: Quantity, position: Option<Quantity> },
    ImportAudio { name: String, source: String, length: Quantity, position: Option<Quantity> },
    GenerateBeatTrack { prompt: String, name: Option<String> },
    Transport { action: TransportAction },
    UiHint { hint: UiHintKind, track: TrackSel },
}

impl Statement {
    pub fn verb(&self) -> &'static str {
        match self {
            Statement::AddTrack { .. } => "add_track",
            Statement::DuplicateTrack { .. } => "duplicate_track",
            Statement::SetVolume { .. } => "set_volume",
            Statement::SetPan { .. } => "set_pan",
            Statement::SetMute { .. } => "set_mute",
            Statement::AddFx { .. } => "add_fx",
            Statement::SetFxParam { .. } => "set_fx_param",
            Statement::SetItemPitch { .. } => "set_item_pitch",
            Statement::ImportMidi { .. } => "import_midi",
            Statement::ImportAudio { .. } => "import_audio",
            Statement::GenerateBeatTrack { .. } => "generate_beat_track",
            Statement::Transport { .. } => "transport",
            Statement::UiHint { .. } => "ui_hint",
        }
    }
}

pub(crate) fn write_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// `s` as a script string literal, quotes and escapes included.
pub fn quote(s: &str) -> String {
    struct Quoted<'a>(&'a str);
    impl fmt::Display for Quoted<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write_string(f, self.0)
        }
    }
    alloc::format!("{}", Quoted(s))
}

impl fmt::Display for TrackSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackSel::Index(i) => write!(f, "#{i}"),
            TrackSel::Name(n) => write_string(f, n),
        }
    }
}

impl fmt::Display for FxSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FxSel::Index(i) => write!(f, "{i}"),
            FxSel::Name(n) => write_string(f, n),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        match self.unit {
            None | Some(UnitKind::Raw) => Ok(()),
            Some(kind) => f.write_str(kind.symbol()),
        }
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amount::Set(q) => write!(f, "{q}"),
            Amount::By(q) => {
                if q.value >= 0.0 && q.value.is_sign_positive() {
                    write!(f, "by +{q}")
                } else {
                    write!(f, "by {q}")
                }
            }
        }
    }
}

fn clamp_suffix(clamp: bool) -> &'static str {
    if clamp {
        " clamp"
    } else {
        ""
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.verb())?;
        f.write_str(" ")?;
        match self {
            Statement::AddTrack { name, at } => {
                write_string(f, name)?;
                if let Some(at) = at {
                    write!(f, " at:{at}")?;
                }
                Ok(())
            }
            Statement::DuplicateTrack { track } => write!(f, "{track}"),
            Statement::SetVolume { track, change, clamp } => {
                write!(f, "{track} ")?;
                match change {
                    VolumeChange::Amount(a) => write!(f, "{a}")?,
                    VolumeChange::Double => f.write_str("double")?,
                    VolumeChange::Halve => f.write_str("halve")?,
                    VolumeChange::Blend(p) => write!(f, "blend:{p}%")?,
                }
                f.write_str(clamp_suffix(*clamp))
            }
            Statement::SetPan { track, amount, clamp } => {
                write!(f, "{track} {amount}{}", clamp_suffix(*clamp))
            }
            Statement::SetMute { track, mute } => {
                write!(f, "{track} {}", if *mute { "on" } else { "off" })
            }
            Statement::AddFx { track, fx_name } => {
                write!(f, "{track} ")?;
                write_string(f, fx_name)
            }
            Statement::SetFxParam { track, fx, param, change, clamp } => {
                write!(f, "{track} fx:{fx} param:")?;
                write_string(f, param)?;
                match change {
                    ParamChange::Amount(a) => write!(f, " {a}")?,
                    ParamChange::Normalized(n) => write!(f, " norm:{n}")?,
                }
                f.write_str(clamp_suffix(*clamp))
            }
            Statement::SetItemPitch { track, item, amount } => {
                write!(f, "{track} item:{item} {amount}")
            }
            Statement::ImportMidi { name, source, length, position }
            | Statement::ImportAudio { name, source, length, position } => {
                write_string(f, name)?;
                f.write_str(" src:")?;
                write_string(f, source)?;
                write!(f, " len:{length}")?;
                if let Some(p) = position {
                    write!(f, " at:{p}")?;
                }
                Ok(())
            }
            Statement::GenerateBeatTrack { prompt, name } => {
                write_string(f, prompt)?;
                if let Some(name) = name {
                    f.write_str(" name:")?;
                    write_string(f, name)?;
                }
                Ok(())
            }
            Statement::Transport { action } => f.write_str(action.as_str()),
            Statement::UiHint { hint, track } => write!(f, "{} {track}", hint.as_str()),
        }
    }
}
