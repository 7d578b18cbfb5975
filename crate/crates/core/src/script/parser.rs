//! LL(1) recursive-descent parser for edit scripts. The grammar is published
//! in `docs/edit-script.ebnf`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::engine::TransportAction;
use crate::units::{parse_unit_token, UnitKind};

/// Longest accepted script.
pub const MAX_SCRIPT_BYTES: usize = 64 * 1024;

pub fn parse(source: &str) -> Result<EditScript, ParseError> {
    if source.len() > MAX_SCRIPT_BYTES {
        return Err(ParseError {
            line: 1,
            col: 1,
            expected: alloc::format!("script of at most {MAX_SCRIPT_BYTES} bytes"),
            found: alloc::format!("{} bytes", source.len()),
        });
    }
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut statements = Vec::new();
    let mut lines = Vec::new();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Newline => {
                p.bump();
            }
            _ => {
                let line = p.current().line;
                statements.push(p.statement()?);
                lines.push(line);
                match p.peek() {
                    Tok::Newline => {
                        p.bump();
                    }
                    Tok::Eof => {}
                    _ => return Err(p.error("end of line")),
                }
            }
        }
    }
    Ok(EditScript { statements, lines, source_text: source.to_string() })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn current(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek(&self) -> &Tok {
        &self.current().tok
    }

    fn bump(&mut self) -> Tok {
        let tok = self.current().tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.current();
        ParseError { line: t.line, col: t.col, expected: expected.into(), found: t.tok.describe() }
    }

    fn peek_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(word))
    }

    fn keyword(&mut self, word: &str) -> Result<(), ParseError> {
        if self.peek_word(word) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&alloc::format!("'{word}'")))
        }
    }

    /// `word ':'`
    fn label(&mut self, word: &str) -> Result<(), ParseError> {
        self.keyword(word)?;
        self.colon()
    }

    fn colon(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek(), Tok::Colon) {
            self.bump();
            Ok(())
        } else {
            Err(self.error("':'"))
        }
    }

    fn string(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Str(_) => match self.bump() {
                Tok::Str(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.error(what)),
        }
    }

    fn index(&mut self, what: &str) -> Result<usize, ParseError> {
        match self.peek() {
            Tok::Num { text, .. } if text.bytes().all(|b| b.is_ascii_digit()) => {
                let parsed = text.parse::<usize>();
                match parsed {
                    Ok(v) => {
                        self.bump();
                        Ok(v)
                    }
                    Err(_) => Err(self.error(what)),
                }
            }
            _ => Err(self.error(what)),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Tok::Num { value, .. } => {
                let v = *value;
                self.bump();
                Ok(v)
            }
            _ => Err(self.error("number")),
        }
    }

    fn track(&mut self) -> Result<TrackSel, ParseError> {
        match self.peek() {
            Tok::TrackIndex(digits) => match digits.parse::<usize>() {
                Ok(i) => {
                    self.bump();
                    Ok(TrackSel::Index(i))
                }
                Err(_) => Err(self.error("track index that fits in memory")),
            },
            Tok::Str(_) => Ok(TrackSel::Name(self.string("track")?)),
            _ => Err(self.error("track selector ('#n' or quoted name)")),
        }
    }

    fn quantity(&mut self) -> Result<Quantity, ParseError> {
        let value = self.number()?;
        let unit = match self.peek() {
            Tok::Percent => {
                self.bump();
                Some((UnitKind::Percent, 1.0))
            }
            Tok::Word(w) => match parse_unit_token(w) {
                Some(u) if !w.eq_ignore_ascii_case("raw") => {
                    self.bump();
                    Some(u)
                }
                _ => None,
            },
            _ => None,
        };
        match unit {
            None => Ok(Quantity::plain(value)),
            Some((kind, scale)) => {
                let scaled = value * scale;
                if !scaled.is_finite() {
                    return Err(self.error("finite quantity"));
                }
                Ok(Quantity::with(scaled, kind))
            }
        }
    }

    fn amount(&mut self) -> Result<Amount, ParseError> {
        if self.peek_word("by") {
            self.bump();
            Ok(Amount::By(self.quantity()?))
        } else if matches!(self.peek(), Tok::Num { .. }) {
            Ok(Amount::Set(self.quantity()?))
        } else {
            Err(self.error("value ('by' offset or number)"))
        }
    }

    fn require_unit(&self, q: &Quantity, allowed: &[UnitKind], what: &str) -> Result<(), ParseError> {
        match q.unit {
            None => Ok(()),
            Some(u) if allowed.contains(&u) => Ok(()),
            Some(u) => Err(ParseError {
                line: self.current().line,
                col: self.current().col,
                expected: what.into(),
                found: alloc::format!("unit {}", u.symbol()),
            }),
        }
    }

    fn clamp(&mut self) -> bool {
        if self.peek_word("clamp") {
            self.bump();
            true
        } else {
            false
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let verb = match self.peek() {
            Tok::Word(w) => w.to_ascii_lowercase(),
            _ => return Err(self.error("verb")),
        };
        let verb_error = self.error(
            "verb (add_track, duplicate_track, set_volume, set_pan, set_mute, add_fx, set_fx_param, \
             set_item_pitch, import_midi, import_audio, generate_beat_track, transport, ui_hint)",
        );
        match verb.as_str() {
            "add_track" => {
                self.bump();
                let name = self.string("track name")?;
                let at = if self.peek_word("at") {
                    self.label("at")?;
                    Some(self.index("track index")?)
                } else {
                    None
                };
                Ok(Statement::AddTrack { name, at })
            }
            "duplicate_track" => {
                self.bump();
                Ok(Statement::DuplicateTrack { track: self.track()? })
            }
            "set_volume" => {
                self.bump();
                let track = self.track()?;
                let change = if self.peek_word("double") {
                    self.bump();
                    VolumeChange::Double
                } else if self.peek_word("halve") {
                    self.bump();
                    VolumeChange::Halve
                } else if self.peek_word("blend") {
                    self.label("blend")?;
                    let pct = self.number()?;
                    if !matches!(self.peek(), Tok::Percent) {
                        return Err(self.error("'%'"));
                    }
                    self.bump();
                    VolumeChange::Blend(pct)
                } else {
                    let a = self.amount()?;
                    let (Amount::Set(q) | Amount::By(q)) = a;
                    self.require_unit(&q, &[UnitKind::DecibelGain], "volume in dB")?;
                    VolumeChange::Amount(a)
                };
                Ok(Statement::SetVolume { track, change, clamp: self.clamp() })
            }
            "set_pan" => {
                self.bump();
                let track = self.track()?;
                let amount = self.amount()?;
                let (Amount::Set(q) | Amount::By(q)) = amount;
                self.require_unit(&q, &[UnitKind::Percent], "pan as -1..1 or percent")?;
                Ok(Statement::SetPan { track, amount, clamp: self.clamp() })
            }
            "set_mute" => {
                self.bump();
                let track = self.track()?;
                let mute = if self.peek_word("on") || self.peek_word("true") {
                    true
                } else if self.peek_word("off") || self.peek_word("false") {
                    false
                } else {
                    return Err(self.error("'on' or 'off'"));
                };
                self.bump();
                Ok(Statement::SetMute { track, mute })
            }
            "add_fx" => {
                self.bump();
                let track = self.track()?;
                Ok(Statement::AddFx { track, fx_name: self.string("fx name")? })
            }
            "set_fx_param" => {
                self.bump();
                let track = self.track()?;
                self.label("fx")?;
                let fx = match self.peek() {
                    Tok::Str(_) => FxSel::Name(self.string("fx")?),
                    _ => FxSel::Index(self.index("fx name or chain index")?),
                };
                self.label("param")?;
                let param = self.string("param name")?;
                let change = if self.peek_word("norm") {
                    self.label("norm")?;
                    ParamChange::Normalized(self.number()?)
                } else {
                    ParamChange::Amount(self.amount()?)
                };
                Ok(Statement::SetFxParam { track, fx, param, change, clamp: self.clamp() })
            }
            "set_item_pitch" => {
                self.bump();
                let track = self.track()?;
                self.label("item")?;
                let item = self.index("item index")?;
                let amount = self.amount()?;
                let (Amount::Set(q) | Amount::By(q)) = amount;
                self.require_unit(&q, &[UnitKind::Semitones], "pitch in semitones")?;
                Ok(Statement::SetItemPitch { track, item, amount })
            }
            "import_midi" | "import_audio" => {
                self.bump();
                let name = self.string("track name")?;
                self.label("src")?;
                let source = self.string("source content id")?;
                self.label("len")?;
                let length = self.quantity()?;
                self.require_unit(&length, &[UnitKind::Milliseconds], "length in s or ms")?;
                let position = if self.peek_word("at") {
                    self.label("at")?;
                    let q = self.quantity()?;
                    self.require_unit(&q, &[UnitKind::Milliseconds], "position in s or ms")?;
                    Some(q)
                } else {
                    None
                };
                Ok(if verb == "import_midi" {
                    Statement::ImportMidi { name, source, length, position }
                } else {
                    Statement::ImportAudio { name, source, length, position }
                })
            }
            "generate_beat_track" => {
                self.bump();
                let prompt = self.string("beat prompt")?;
                let name = if self.peek_word("name") {
                    self.label("name")?;
                    Some(self.string("track name")?)
                } else {
                    None
                };
                Ok(Statement::GenerateBeatTrack { prompt, name })
            }
            "transport" => {
                self.bump();
                let action = match self.peek() {
                    Tok::Word(w) => TransportAction::parse(w),
                    _ => None,
                };
                match action {
                    Some(action) => {
                        self.bump();
                        Ok(Statement::Transport { action })
                    }
                    None => Err(self.error("'play', 'stop' or 'record'")),
                }
            }
            "ui_hint" => {
                self.bump();
                if !self.peek_word("open_fx_browser") {
                    return Err(self.error("'open_fx_browser'"));
                }
                self.bump();
                Ok(Statement::UiHint { hint: UiHintKind::OpenFxBrowser, track: self.track()? })
            }
            _ => Err(verb_error),
        }
    }
}
