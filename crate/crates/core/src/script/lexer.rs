use alloc::string::String;
use alloc::vec::Vec;

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Str(String),
    /// Numeric literal with its source spelling.
    Num {
        value: f64,
        text: String,
    },
    TrackIndex(String),
    Colon,
    Percent,
    Newline,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => alloc::format!("'{w}'"),
            Tok::Str(s) => alloc::format!("string {s:?}"),
            Tok::Num { text, .. } => alloc::format!("number {text}"),
            Tok::TrackIndex(t) => alloc::format!("'#{t}'"),
            Tok::Colon => "':'".into(),
            Tok::Percent => "'%'".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

/// Splits source text into tokens. `#` followed by a digit is a track index;
/// any other `#` starts a comment that runs to the end of the line.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! err {
        ($l:expr, $c:expr, $exp:expr, $found:expr) => {
            return Err(ParseError { line: $l, col: $c, expected: $exp.into(), found: $found })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                out.push(Token { tok: Tok::Newline, line: tl, col: tc });
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' | ',' => {
                i += 1;
                col += 1;
            }
            '#' => {
                if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    out.push(Token { tok: Tok::TrackIndex(chars[start..j].iter().collect()), line: tl, col: tc });
                    col += (j - i) as u32;
                    i = j;
                } else {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                        col += 1;
                    }
                }
            }
            ':' => {
                out.push(Token { tok: Tok::Colon, line: tl, col: tc });
                i += 1;
                col += 1;
            }
            '%' => {
                out.push(Token { tok: Tok::Percent, line: tl, col: tc });
                i += 1;
                col += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => err!(line, col, "closing '\"'", "end of line".into()),
                        Some('"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            let escaped = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                other => err!(
                                    line,
                                    col,
                                    "escape sequence (\\\" \\\\ \\n \\t \\r)",
                                    alloc::format!("{other:?}")
                                ),
                            };
                            s.push(escaped);
                            i += 2;
                            col += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            }
            '+' | '-' | '0'..='9' | '.' => {
                let start = i;
                let mut j = i;
                if c == '+' || c == '-' {
                    j += 1;
                }
                let digits_from = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let int_digits = j - digits_from;
                let mut frac_digits = 0;
                if j < chars.len() && chars[j] == '.' {
                    j += 1;
                    let f = j;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    frac_digits = j - f;
                }
                let text: String = chars[start..j].iter().collect();
                if int_digits == 0 || (j > digits_from + int_digits && frac_digits == 0) {
                    err!(tl, tc, "number", alloc::format!("{text:?}"));
                }
                let value: f64 = match text.parse() {
                    Ok(v) => v,
                    Err(_) => err!(tl, tc, "number", alloc::format!("{text:?}")),
                };
                if !value.is_finite() {
                    err!(tl, tc, "finite number", alloc::format!("{text:?}"));
                }
                out.push(Token { tok: Tok::Num { value, text }, line: tl, col: tc });
                col += (j - i) as u32;
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                out.push(Token { tok: Tok::Word(chars[start..j].iter().collect()), line: tl, col: tc });
                col += (j - i) as u32;
                i = j;
            }
            other => err!(tl, tc, "statement text", alloc::format!("{other:?}")),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
