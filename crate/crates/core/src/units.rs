//! Conversion between human parameter units and normalized slider values.
//!
//! Every FX parameter in the engine is stored as a normalized slider value in
//! `[0, slider_max]`. A [`UnitSpec`] describes how that slider maps onto the
//! value a person would type: milliseconds, decibels, hertz and so on.
//!
//! Two curves are supported. A linear curve maps the human range
//! proportionally; a logarithmic curve maps equal ratios onto equal slider
//! distances (the usual frequency knob). Decibel parameters whose slider runs
//! `0..4` are amplitude sliders: the slider value is the linear gain
//! `10^(dB/20)`, so `1.0` is unity and `4.0` is about +12.04 dB.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slider width used by amplitude-style gain parameters.
pub const AMPLITUDE_SLIDER_MAX: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("value {value} is outside [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("logarithmic curve is undefined for {0}")]
    CurveDomain(f64),
    #[error("cannot parse value from {0:?}")]
    UnparseableValue(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("invalid unit spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid unit registry: {0}")]
    InvalidRegistry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    DecibelGain,
    Milliseconds,
    Hertz,
    Percent,
    Semitones,
    Raw,
}

impl UnitKind {
    /// Short suffix used when rendering values and printing scripts.
    pub fn symbol(self) -> &'static str {
        match self {
            UnitKind::DecibelGain => "dB",
            UnitKind::Milliseconds => "ms",
            UnitKind::Hertz => "Hz",
            UnitKind::Percent => "%",
            UnitKind::Semitones => "st",
            UnitKind::Raw => "",
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            UnitKind::DecibelGain => "decibel_gain",
            UnitKind::Milliseconds => "milliseconds",
            UnitKind::Hertz => "hertz",
            UnitKind::Percent => "percent",
            UnitKind::Semitones => "semitones",
            UnitKind::Raw => "raw",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    Linear,
    Logarithmic,
}

/// Mapping between a human-unit range and a normalized slider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSpec {
    pub kind: UnitKind,
    pub min_human: f64,
    pub max_human: f64,
    pub curve: Curve,
    pub slider_max: f64,
}

impl UnitSpec {
    pub fn new(
        kind: UnitKind,
        min_human: f64,
        max_human: f64,
        curve: Curve,
        slider_max: f64,
    ) -> Result<Self, UnitError> {
        let spec = UnitSpec { kind, min_human, max_human, curve, slider_max };
        spec.check()?;
        Ok(spec)
    }

    pub fn linear(kind: UnitKind, min_human: f64, max_human: f64) -> Self {
        UnitSpec { kind, min_human, max_human, curve: Curve::Linear, slider_max: 1.0 }
    }

    pub fn logarithmic(kind: UnitKind, min_human: f64, max_human: f64) -> Self {
        UnitSpec { kind, min_human, max_human, curve: Curve::Logarithmic, slider_max: 1.0 }
    }

    /// Amplitude gain slider on `0..4` with the given floor in dB.
    pub fn amplitude(min_db: f64) -> Self {
        UnitSpec {
            kind: UnitKind::DecibelGain,
            min_human: min_db,
            max_human: gain_to_db(AMPLITUDE_SLIDER_MAX).unwrap_or(0.0),
            curve: Curve::Linear,
            slider_max: AMPLITUDE_SLIDER_MAX,
        }
    }

    /// Checks the structural invariants of the spec.
    pub fn check(&self) -> Result<(), UnitError> {
        if !(self.min_human.is_finite() && self.max_human.is_finite()) {
            return Err(UnitError::InvalidSpec("range bounds must be finite"));
        }
        if self.min_human >= self.max_human {
            return Err(UnitError::InvalidSpec("min_human must be below max_human"));
        }
        if !(self.slider_max > 0.0 && self.slider_max.is_finite()) {
            return Err(UnitError::InvalidSpec("slider_max must be positive"));
        }
        if self.curve == Curve::Logarithmic && self.min_human <= 0.0 {
            return Err(UnitError::InvalidSpec("logarithmic curve needs a positive minimum"));
        }
        if self.is_amplitude() {
            let top = gain_to_db(self.slider_max).unwrap_or(f64::NAN);
            if (top - self.max_human).abs() > 1e-9 {
                return Err(UnitError::InvalidSpec("amplitude slider max must equal 20*log10(slider_max)"));
            }
        }
        Ok(())
    }

    /// True when the slider stores linear amplitude rather than a scaled range.
    pub fn is_amplitude(&self) -> bool {
        self.kind == UnitKind::DecibelGain && self.slider_max == AMPLITUDE_SLIDER_MAX
    }

    pub fn range(&self) -> f64 {
        self.max_human - self.min_human
    }

    pub fn contains_human(&self, human: f64) -> bool {
        human >= self.min_human && human <= self.max_human
    }

    pub fn clamp_human(&self, human: f64) -> f64 {
        human.clamp(self.min_human, self.max_human)
    }

    /// Renders a human value with its unit, e.g. `"50 ms"`.
    pub fn render(&self, human: f64) -> String {
        render_value(human, self.kind)
    }
}

/// Formats a value with at most two decimals and trailing zeros removed.
pub fn render_value(value: f64, kind: UnitKind) -> String {
    let rounded = libm::round(value * 100.0) / 100.0;
    // avoid "-0"
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    let mut text = alloc::format!("{rounded:.2}");
    while text.ends_with('0') {
        text.pop();
    }
    if text.ends_with('.') {
        text.pop();
    }
    match kind {
        UnitKind::Raw => text,
        UnitKind::Percent => text + "%",
        other => alloc::format!("{text} {}", other.symbol()),
    }
}

pub fn db_to_gain(db: f64) -> f64 {
    libm::pow(10.0, db / 20.0)
}

pub fn gain_to_db(gain: f64) -> Result<f64, UnitError> {
    if gain > 0.0 && gain.is_finite() {
        Ok(20.0 * libm::log10(gain))
    } else {
        Err(UnitError::NonPositiveGain(gain))
    }
}

/// Converts a human value to the slider position, rejecting out-of-range input.
pub fn to_normalized(human: f64, spec: &UnitSpec) -> Result<f64, UnitError> {
    if spec.curve == Curve::Logarithmic && !spec.is_amplitude() && human <= 0.0 {
        return Err(UnitError::CurveDomain(human));
    }
    if !spec.contains_human(human) {
        return Err(UnitError::OutOfRange { value: human, min: spec.min_human, max: spec.max_human });
    }
    Ok(map_to_slider(human, spec))
}

/// Like [`to_normalized`] but saturates at the range ends.
pub fn to_normalized_clamped(human: f64, spec: &UnitSpec) -> Result<f64, UnitError> {
    if human.is_nan() {
        return Err(UnitError::OutOfRange { value: human, min: spec.min_human, max: spec.max_human });
    }
    Ok(map_to_slider(spec.clamp_human(human), spec))
}

fn map_to_slider(human: f64, spec: &UnitSpec) -> f64 {
    let n = if spec.is_amplitude() {
        db_to_gain(human)
    } else {
        match spec.curve {
            Curve::Linear => spec.slider_max * (human - spec.min_human) / spec.range(),
            Curve::Logarithmic => {
                spec.slider_max * libm::log(human / spec.min_human) / libm::log(spec.max_human / spec.min_human)
            }
        }
    };
    n.clamp(0.0, spec.slider_max)
}

/// Converts a slider position back to the human value.
pub fn from_normalized(normalized: f64, spec: &UnitSpec) -> Result<f64, UnitError> {
    if !(normalized >= 0.0 && normalized <= spec.slider_max) {
        return Err(UnitError::OutOfRange { value: normalized, min: 0.0, max: spec.slider_max });
    }
    let human = if spec.is_amplitude() {
        if normalized <= 0.0 {
            spec.min_human
        } else {
            20.0 * libm::log10(normalized)
        }
    } else {
        let t = normalized / spec.slider_max;
        match spec.curve {
            Curve::Linear => spec.min_human + t * spec.range(),
            Curve::Logarithmic => spec.min_human * libm::exp(t * libm::log(spec.max_human / spec.min_human)),
        }
    };
    Ok(spec.clamp_human(human))
}

/// A value typed by a person, already scaled to its canonical unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanValue {
    pub value: f64,
    pub kind: UnitKind,
}

/// Resolves a unit token to its canonical kind and the factor that scales
/// values into that kind (`s` becomes milliseconds, `kHz` becomes hertz).
pub fn parse_unit_token(token: &str) -> Option<(UnitKind, f64)> {
    let lower = token.trim().to_ascii_lowercase();
    let unit = match lower.as_str() {
        "" | "raw" => (UnitKind::Raw, 1.0),
        "db" => (UnitKind::DecibelGain, 1.0),
        "ms" => (UnitKind::Milliseconds, 1.0),
        "s" | "sec" => (UnitKind::Milliseconds, 1000.0),
        "hz" => (UnitKind::Hertz, 1.0),
        "khz" => (UnitKind::Hertz, 1000.0),
        "%" | "percent" => (UnitKind::Percent, 1.0),
        "st" | "semitone" | "semitones" => (UnitKind::Semitones, 1.0),
        _ => return None,
    };
    Some(unit)
}

/// Parses text such as `"10 ms"`, `"+6 dB"`, `"20%"` or `"3 kHz"`.
pub fn parse_human_value(text: &str) -> Result<HumanValue, UnitError> {
    let trimmed = text.trim();
    let bytes = trimmed.as_bytes();
    let mut end = 0;
    if matches!(bytes.first(), Some(b'+') | Some(b'-')) {
        end = 1;
    }
    let digits_start = end;
    let mut seen_dot = false;
    while end < bytes.len() {
        match bytes[end] {
            b'0'..=b'9' => end += 1,
            b'.' if !seen_dot => {
                seen_dot = true;
                end += 1;
            }
            _ => break,
        }
    }
    let number = &trimmed[..end];
    let has_digit = trimmed[digits_start..end].bytes().any(|b| b.is_ascii_digit());
    if !has_digit {
        return Err(UnitError::UnparseableValue(text.to_string()));
    }
    let value: f64 = number.parse().map_err(|_| UnitError::UnparseableValue(text.to_string()))?;
    let unit = trimmed[end..].trim();
    let (kind, scale) = parse_unit_token(unit).ok_or_else(|| UnitError::UnknownUnit(unit.to_string()))?;
    let value = value * scale;
    if !value.is_finite() {
        return Err(UnitError::UnparseableValue(text.to_string()));
    }
    Ok(HumanValue { value, kind })
}

/// One parameter of a registered FX.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDefinition {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub unit: UnitSpec,
    /// Initial slider position.
    pub default_normalized: f64,
}

impl ParamDefinition {
    pub fn answers_to(&self, name: &str) -> bool {
        self.name.eq_ignore_ascii_case(name) || self.aliases.iter().any(|a| a.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxDefinition {
    pub name: String,
    pub params: Vec<ParamDefinition>,
}

/// Parameter layout and units of every FX the virtual engine can host.
///
/// The JSON form is `{"fx": [{"name": ..., "params": [{"name", "aliases",
/// "unit", "default_normalized"}]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRegistry {
    pub fx: Vec<FxDefinition>,
}

impl UnitRegistry {
    /// The stock FX bundled with the engine.
    pub fn stock() -> Self {
        let ms = |max: f64| UnitSpec::linear(UnitKind::Milliseconds, 0.0, max);
        let param = |name: &str, aliases: &[&str], unit: UnitSpec, default_normalized: f64| ParamDefinition {
            name: name.to_string(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
            unit,
            default_normalized,
        };
        let fx = alloc::vec![
            FxDefinition {
                name: "ReaComp".into(),
                params: alloc::vec![
                    param("Threshold", &[], UnitSpec::linear(UnitKind::DecibelGain, -60.0, 0.0), 1.0),
                    param("Ratio", &[], UnitSpec::linear(UnitKind::Raw, 1.0, 20.0), 3.0 / 19.0),
                    param("Attack", &[], ms(500.0), 0.006),
                    param("Release", &["Decay"], ms(5000.0), 0.02),
                    param("Volume", &["Gain", "Output"], UnitSpec::amplitude(-150.0), 1.0),
                ],
            },
            FxDefinition {
                name: "ReaEQ".into(),
                params: alloc::vec![
                    param("Frequency", &["Freq"], UnitSpec::logarithmic(UnitKind::Hertz, 20.0, 20000.0), 0.5),
                    param("Gain", &[], UnitSpec::linear(UnitKind::DecibelGain, -24.0, 24.0), 0.5),
                    param("Bandwidth", &["Q"], UnitSpec::linear(UnitKind::Raw, 0.1, 4.0), 0.25),
                ],
            },
            FxDefinition {
                name: "ReaDelay".into(),
                params: alloc::vec![
                    param("Time", &["Delay"], ms(2000.0), 0.125),
                    param("Feedback", &[], UnitSpec::linear(UnitKind::Percent, 0.0, 100.0), 0.3),
                    param("Wet", &["Mix"], UnitSpec::amplitude(-150.0), 0.5),
                ],
            },
            FxDefinition {
                name: "ReaVerb".into(),
                params: alloc::vec![
                    param("Decay", &["Length", "Release"], ms(10000.0), 0.15),
                    param("Wet", &["Mix"], UnitSpec::amplitude(-150.0), 0.25),
                ],
            },
            FxDefinition {
                name: "ReaPitch".into(),
                params: alloc::vec![param(
                    "Shift",
                    &["Pitch"],
                    UnitSpec::linear(UnitKind::Semitones, -24.0, 24.0),
                    0.5
                ),],
            },
        ];
        UnitRegistry { fx }
    }

    pub fn from_json(text: &str) -> Result<Self, UnitError> {
        let registry: UnitRegistry =
            serde_json::from_str(text).map_err(|e| UnitError::InvalidRegistry(e.to_string()))?;
        registry.check()?;
        Ok(registry)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    fn check(&self) -> Result<(), UnitError> {
        for (i, fx) in self.fx.iter().enumerate() {
            if self.fx[..i].iter().any(|other| other.name.eq_ignore_ascii_case(&fx.name)) {
                return Err(UnitError::InvalidRegistry(alloc::format!("duplicate fx {:?}", fx.name)));
            }
            for p in &fx.params {
                p.unit
                    .check()
                    .map_err(|e| UnitError::InvalidRegistry(alloc::format!("{}/{}: {e}", fx.name, p.name)))?;
                if !(p.default_normalized >= 0.0 && p.default_normalized <= p.unit.slider_max) {
                    return Err(UnitError::InvalidRegistry(alloc::format!(
                        "{}/{}: default outside slider range",
                        fx.name,
                        p.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn fx(&self, name: &str) -> Option<&FxDefinition> {
        self.fx
            .iter()
            .find(|fx| fx.name == name)
            .or_else(|| self.fx.iter().find(|fx| fx.name.eq_ignore_ascii_case(name)))
    }

    pub fn lookup(&self, fx_name: &str, param_name: &str) -> Option<&UnitSpec> {
        self.param(fx_name, param_name).map(|p| &p.unit)
    }

    pub fn param(&self, fx_name: &str, param_name: &str) -> Option<&ParamDefinition> {
        self.fx(fx_name)?.params.iter().find(|p| p.answers_to(param_name))
    }
}

impl Default for UnitRegistry {
    fn default() -> Self {
        Self::stock()
    }
}
