//! Continuous-time transfer functions `H(s)` and a small text format for them.
//!
//! Coefficients are stored in ascending powers of `s`, with `s` in rad/s.
//! Frequencies cross the public API in Hz.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::Complex;

/// Denominator magnitudes below this are treated as a pole on the jω axis.
pub const DEFAULT_SINGULAR_FLOOR: f64 = 1e-300;

/// Coefficient dynamic range above which [`TransferFunction::lint`] warns.
pub const LINT_DYNAMIC_RANGE: f64 = 1e12;

/// A non-negative, finite frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Frequency(f64);

impl Frequency {
    pub fn new(hz: f64) -> Result<Self> {
        if !hz.is_finite() || hz < 0.0 {
            return Err(Error::invalid(format!(
                "frequency must be finite and non-negative, got {hz}"
            )));
        }
        Ok(Frequency(hz))
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    /// Angular frequency, 2πf.
    pub fn omega(self) -> f64 {
        2.0 * PI * self.0
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.0)
    }
}

/// Rational transfer function `num(s) / den(s)` with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    label: Option<String>,
}

impl TransferFunction {
    /// Builds a transfer function from ascending-power coefficients.
    ///
    /// The numerator may carry trailing zeros; the denominator's highest
    /// coefficient must be nonzero.
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        if numerator.is_empty() {
            return Err(Error::InvalidFilter("numerator is empty".into()));
        }
        if denominator.is_empty() {
            return Err(Error::InvalidFilter("denominator is empty".into()));
        }
        if let Some(c) = numerator
            .iter()
            .chain(denominator.iter())
            .find(|c| !c.is_finite())
        {
            return Err(Error::InvalidFilter(format!(
                "coefficient {c} is not finite"
            )));
        }
        if denominator.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidFilter(
                "denominator has no nonzero coefficient".into(),
            ));
        }
        if *denominator.last().unwrap() == 0.0 {
            return Err(Error::InvalidFilter(
                "highest-order denominator coefficient is zero".into(),
            ));
        }
        Ok(TransferFunction {
            numerator,
            denominator,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// `H(s) = 1`.
    pub fn identity() -> Self {
        TransferFunction {
            numerator: vec![1.0],
            denominator: vec![1.0],
            label: Some("identity".into()),
        }
    }

    /// Stable one-pole lowpass `ω0 / (s + ω0)` with `ω0 = 2π·f0`.
    pub fn one_pole_lowpass(f0_hz: f64) -> Result<Self> {
        if !(f0_hz.is_finite() && f0_hz > 0.0) {
            return Err(Error::invalid(format!(
                "one-pole corner frequency must be positive, got {f0_hz}"
            )));
        }
        let w0 = 2.0 * PI * f0_hz;
        Ok(TransferFunction {
            numerator: vec![w0],
            denominator: vec![w0, 1.0],
            label: Some(format!("onepole_lp f0={f0_hz:e}")),
        })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// `H(j·2πf)`. Negative `f_hz` is allowed and gives the conjugate of the
    /// positive-frequency response.
    pub fn evaluate(&self, f_hz: f64) -> Result<Complex> {
        self.evaluate_with_floor(f_hz, DEFAULT_SINGULAR_FLOOR)
    }

    pub fn evaluate_with_floor(&self, f_hz: f64, floor: f64) -> Result<Complex> {
        let s = Complex::new(0.0, 2.0 * PI * f_hz);
        let den = horner(&self.denominator, s);
        let mag = den.norm();
        if !(mag >= floor) || !mag.is_finite() {
            return Err(Error::SingularEvaluation {
                freq_hz: f_hz,
                magnitude: mag,
            });
        }
        let h = horner(&self.numerator, s) / den;
        if !(h.re.is_finite() && h.im.is_finite()) {
            return Err(Error::SingularEvaluation {
                freq_hz: f_hz,
                magnitude: mag,
            });
        }
        Ok(h)
    }

    /// Evaluates at an arbitrary point of the s-plane, without the
    /// singularity check.
    pub fn eval_s(&self, s: Complex) -> Complex {
        horner(&self.numerator, s) / horner(&self.denominator, s)
    }

    /// Series connection: `self(s) · other(s)`.
    pub fn cascade(&self, other: &TransferFunction) -> TransferFunction {
        TransferFunction {
            numerator: poly_mul(&self.numerator, &other.numerator),
            denominator: poly_mul(&self.denominator, &other.denominator),
            label: match (&self.label, &other.label) {
                (Some(a), Some(b)) => Some(format!("{a} * {b}")),
                _ => None,
            },
        }
    }

    /// Largest ratio of nonzero coefficient magnitudes within either
    /// polynomial.
    pub fn dynamic_range(&self) -> f64 {
        fn range(c: &[f64]) -> f64 {
            let nz = c.iter().map(|c| c.abs()).filter(|&c| c > 0.0);
            let (lo, hi) = nz.fold((f64::INFINITY, 0.0f64), |(lo, hi), c| {
                (lo.min(c), hi.max(c))
            });
            if hi == 0.0 {
                1.0
            } else {
                hi / lo
            }
        }
        range(&self.numerator).max(range(&self.denominator))
    }

    /// Warnings about numerically risky coefficient sets.
    pub fn lint(&self) -> Vec<String> {
        let mut out = Vec::new();
        let dr = self.dynamic_range();
        if dr > LINT_DYNAMIC_RANGE {
            out.push(format!(
                "coefficient dynamic range {dr:.3e} exceeds {LINT_DYNAMIC_RANGE:e}; \
                 evaluation may lose precision (consider rescaling s)"
            ));
        }
        out
    }

    /// Renders as filter-spec text that parses back to identical coefficients.
    pub fn to_spec_text(&self) -> String {
        let join = |c: &[f64]| {
            c.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut text = String::new();
        if let Some(label) = &self.label {
            text.push_str(&format!("# {label}\n"));
        }
        text.push_str(&format!("num: {}\n", join(&self.numerator)));
        text.push_str(&format!("den: {}\n", join(&self.denominator)));
        text
    }
}

fn horner(coeffs: &[f64], s: Complex) -> Complex {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Parses the line-oriented filter-spec format:
///
/// ```text
/// # comment
/// num: c0 c1 c2 ...
/// den: c0 c1 c2 ...
/// ```
///
/// or a single prototype line such as `onepole_lp f0=10e6` (also `identity`).
pub fn parse_filter_spec(text: &str) -> Result<TransferFunction> {
    enum Seen {
        Coeffs {
            num: Option<(Vec<f64>, usize)>,
            den: Option<(Vec<f64>, usize, usize)>,
        },
        Proto(TransferFunction),
    }

    let mut seen: Option<Seen> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens = tokenize(content);
        let Some(&(off0, first)) = tokens.first() else {
            continue;
        };
        let col0 = column(content, off0);
        let perr = |column: usize, reason: String| Error::Parse {
            line: line_no,
            column,
            reason,
        };

        let ident_len = first
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(first.len());
        let ident = &first[..ident_len];
        if ident.is_empty() {
            return Err(perr(col0, format!("expected a directive, found '{first}'")));
        }

        // `key:` coefficient directive, with or without a space before the colon.
        let after_ident = &content[off0 + ident_len..];
        if after_ident.trim_start().starts_with(':') {
            let colon = off0 + ident_len + after_ident.find(':').unwrap();
            let coeff_tokens = tokenize(&content[colon + 1..])
                .into_iter()
                .map(|(off, t)| (column(content, off + colon + 1), t))
                .collect::<Vec<_>>();
            let is_num = match ident {
                "num" => true,
                "den" => false,
                _ => return Err(perr(col0, format!("unknown directive '{ident}:'"))),
            };
            if coeff_tokens.is_empty() {
                return Err(perr(column(content, colon) + 1, format!("'{ident}:' needs at least one coefficient")));
            }
            let mut coeffs = Vec::with_capacity(coeff_tokens.len());
            for (col, tok) in &coeff_tokens {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| perr(*col, format!("invalid number '{tok}'")))?;
                if !v.is_finite() {
                    return Err(perr(*col, format!("coefficient '{tok}' is not finite")));
                }
                coeffs.push(v);
            }
            let slot = seen.get_or_insert(Seen::Coeffs {
                num: None,
                den: None,
            });
            match slot {
                Seen::Proto(_) => {
                    return Err(perr(
                        col0,
                        "prototype lines are mutually exclusive with num/den lines".into(),
                    ))
                }
                Seen::Coeffs { num, den } => {
                    if is_num {
                        if num.is_some() {
                            return Err(perr(col0, "duplicate 'num:' line".into()));
                        }
                        *num = Some((coeffs, line_no));
                    } else {
                        if den.is_some() {
                            return Err(perr(col0, "duplicate 'den:' line".into()));
                        }
                        *den = Some((coeffs, line_no, coeff_tokens[0].0));
                    }
                }
            }
            continue;
        }

        // Prototype line.
        if seen.is_some() {
            let reason = match seen {
                Some(Seen::Proto(_)) => "only one filter per file is allowed",
                _ => "prototype lines are mutually exclusive with num/den lines",
            };
            return Err(perr(col0, reason.into()));
        }
        let mut params = Vec::new();
        for &(off, tok) in &tokens[1..] {
            let col = column(content, off);
            let Some((key, value)) = tok.split_once('=') else {
                return Err(perr(col, format!("expected key=value, found '{tok}'")));
            };
            let v: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    perr(col + key.len() + 1, format!("invalid number '{value}'"))
                })?;
            params.push((col, key, v));
        }
        let tf = build_prototype(first, &params)
            .map_err(|e| match e {
                ProtoError::Parse(col, reason) => perr(col.unwrap_or(col0), reason),
                ProtoError::Value(err) => err,
            })?;
        seen = Some(Seen::Proto(tf));
    }

    match seen {
        None => Err(Error::Parse {
            line: last_line.max(1),
            column: 1,
            reason: "no filter defined".into(),
        }),
        Some(Seen::Proto(tf)) => Ok(tf),
        Some(Seen::Coeffs { num, den }) => {
            let Some((num, _)) = num else {
                return Err(Error::Parse {
                    line: last_line,
                    column: 1,
                    reason: "missing 'num:' line".into(),
                });
            };
            let Some((den, den_line, den_col)) = den else {
                return Err(Error::Parse {
                    line: last_line,
                    column: 1,
                    reason: "missing 'den:' line".into(),
                });
            };
            TransferFunction::new(num, den).map_err(|e| Error::Parse {
                line: den_line,
                column: den_col,
                reason: match e {
                    Error::InvalidFilter(r) => r,
                    other => other.to_string(),
                },
            })
        }
    }
}

/// Parses an inline prototype such as `onepole_lp:10e6` or `identity`.
pub fn parse_proto(spec: &str) -> Result<TransferFunction> {
    let perr = |column: usize, reason: String| Error::Parse {
        line: 1,
        column,
        reason,
    };
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (spec.trim(), None),
    };
    let parsed = match (name, params) {
        ("onepole_lp", Some(p)) => {
            let col = name.len() + 2;
            let v: f64 = p
                .strip_prefix("f0=")
                .unwrap_or(p)
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| perr(col, format!("invalid number '{p}'")))?;
            vec![(col, "f0", v)]
        }
        (_, Some(p)) if !p.is_empty() => {
            return Err(perr(name.len() + 2, format!("prototype '{name}' takes no inline parameter")))
        }
        _ => Vec::new(),
    };
    build_prototype(name, &parsed).map_err(|e| match e {
        ProtoError::Parse(col, reason) => perr(col.unwrap_or(1), reason),
        ProtoError::Value(err) => err,
    })
}

enum ProtoError {
    Parse(Option<usize>, String),
    Value(Error),
}

fn build_prototype(
    name: &str,
    params: &[(usize, &str, f64)],
) -> std::result::Result<TransferFunction, ProtoError> {
    let allowed: &[&str] = match name {
        "onepole_lp" => &["f0"],
        "identity" => &[],
        _ => {
            return Err(ProtoError::Parse(
                None,
                format!("unknown prototype '{name}'"),
            ))
        }
    };
    for (i, &(col, key, _)) in params.iter().enumerate() {
        if !allowed.contains(&key) {
            return Err(ProtoError::Parse(
                Some(col),
                format!("unknown parameter '{key}' for '{name}'"),
            ));
        }
        if params[..i].iter().any(|&(_, k, _)| k == key) {
            return Err(ProtoError::Parse(
                Some(col),
                format!("duplicate parameter '{key}'"),
            ));
        }
    }
    let get = |key: &str| params.iter().find(|p| p.1 == key).map(|p| p.2);
    match name {
        "onepole_lp" => {
            let f0 = get("f0").ok_or_else(|| {
                ProtoError::Parse(None, "onepole_lp needs f0=<Hz>".into())
            })?;
            TransferFunction::one_pole_lowpass(f0).map_err(ProtoError::Value)
        }
        _ => Ok(TransferFunction::identity()),
    }
}

/// Whitespace tokens with their byte offsets.
fn tokenize(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(st)) => {
                out.push((st, &s[st..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push((st, &s[st..]));
    }
    out
}

/// 1-based character column of a byte offset.
fn column(s: &str, byte: usize) -> usize {
    s[..byte].chars().count() + 1
}
