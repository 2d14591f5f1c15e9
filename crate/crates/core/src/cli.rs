//! Command-line front end: `analyze`, `sweep`, `verify` and `rule-of-thumb`.
//!
//! Exit codes: 0 ok, 1 verification failed, 2 usage or parse error,
//! 3 numeric error (singular evaluation, degenerate carrier).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::filterlib::{parse_filter_spec, parse_proto, Frequency, TransferFunction};
use crate::oracle::{verify_with, VerifyOptions};
use crate::scatter::compute_scatter;
use crate::sweep::{min_bandwidth_ratio, run_sweep, RuleOfThumbQuery, Spacing, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Column order of sweep output, shared by CSV headers and JSON keys.
pub const SWEEP_COLUMNS: [&str; 9] = [
    "fm_hz",
    "hc_mag",
    "hc_phase_deg",
    "hd_mag",
    "hd_phase_deg",
    "am_am_db",
    "am_pm_db",
    "carrier_gain_db",
    "status",
];

#[derive(Debug, Parser)]
#[command(name = "ampm", version, about = "AM/PM conversion of modulated carriers through linear filters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Common and differential response at one carrier/modulation pair.
    Analyze(AnalyzeArgs),
    /// AM/PM figures over a modulation-frequency grid.
    Sweep(SweepArgs),
    /// Check the analytic prediction against a synthesized waveform.
    Verify(VerifyArgs),
    /// One-pole bandwidth ratio needed for a given AM→PM isolation.
    RuleOfThumb(RuleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct FilterSource {
    /// Filter-spec file.
    #[arg(long, value_name = "PATH")]
    pub filter: Option<PathBuf>,
    /// Inline prototype, e.g. `onepole_lp:10e6` or `identity`.
    #[arg(long, value_name = "NAME:PARAMS")]
    pub proto: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: FilterSource,
    /// Carrier frequency, Hz.
    #[arg(long)]
    pub fc: f64,
    /// Modulation frequency, Hz.
    #[arg(long)]
    pub fm: f64,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: FilterSource,
    #[arg(long)]
    pub fc: f64,
    #[arg(long)]
    pub fm_start: f64,
    #[arg(long)]
    pub fm_stop: f64,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Logarithmic spacing (default linear).
    #[arg(long)]
    pub log: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Write output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: FilterSource,
    #[arg(long)]
    pub fc: f64,
    #[arg(long)]
    pub fm: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub am_index: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pm_index: f64,
    /// Largest accepted relative disagreement.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Allow indices above 0.01.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct RuleArgs {
    #[arg(long)]
    pub fm: f64,
    #[arg(long)]
    pub fc: f64,
    /// Required AM→PM suppression in dB (positive).
    #[arg(long)]
    pub isolation_db: f64,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, styled: bool) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err, styled) {
        Ok(code) => code,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::Lib(e) => (exit_code(&e), e.to_string()),
                Failure::Io(e) => (EXIT_USAGE, e.to_string()),
            };
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write, styled: bool) -> Result<i32, Failure> {
    match cmd {
        Command::Analyze(a) => cmd_analyze(&a, out, err, styled),
        Command::Sweep(a) => cmd_sweep(&a, out, err, styled),
        Command::Verify(a) => cmd_verify(&a, out, err, styled),
        Command::RuleOfThumb(a) => cmd_rule_of_thumb(&a, out, err, styled),
    }
}

fn load_filter(src: &FilterSource, err: &mut dyn Write) -> Result<TransferFunction, Failure> {
    let tf = match (&src.filter, &src.proto) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let label = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            parse_filter_spec(&text)
                .map_err(|e| match e {
                    Error::Parse { line, column, reason } => Failure::Usage(format!(
                        "{}:{line}:{column}: {reason}",
                        path.display()
                    )),
                    other => Failure::Lib(other),
                })?
                .with_label(label)
        }
        (None, Some(proto)) => parse_proto(proto)?.with_label(proto.clone()),
        (None, None) => return Err(Failure::Usage("one of --filter or --proto is required".into())),
    };
    for warning in tf.lint() {
        let _ = writeln!(err, "warning: {warning}");
    }
    Ok(tf)
}

fn modulation_pair(fc: f64, fm: f64) -> Result<(Frequency, Frequency), Failure> {
    let (fc_f, fm_f) = (Frequency::new(fc)?, Frequency::new(fm)?);
    if !(fm > 0.0 && fm < fc) {
        return Err(Failure::Usage(format!("need 0 < fm < fc, got fm = {fm}, fc = {fc}")));
    }
    Ok((fc_f, fm_f))
}

fn meta(command: &str, label: Option<&str>, fc: Option<f64>) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    if let Some(l) = label {
        m.insert("filter".into(), json!(l));
    }
    if let Some(fc) = fc {
        m.insert("fc_hz".into(), Cell::Num(fc).to_json());
    }
    m.insert("version".into(), json!(crate::version()));
    Value::Object(m)
}

fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write, styled: bool) -> Result<i32, Failure> {
    let tf = load_filter(&a.source, err)?;
    let (fc, fm) = modulation_pair(a.fc, a.fm)?;
    let r = compute_scatter(&tf, fc, fm)?;
    let record = vec![
        ("fc_hz", Cell::Num(fc.hz())),
        ("fm_hz", Cell::Num(fm.hz())),
        ("hc_mag", Cell::Num(r.hc.norm())),
        ("hc_phase_deg", Cell::Num(r.hc.arg().to_degrees())),
        ("hd_mag", Cell::Num(r.hd.norm())),
        ("hd_phase_deg", Cell::Num(r.hd.arg().to_degrees())),
        ("am_am_db", Cell::Num(r.am_am_db())),
        ("am_pm_db", Cell::Num(r.am_pm_db())),
        ("carrier_gain_db", Cell::Num(r.carrier_gain_db())),
        ("carrier_gain_phase_deg", Cell::Num(r.carrier_gain.arg().to_degrees())),
    ];
    emit_record(out, a.format, &record, meta("analyze", tf.label(), Some(fc.hz())), styled)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write, styled: bool) -> Result<i32, Failure> {
    let tf = load_filter(&a.source, err)?;
    let spec = SweepSpec {
        tf,
        fc: Frequency::new(a.fc)?,
        fm_start: Frequency::new(a.fm_start)?,
        fm_stop: Frequency::new(a.fm_stop)?,
        points: a.points,
        spacing: if a.log { Spacing::Logarithmic } else { Spacing::Linear },
    };
    let rows = run_sweep(&spec)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        let _ = writeln!(err, "warning: {failed} of {} sweep points failed", rows.len());
    }
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|row| {
            let mut cells = vec![Cell::Num(row.fm_hz)];
            match row.metrics() {
                Some(m) => cells.extend(
                    [
                        m.hc_mag,
                        m.hc_phase_deg,
                        m.hd_mag,
                        m.hd_phase_deg,
                        m.am_am_db,
                        m.am_pm_db,
                        m.carrier_gain_db,
                    ]
                    .map(Cell::Num),
                ),
                None => cells.extend(std::iter::repeat_n(Cell::Missing, 7)),
            }
            cells.push(Cell::Text(row.status().into()));
            cells
        })
        .collect();
    let meta = meta("sweep", spec.tf.label(), Some(spec.fc.hz()));

    let mut buf = Vec::new();
    emit_rows(&mut buf, a.format, &SWEEP_COLUMNS, &table, meta, styled && a.out.is_none())?;
    match &a.out {
        Some(path) => fs::write(path, buf)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => out.write_all(&buf)?,
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write, styled: bool) -> Result<i32, Failure> {
    let tf = load_filter(&a.source, err)?;
    let (fc, fm) = modulation_pair(a.fc, a.fm)?;
    if !(a.tolerance.is_finite() && a.tolerance > 0.0) {
        return Err(Failure::Usage(format!("tolerance must be positive, got {}", a.tolerance)));
    }
    let opts = VerifyOptions {
        allow_large_index: a.force,
        ..VerifyOptions::default()
    };
    let v = verify_with(&tf, fc, fm, a.am_index, a.pm_index, &opts)?;
    let pass = v.max_rel_err <= a.tolerance;
    let deg = |c: crate::Complex| c.arg().to_degrees();
    let record = vec![
        ("fc_hz", Cell::Num(fc.hz())),
        ("fm_hz", Cell::Num(fm.hz())),
        ("am_index", Cell::Num(a.am_index)),
        ("pm_index", Cell::Num(a.pm_index)),
        ("analytic_a_mag", Cell::Num(v.analytic.am_index.norm())),
        ("analytic_a_phase_deg", Cell::Num(deg(v.analytic.am_index))),
        ("measured_a_mag", Cell::Num(v.measured.a_out.norm())),
        ("measured_a_phase_deg", Cell::Num(deg(v.measured.a_out))),
        ("analytic_p_mag", Cell::Num(v.analytic.pm_index.norm())),
        ("analytic_p_phase_deg", Cell::Num(deg(v.analytic.pm_index))),
        ("measured_p_mag", Cell::Num(v.measured.p_out.norm())),
        ("measured_p_phase_deg", Cell::Num(deg(v.measured.p_out))),
        ("analytic_carrier_mag", Cell::Num(v.analytic.amplitude.norm())),
        ("measured_carrier_mag", Cell::Num(v.measured.carrier_out.norm())),
        ("residual", Cell::Num(v.measured.residual)),
        ("n_samples", Cell::Num(v.waveform.n_samples as f64)),
        ("sample_rate_hz", Cell::Num(v.waveform.sample_rate)),
        ("max_rel_err", Cell::Num(v.max_rel_err)),
        ("tolerance", Cell::Num(a.tolerance)),
        ("pass", Cell::Bool(pass)),
    ];
    emit_record(out, a.format, &record, meta("verify", tf.label(), Some(fc.hz())), styled)?;
    if !pass {
        let _ = writeln!(
            err,
            "verification failed: max_rel_err {} exceeds tolerance {}",
            fmt_num(v.max_rel_err),
            fmt_num(a.tolerance)
        );
        return Ok(EXIT_VERIFY_FAILED);
    }
    Ok(EXIT_OK)
}

fn cmd_rule_of_thumb(a: &RuleArgs, out: &mut dyn Write, err: &mut dyn Write, styled: bool) -> Result<i32, Failure> {
    let q = RuleOfThumbQuery {
        fm: Frequency::new(a.fm)?,
        fc: Frequency::new(a.fc)?,
        isolation_db: a.isolation_db,
    };
    let r = min_bandwidth_ratio(&q)?;
    if r.approximation_breakdown {
        let _ = writeln!(
            err,
            "warning: k = {} puts the corner at or below the carrier; the fm/(k·fc) rule does not hold there",
            fmt_num(r.k)
        );
    }
    let record = vec![
        ("fm_hz", Cell::Num(a.fm)),
        ("fc_hz", Cell::Num(a.fc)),
        ("isolation_db", Cell::Num(a.isolation_db)),
        ("k", Cell::Num(r.k)),
        ("f0_hz", Cell::Num(r.f0)),
        ("predicted_db", Cell::Num(r.predicted_db)),
        ("approximation_breakdown", Cell::Bool(r.approximation_breakdown)),
    ];
    emit_record(out, a.format, &record, meta("rule-of-thumb", None, Some(a.fc)), styled)?;
    Ok(EXIT_OK)
}

/// One output value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Bool(bool),
    /// No value (a failed sweep row).
    Missing,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => {
                // Same digits as the table and CSV renderings.
                let rounded: f64 = fmt_num(*x).parse().unwrap_or(*x);
                json!(rounded)
            }
            Cell::Num(x) => json!(fmt_num(*x)),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Missing => Value::Null,
        }
    }
}

/// 9 significant digits; scientific outside `[1e-3, 1e6)`; `-inf` for
/// negative infinity.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs();
    if (1e-3..1e6).contains(&mag) {
        let decimals = (8 - mag.log10().floor() as i32).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, exp) = s.split_once('e').unwrap();
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exp}")
    }
}

fn bold(s: &str, styled: bool) -> String {
    if styled {
        format!("\x1b[1m{s}\x1b[0m")
    } else {
        s.to_string()
    }
}

fn emit_record(
    out: &mut dyn Write,
    format: OutputFormat,
    record: &[(&str, Cell)],
    meta: Value,
    styled: bool,
) -> Result<(), Failure> {
    match format {
        OutputFormat::Table => {
            let width = record.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in record {
                let key = bold(&format!("{k:<width$}"), styled);
                writeln!(out, "{key}  {}", v.text())?;
            }
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(record.iter().map(|(k, _)| *k))?;
            w.write_record(record.iter().map(|(_, v)| v.text()))?;
            w.flush()?;
        }
        OutputFormat::Json => {
            let result: Map<String, Value> =
                record.iter().map(|(k, v)| (k.to_string(), v.to_json())).collect();
            let doc = json!({ "meta": meta, "result": result });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
        }
    }
    Ok(())
}

fn emit_rows(
    out: &mut dyn Write,
    format: OutputFormat,
    columns: &[&str],
    rows: &[Vec<Cell>],
    meta: Value,
    styled: bool,
) -> Result<(), Failure> {
    match format {
        OutputFormat::Table => {
            let texts: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|c| match c {
                            Cell::Missing => "-".to_string(),
                            other => other.text(),
                        })
                        .collect()
                })
                .collect();
            let widths: Vec<usize> = columns
                .iter()
                .enumerate()
                .map(|(i, c)| texts.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap())
                .collect();
            let header = columns
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ");
            writeln!(out, "{}", bold(&header, styled))?;
            for r in &texts {
                let line = r
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ");
                writeln!(out, "{line}")?;
            }
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(columns)?;
            for r in rows {
                w.write_record(r.iter().map(Cell::text))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    Value::Object(
                        columns
                            .iter()
                            .zip(r)
                            .map(|(k, v)| (k.to_string(), v.to_json()))
                            .collect(),
                    )
                })
                .collect();
            let doc = json!({ "meta": meta, "rows": rows });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-43.0103), "-43.0103");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(123456.789012), "123456.789");
        assert_eq!(fmt_num(1e7), "1e7");
        assert_eq!(fmt_num(25.6e6), "2.56e7");
        assert_eq!(fmt_num(7.0710678118654e-5), "7.07106781e-5");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_num(-1e-20), "-1e-20");
    }

    #[test]
    fn formatted_numbers_round_trip_to_nine_digits() {
        for &x in &[std::f64::consts::PI, -2.5e-9, 6.02214076e23, 0.00123456789123, 999.9999999999] {
            let back: f64 = fmt_num(x).parse().unwrap();
            assert!((back - x).abs() <= 5e-9 * x.abs(), "{x} -> {}", fmt_num(x));
        }
    }

    #[test]
    fn missing_cells_are_empty_in_csv_and_null_in_json() {
        assert_eq!(Cell::Missing.text(), "");
        assert_eq!(Cell::Missing.to_json(), Value::Null);
        assert_eq!(Cell::Num(f64::NEG_INFINITY).to_json(), json!("-inf"));
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(exit_code(&Error::DegenerateCarrier { magnitude: 0.0 }), 3);
        assert_eq!(exit_code(&Error::SingularEvaluation { freq_hz: 1.0, magnitude: 0.0 }), 3);
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Parse { line: 1, column: 1, reason: "x".into() }),
            2
        );
    }
}
