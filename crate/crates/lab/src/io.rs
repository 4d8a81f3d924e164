//! File formats shared by the CLI and the experiment harness.
//!
//! Event series are plain text: an optional `# window <start> <end>` header
//! followed by one timestamp per line, written with 17 significant digits so
//! every `f64` survives the round trip. A CSV variant with a `time` column is
//! provided for interop. Intensity profiles are CSV `bin_start,rate`.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use hawkes_core::preprocess::IntensityProfile;
use hawkes_core::{EventSeries, FitResult, HawkesParams};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] hawkes_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Accept equal consecutive timestamps (bundled data).
    pub allow_ties: bool,
}

/// Formats `t` in fixed notation with at least 17 significant digits, adding
/// digits until the text parses back to exactly `t`.
pub fn format_time(t: f64) -> String {
    if t == 0.0 || !t.is_finite() {
        return format!("{t}");
    }
    let magnitude = t.abs().log10().floor() as i32;
    if !(-30..=30).contains(&magnitude) {
        return format!("{t:.16e}");
    }
    let mut decimals = (16 - magnitude).max(0) as usize;
    loop {
        let s = format!("{t:.decimals$}");
        if s.parse::<f64>().ok() == Some(t) || decimals > 60 {
            return s;
        }
        decimals += 1;
    }
}

pub fn write_series<W: Write>(mut out: W, series: &EventSeries) -> io::Result<()> {
    writeln!(
        out,
        "# window {} {}",
        format_time(series.window_start),
        format_time(series.window_end)
    )?;
    for &t in &series.times {
        writeln!(out, "{}", format_time(t))?;
    }
    out.flush()
}

pub fn read_series<R: BufRead>(input: R, opts: ReadOptions) -> Result<EventSeries> {
    let mut window = None;
    let mut times: Vec<f64> = Vec::new();
    let mut prev_line = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(comment) = text.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            if words.next() == Some("window") {
                let bounds: Vec<f64> = words
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| line_error(lineno, format!("bad window header: {e}")))?;
                if bounds.len() != 2 {
                    return Err(line_error(lineno, "window header needs two values".into()));
                }
                window = Some((bounds[0], bounds[1]));
            }
            continue;
        }
        let t: f64 = text
            .parse()
            .map_err(|e| line_error(lineno, format!("cannot parse `{text}` as a time: {e}")))?;
        if !t.is_finite() {
            return Err(line_error(lineno, format!("time `{text}` is not finite")));
        }
        check_order(&times, t, lineno, prev_line, opts)?;
        times.push(t);
        prev_line = lineno;
    }
    finish_series(times, window)
}

fn check_order(times: &[f64], t: f64, lineno: usize, prev_line: usize, opts: ReadOptions) -> Result<()> {
    if let Some(&last) = times.last() {
        if t < last {
            return Err(line_error(
                lineno,
                format!("time {t} is smaller than the previous time {last} (line {prev_line})"),
            ));
        }
        if t == last && !opts.allow_ties {
            return Err(line_error(
                lineno,
                format!("time {t} repeats the previous time (line {prev_line}); pass --allow-ties for bundled data"),
            ));
        }
    }
    Ok(())
}

/// Without a header the window is `(0, last event]`.
fn finish_series(times: Vec<f64>, window: Option<(f64, f64)>) -> Result<EventSeries> {
    let (start, end) = match window {
        Some(w) => w,
        None => match (times.first(), times.last()) {
            (Some(&first), Some(&last)) if first > 0.0 => (0.0, last),
            (Some(_), _) => {
                return Err(FormatError::Invalid(
                    "times at or below 0 need a `# window <start> <end>` header".into(),
                ))
            }
            _ => return Err(FormatError::Invalid("empty series without a window header".into())),
        },
    };
    Ok(EventSeries::new(times, start, end)?)
}

fn line_error(line: usize, message: String) -> FormatError {
    FormatError::Line { line, message }
}

/// CSV with a `time` column; other columns are ignored. Line numbers in errors
/// count the header as line 1.
pub fn read_series_csv<R: Read>(input: R, opts: ReadOptions) -> Result<EventSeries> {
    let mut reader = csv::Reader::from_reader(input);
    let col = reader
        .headers()?
        .iter()
        .position(|h| h.trim() == "time")
        .ok_or_else(|| FormatError::Invalid("CSV series needs a `time` column".into()))?;
    let mut times = Vec::new();
    let mut prev_line = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let lineno = i + 2;
        let field = record.get(col).unwrap_or("").trim();
        let t: f64 = field
            .parse()
            .map_err(|e| line_error(lineno, format!("cannot parse `{field}` as a time: {e}")))?;
        check_order(&times, t, lineno, prev_line, opts)?;
        times.push(t);
        prev_line = lineno;
    }
    finish_series(times, None)
}

pub fn write_series_csv<W: Write>(out: W, series: &EventSeries) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "time")?;
    for &t in &series.times {
        writeln!(out, "{}", format_time(t))?;
    }
    out.flush()
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Loads a series, choosing the CSV reader for `.csv` files.
pub fn load_series(path: &Path, opts: ReadOptions) -> Result<EventSeries> {
    let file = File::open(path)?;
    if is_csv(path) {
        read_series_csv(file, opts)
    } else {
        read_series(BufReader::new(file), opts)
    }
}

pub fn save_series(path: &Path, series: &EventSeries) -> io::Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        write_series_csv(file, series)
    } else {
        write_series(file, series)
    }
}

/// Rows `bin_start,rate`. The bin width is the spacing of the first two rows
/// and the period is `bins × width`; bins must be equally spaced from 0.
pub fn read_profile<R: Read>(input: R) -> Result<IntensityProfile> {
    let mut reader = csv::Reader::from_reader(input);
    let mut starts = Vec::new();
    let mut rates = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = |k: usize| -> Result<f64> {
            record
                .get(k)
                .ok_or_else(|| FormatError::Invalid("profile rows need bin_start,rate".into()))?
                .trim()
                .parse()
                .map_err(|e| FormatError::Invalid(format!("profile value: {e}")))
        };
        starts.push(field(0)?);
        rates.push(field(1)?);
    }
    if starts.len() < 2 {
        return Err(FormatError::Invalid("a profile needs at least two bins to infer the width".into()));
    }
    let width = starts[1] - starts[0];
    for (k, &s) in starts.iter().enumerate() {
        if (s - k as f64 * width).abs() > 1e-9 * width.max(1.0) * (k as f64 + 1.0) {
            return Err(FormatError::Invalid(format!(
                "bin {k} starts at {s}, expected {} for width {width}",
                k as f64 * width
            )));
        }
    }
    let period = width * rates.len() as f64;
    Ok(IntensityProfile::new(width, rates, period)?)
}

pub fn write_profile<W: Write>(out: W, profile: &IntensityProfile) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "bin_start,rate")?;
    for (k, rate) in profile.values.iter().enumerate() {
        writeln!(out, "{},{}", format_time(k as f64 * profile.bin_width), format_time(*rate))?;
    }
    out.flush()
}

pub fn load_profile(path: &Path) -> Result<IntensityProfile> {
    read_profile(File::open(path)?)
}

pub fn save_profile(path: &Path, profile: &IntensityProfile) -> io::Result<()> {
    write_profile(File::create(path)?, profile)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Model parameters from either a fit result or a bare parameter file.
pub fn parse_params(text: &str) -> Result<HawkesParams> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("mu_hat").is_some() {
        let fit: FitResult = serde_json::from_value(value)?;
        Ok(HawkesParams::new(fit.mu_hat, fit.n_hat, fit.kernel))
    } else {
        let params: HawkesParams = serde_json::from_value(value)?;
        params.validate()?;
        Ok(params)
    }
}

pub fn load_params(path: &Path) -> Result<HawkesParams> {
    parse_params(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hawkes_core::KernelSpec;

    fn read(text: &str, allow_ties: bool) -> Result<EventSeries> {
        read_series(text.as_bytes(), ReadOptions { allow_ties })
    }

    #[test]
    fn header_and_comments() {
        let s = read("# window 0 10\n# note\n\n1.5\n2\n", false).unwrap();
        assert_eq!(s.times, vec![1.5, 2.0]);
        assert_eq!((s.window_start, s.window_end), (0.0, 10.0));
        let s = read("3\n4\n", false).unwrap();
        assert_eq!((s.window_start, s.window_end), (0.0, 4.0));
        assert!(read("-1\n4\n", false).is_err());
        assert!(read("# window 0\n", false).is_err());
    }

    #[test]
    fn ordering_errors_name_the_line() {
        let err = read("# window 0 10\n1\n3\n\n2\n", false).unwrap_err();
        assert!(err.to_string().starts_with("line 5:"), "{err}");
        let err = read("1\n1\n", false).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"), "{err}");
        assert_eq!(read("1\n1\n", true).unwrap().len(), 2);
        let err = read("1\nabc\n", false).unwrap_err();
        assert!(err.to_string().starts_with("line 2:"));
    }

    #[test]
    fn formatting_is_lossless_and_fixed() {
        for t in [0.1, 1.0 / 3.0, 12345.678901234567, 1e-7, 99999.99999999999, 1e5, 5e-324, 2.0f64.powi(70)] {
            let s = format_time(t);
            assert_eq!(s.parse::<f64>().unwrap(), t, "{s}");
        }
        assert_eq!(format_time(0.5), "0.50000000000000000");
        assert_eq!(format_time(0.0), "0");
    }

    #[test]
    fn csv_series() {
        let s = read_series_csv("id,time\na,1.0\nb,2.5\n".as_bytes(), ReadOptions::default()).unwrap();
        assert_eq!(s.times, vec![1.0, 2.5]);
        let err = read_series_csv("time\n2\n1\n".as_bytes(), ReadOptions::default()).unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s).unwrap();
        assert_eq!(read_series_csv(buf.as_slice(), ReadOptions::default()).unwrap(), s);
    }

    #[test]
    fn profile_round_trip() {
        let p = IntensityProfile::new(300.0, vec![1.0, 0.25, 2.0 / 3.0], 900.0).unwrap();
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        assert_eq!(read_profile(buf.as_slice()).unwrap(), p);
        assert!(read_profile("bin_start,rate\n0,1\n".as_bytes()).is_err());
        assert!(read_profile("bin_start,rate\n0,1\n10,1\n25,1\n".as_bytes()).is_err());
    }

    #[test]
    fn params_from_either_shape() {
        let p = HawkesParams::new(0.3, 0.7, KernelSpec::approx_power_law(0.1, 0.5));
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(parse_params(&text).unwrap(), p);
        let bad = HawkesParams::new(0.3, -1.0, KernelSpec::Exponential { tau: 1.0 });
        assert!(parse_params(&serde_json::to_string(&bad).unwrap()).is_err());
    }
}
