//! CSV and binary event formats, plus the two-column ground-truth CSV.
//!
//! CSV: a `# width=<W> height=<H>` header, then `t_us,x,y,p` rows with
//! integer microsecond timestamps. BIN: magic `EVD1`, little-endian `u32`
//! width, `u32` height, `u64` count, then packed `(u64 t_us, f32 x, f32 y,
//! i8 p)` records.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{check_event, Event, EventStream, Polarity, SensorGeometry};
use crate::error::{Error, Result};

const BIN_MAGIC: &[u8; 4] = b"EVD1";
const BIN_HEADER_LEN: usize = 4 + 4 + 4 + 8;
const BIN_RECORD_LEN: usize = 8 + 4 + 4 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Bin,
}

impl EventFormat {
    /// Guesses the format from a file extension (`.bin` or anything else as CSV).
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => EventFormat::Bin,
            _ => EventFormat::Csv,
        }
    }
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EventFormat::Csv),
            "bin" => Ok(EventFormat::Bin),
            other => Err(Error::InvalidArgument(format!("unknown event format `{other}`"))),
        }
    }
}

/// Parses an event file. The result is sorted by time; a zero-byte input
/// yields an empty stream on a placeholder 1x1 geometry.
pub fn parse_event_file(bytes: &[u8], format: EventFormat) -> Result<EventStream> {
    let (events, geometry) = match format {
        EventFormat::Csv => parse_csv(bytes)?,
        EventFormat::Bin => parse_bin(bytes)?,
    };
    EventStream::new(events, geometry)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_header(line_no: usize, line: &str) -> Result<SensorGeometry> {
    let body = line.trim_start_matches('#').trim();
    let mut width = None;
    let mut height = None;
    for token in body.split_whitespace() {
        if let Some((key, value)) = token.split_once('=') {
            let parsed = value
                .parse::<u32>()
                .map_err(|_| parse_err(line_no, format!("bad header value `{token}`")))?;
            match key {
                "width" => width = Some(parsed),
                "height" => height = Some(parsed),
                _ => {}
            }
        }
    }
    match (width, height) {
        (Some(w), Some(h)) => {
            SensorGeometry::new(w, h).map_err(|e| parse_err(line_no, e.to_string()))
        }
        _ => Err(parse_err(
            line_no,
            "expected header `# width=<W> height=<H>`",
        )),
    }
}

fn parse_csv(bytes: &[u8]) -> Result<(Vec<Event>, SensorGeometry)> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(0, format!("not UTF-8: {e}")))?;
    let mut geometry = None;
    let mut events = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some(geom) = geometry else {
            if !line.starts_with('#') {
                return Err(parse_err(line_no, "missing `# width=<W> height=<H>` header"));
            }
            geometry = Some(parse_header(line_no, line)?);
            continue;
        };
        if line.starts_with('#') {
            continue;
        }

        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(
                line_no,
                format!("expected 4 fields `t_us,x,y,p`, found {}", fields.len()),
            ));
        }
        let t_us: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad timestamp `{}`", fields[0])))?;
        let x: f64 = fields[1]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad x `{}`", fields[1])))?;
        let y: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad y `{}`", fields[2])))?;
        let polarity = fields[3]
            .parse::<i64>()
            .ok()
            .and_then(Polarity::from_sign)
            .ok_or_else(|| parse_err(line_no, format!("bad polarity `{}`", fields[3])))?;

        let event = Event::new(x, y, t_us as f64 * 1e-6, polarity);
        check_event(&event, &geom)
            .map_err(|msg| Error::Validation(format!("line {line_no}: {msg}")))?;
        events.push(event);
    }

    let geometry = match geometry {
        Some(g) => g,
        None => SensorGeometry::new(1, 1)?,
    };
    Ok((events, geometry))
}

fn parse_bin(bytes: &[u8]) -> Result<(Vec<Event>, SensorGeometry)> {
    if bytes.is_empty() {
        return Ok((Vec::new(), SensorGeometry::new(1, 1)?));
    }
    if bytes.len() < BIN_HEADER_LEN || &bytes[..4] != BIN_MAGIC {
        return Err(parse_err(0, "missing EVD1 header"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let geometry = SensorGeometry::new(width, height).map_err(|e| parse_err(0, e.to_string()))?;

    let body = &bytes[BIN_HEADER_LEN..];
    let expected = (count as usize).checked_mul(BIN_RECORD_LEN);
    if expected != Some(body.len()) {
        return Err(parse_err(
            0,
            format!(
                "header declares {count} records but body holds {} bytes",
                body.len()
            ),
        ));
    }

    let mut events = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(BIN_RECORD_LEN).enumerate() {
        let t_us = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = f32::from_le_bytes(rec[8..12].try_into().unwrap());
        let y = f32::from_le_bytes(rec[12..16].try_into().unwrap());
        let polarity = Polarity::from_sign(rec[16] as i8 as i64)
            .ok_or_else(|| parse_err(i + 1, format!("bad polarity {}", rec[16] as i8)))?;
        let event = Event::new(x as f64, y as f64, t_us as f64 * 1e-6, polarity);
        check_event(&event, &geometry)
            .map_err(|msg| Error::Validation(format!("record {}: {msg}", i + 1)))?;
        events.push(event);
    }
    Ok((events, geometry))
}

fn to_micros(t: f64) -> u64 {
    (t * 1e6).round() as u64
}

/// Serializes a stream. Timestamps are rounded to whole microseconds.
pub fn write_event_file(stream: &EventStream, format: EventFormat) -> Vec<u8> {
    let g = stream.geometry();
    match format {
        EventFormat::Csv => {
            let mut out = String::with_capacity(32 + stream.len() * 24);
            let _ = writeln!(out, "# width={} height={}", g.width(), g.height());
            for e in stream.events() {
                let _ = writeln!(out, "{},{},{},{}", to_micros(e.t), e.x, e.y, e.polarity.as_i8());
            }
            out.into_bytes()
        }
        EventFormat::Bin => {
            let mut out = Vec::with_capacity(BIN_HEADER_LEN + stream.len() * BIN_RECORD_LEN);
            out.extend_from_slice(BIN_MAGIC);
            out.extend_from_slice(&g.width().to_le_bytes());
            out.extend_from_slice(&g.height().to_le_bytes());
            out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
            for e in stream.events() {
                out.extend_from_slice(&to_micros(e.t).to_le_bytes());
                // f32 rounding can land exactly on the upper border
                let x = clamp_f32_below(e.x, g.width());
                let y = clamp_f32_below(e.y, g.height());
                out.extend_from_slice(&x.to_le_bytes());
                out.extend_from_slice(&y.to_le_bytes());
                out.push(e.polarity.as_i8() as u8);
            }
            out
        }
    }
}

fn clamp_f32_below(v: f64, limit: u32) -> f32 {
    let v = v as f32;
    if v >= limit as f32 {
        (limit as f32).next_down()
    } else {
        v
    }
}

/// Writes `t_s,divergence` rows under a `#` comment header.
pub fn write_ground_truth_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("# t_s,divergence\n");
    for (t, d) in samples {
        let _ = writeln!(out, "{t},{d}");
    }
    out
}

/// Reads `t_s,divergence` rows, skipping `#` comments and blank lines. Extra
/// columns are ignored so estimator output can be read the same way.
pub fn parse_ground_truth_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let mut next_f64 = |what: &str| -> Result<f64> {
            let field = fields
                .next()
                .ok_or_else(|| parse_err(idx + 1, format!("missing {what}")))?;
            field
                .parse::<f64>()
                .map_err(|_| parse_err(idx + 1, format!("bad {what} `{field}`")))
        };
        let t = next_f64("time")?;
        let d = next_f64("divergence")?;
        out.push((t, d));
    }
    Ok(out)
}
