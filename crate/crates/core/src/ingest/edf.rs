//! Reader and writer for plain EDF: 256-byte main header, 256 bytes per
//! signal header, then data records of little-endian 16-bit samples.
//!
//! Only continuous, single-rate, annotation-free files are accepted.

use std::path::Path;

use crate::error::{Error, Result};
use crate::recording::{Recording, StateTag};

const MAIN_HEADER: usize = 256;
const SIGNAL_HEADER: usize = 256;
const ANNOTATION_LABEL: &str = "EDF Annotations";

#[derive(Debug, Clone, PartialEq)]
pub struct EdfSignalHeader {
    pub label: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub samples_per_record: usize,
}

impl EdfSignalHeader {
    /// Affine map from a stored integer to physical units.
    pub fn to_physical(&self, digital: i16) -> f64 {
        let d = f64::from(digital);
        let dmin = f64::from(self.digital_min);
        let dmax = f64::from(self.digital_max);
        self.physical_min + (d - dmin) * (self.physical_max - self.physical_min) / (dmax - dmin)
    }

    fn to_digital(&self, physical: f64) -> i16 {
        let dmin = f64::from(self.digital_min);
        let dmax = f64::from(self.digital_max);
        let d = dmin + (physical - self.physical_min) * (dmax - dmin)
            / (self.physical_max - self.physical_min);
        d.round().clamp(dmin, dmax) as i16
    }
}

fn field(bytes: &[u8], start: usize, len: usize) -> Result<String> {
    let raw = bytes
        .get(start..start + len)
        .ok_or_else(|| Error::parse("EDF header truncated"))?;
    Ok(String::from_utf8_lossy(raw).trim().to_string())
}

fn number<T: std::str::FromStr>(text: &str, what: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::parse(format!("EDF {what}: cannot parse '{text}'")))
}

/// Read an EDF file into a recording in physical units. The state defaults to
/// the nap session; callers override it from their manifest.
pub fn load_edf_recording(path: &Path) -> Result<Recording> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rec = parse_edf(&bytes)?;
    if rec.subject_id.is_empty() {
        rec.subject_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(rec)
}

pub(crate) fn parse_edf(bytes: &[u8]) -> Result<Recording> {
    if bytes.len() < MAIN_HEADER {
        return Err(Error::parse("EDF header truncated"));
    }
    let version = field(bytes, 0, 8)?;
    if version != "0" {
        return Err(Error::parse(format!("EDF version field '{version}' is not '0'")));
    }
    let patient = field(bytes, 8, 80)?;
    let header_bytes: usize = number(&field(bytes, 184, 8)?, "header size")?;
    let reserved = field(bytes, 192, 44)?;
    let n_records: i64 = number(&field(bytes, 236, 8)?, "record count")?;
    let record_seconds: f64 = number(&field(bytes, 244, 8)?, "record duration")?;
    let ns: usize = number(&field(bytes, 252, 4)?, "signal count")?;

    if reserved.starts_with("EDF+D") {
        return Err(Error::UnsupportedFormat("discontinuous EDF+ recording".into()));
    }
    if ns == 0 {
        return Err(Error::parse("EDF declares no signals"));
    }
    if header_bytes != MAIN_HEADER + ns * SIGNAL_HEADER {
        return Err(Error::parse(format!(
            "EDF header size {header_bytes} inconsistent with {ns} signals"
        )));
    }
    if bytes.len() < header_bytes {
        return Err(Error::parse("EDF signal headers truncated"));
    }
    if !(record_seconds > 0.0) {
        return Err(Error::parse("EDF record duration must be positive"));
    }

    // Signal header fields are stored field-major: all labels, then all
    // transducers, and so on.
    let sig = |offset: usize, width: usize, i: usize| {
        field(bytes, MAIN_HEADER + offset * ns + i * width, width)
    };
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let label = sig(0, 16, i)?;
        if label == ANNOTATION_LABEL {
            return Err(Error::UnsupportedFormat("EDF+ annotation signal present".into()));
        }
        let header = EdfSignalHeader {
            label,
            physical_dimension: sig(16 + 80, 8, i)?,
            physical_min: number(&sig(16 + 80 + 8, 8, i)?, "physical minimum")?,
            physical_max: number(&sig(16 + 80 + 16, 8, i)?, "physical maximum")?,
            digital_min: number(&sig(16 + 80 + 24, 8, i)?, "digital minimum")?,
            digital_max: number(&sig(16 + 80 + 32, 8, i)?, "digital maximum")?,
            samples_per_record: number(&sig(16 + 80 + 40 + 80, 8, i)?, "samples per record")?,
        };
        if header.digital_max <= header.digital_min {
            return Err(Error::parse(format!(
                "signal '{}' has empty digital range",
                header.label
            )));
        }
        signals.push(header);
    }

    let spr = signals[0].samples_per_record;
    if signals.iter().any(|s| s.samples_per_record != spr) {
        return Err(Error::UnsupportedFormat(
            "signals sampled at different rates".into(),
        ));
    }
    let record_samples: usize = signals.iter().map(|s| s.samples_per_record).sum();
    let record_bytes = record_samples * 2;
    let data = &bytes[header_bytes..];
    let n_records = if n_records < 0 {
        data.len() / record_bytes.max(1)
    } else {
        n_records as usize
    };
    if data.len() < n_records * record_bytes {
        return Err(Error::parse(format!(
            "EDF data truncated: {} records need {} bytes, have {}",
            n_records,
            n_records * record_bytes,
            data.len()
        )));
    }

    let mut samples = vec![Vec::with_capacity(n_records * spr); ns];
    for r in 0..n_records {
        let mut offset = r * record_bytes;
        for (i, s) in signals.iter().enumerate() {
            for _ in 0..s.samples_per_record {
                let d = i16::from_le_bytes([data[offset], data[offset + 1]]);
                samples[i].push(s.to_physical(d));
                offset += 2;
            }
        }
    }

    let labels = signals.iter().map(|s| s.label.clone()).collect();
    let subject_id = patient.split_whitespace().next().unwrap_or("").to_string();
    Recording::new(
        subject_id,
        spr as f64 / record_seconds,
        labels,
        samples,
        StateTag::NAP,
    )
}

fn put(buf: &mut Vec<u8>, text: &str, width: usize) -> Result<()> {
    if text.len() > width {
        return Err(Error::domain(format!(
            "EDF field '{text}' exceeds {width} bytes"
        )));
    }
    buf.extend_from_slice(text.as_bytes());
    buf.extend(std::iter::repeat_n(b' ', width - text.len()));
    Ok(())
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 8 {
        return s;
    }
    for prec in (0..8).rev() {
        let s = format!("{v:.prec$}");
        if s.len() <= 8 {
            return s;
        }
    }
    format!("{v:.0}")
}

/// Write `rec` as EDF with a full 16-bit digital range per channel.
/// Samples are quantized, so the round trip is lossy.
pub fn write_edf_recording(rec: &Recording, path: &Path) -> Result<()> {
    let bytes = encode_edf(rec)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_edf(rec: &Recording) -> Result<Vec<u8>> {
    let ns = rec.n_channels();
    let n = rec.n_samples();
    let rate = rec.sample_rate;
    let (spr, n_records, seconds) = if rate.fract() == 0.0 && n % (rate as usize) == 0 {
        (rate as usize, n / rate as usize, 1.0)
    } else {
        (n, 1, n as f64 / rate)
    };

    let headers: Vec<EdfSignalHeader> = rec
        .channel_labels
        .iter()
        .zip(&rec.samples)
        .map(|(label, row)| {
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min).floor();
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
            let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
            EdfSignalHeader {
                label: label.clone(),
                physical_dimension: "uV".into(),
                physical_min: lo,
                physical_max: hi,
                digital_min: -32768,
                digital_max: 32767,
                samples_per_record: spr,
            }
        })
        .collect();

    let mut buf = Vec::with_capacity(MAIN_HEADER + ns * SIGNAL_HEADER + n * ns * 2);
    put(&mut buf, "0", 8)?;
    put(&mut buf, &rec.subject_id, 80)?;
    put(&mut buf, "sqeeg export", 80)?;
    put(&mut buf, "01.01.00", 8)?;
    put(&mut buf, "00.00.00", 8)?;
    put(&mut buf, &(MAIN_HEADER + ns * SIGNAL_HEADER).to_string(), 8)?;
    put(&mut buf, "", 44)?;
    put(&mut buf, &n_records.to_string(), 8)?;
    put(&mut buf, &fmt_num(seconds), 8)?;
    put(&mut buf, &ns.to_string(), 4)?;
    for h in &headers {
        put(&mut buf, &h.label, 16)?;
    }
    for _ in &headers {
        put(&mut buf, "", 80)?;
    }
    for h in &headers {
        put(&mut buf, &h.physical_dimension, 8)?;
    }
    for h in &headers {
        put(&mut buf, &fmt_num(h.physical_min), 8)?;
    }
    for h in &headers {
        put(&mut buf, &fmt_num(h.physical_max), 8)?;
    }
    for h in &headers {
        put(&mut buf, &h.digital_min.to_string(), 8)?;
    }
    for h in &headers {
        put(&mut buf, &h.digital_max.to_string(), 8)?;
    }
    for _ in &headers {
        put(&mut buf, "", 80)?;
    }
    for h in &headers {
        put(&mut buf, &h.samples_per_record.to_string(), 8)?;
    }
    for _ in &headers {
        put(&mut buf, "", 32)?;
    }
    for r in 0..n_records {
        for (h, row) in headers.iter().zip(&rec.samples) {
            for &v in &row[r * spr..(r + 1) * spr] {
                buf.extend_from_slice(&h.to_digital(v).to_le_bytes());
            }
        }
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-built single-signal EDF.
    fn minimal_edf(label: &str, version: &str, digital: &[i16], spr: usize) -> Vec<u8> {
        let mut b = Vec::new();
        put(&mut b, version, 8).unwrap();
        put(&mut b, "P01 X X X", 80).unwrap();
        put(&mut b, "rec", 80).unwrap();
        put(&mut b, "01.01.24", 8).unwrap();
        put(&mut b, "12.00.00", 8).unwrap();
        put(&mut b, "512", 8).unwrap();
        put(&mut b, "", 44).unwrap();
        put(&mut b, &(digital.len() / spr).to_string(), 8).unwrap();
        put(&mut b, "1", 8).unwrap();
        put(&mut b, "1", 4).unwrap();
        put(&mut b, label, 16).unwrap();
        put(&mut b, "AgAgCl", 80).unwrap();
        put(&mut b, "uV", 8).unwrap();
        put(&mut b, "-200", 8).unwrap();
        put(&mut b, "200", 8).unwrap();
        put(&mut b, "-2048", 8).unwrap();
        put(&mut b, "2047", 8).unwrap();
        put(&mut b, "", 80).unwrap();
        put(&mut b, &spr.to_string(), 8).unwrap();
        put(&mut b, "", 32).unwrap();
        for d in digital {
            b.extend_from_slice(&d.to_le_bytes());
        }
        b
    }

    #[test]
    fn scaling_of_zero() {
        let rec = parse_edf(&minimal_edf("Cz", "0", &[0, -2048, 2047, 0], 4)).unwrap();
        let x = &rec.samples[0];
        // -200 + 2048 * 400 / 4095
        assert!((x[0] - 0.048_840_048_840_048_84).abs() < 1e-12);
        assert_eq!(x[1], -200.0);
        assert_eq!(x[2], 200.0);
        assert_eq!(rec.sample_rate, 4.0);
        assert_eq!(rec.subject_id, "P01");
    }

    #[test]
    fn bad_version() {
        let err = parse_edf(&minimal_edf("Cz", "1", &[0; 4], 4)).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn annotations_rejected() {
        let err = parse_edf(&minimal_edf("EDF Annotations", "0", &[0; 4], 4)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
    }

    #[test]
    fn mixed_rates_rejected() {
        let rec = Recording::new(
            "s",
            4.0,
            vec!["A".into(), "B".into()],
            vec![vec![1.0; 8], vec![2.0; 8]],
            StateTag::NAP,
        )
        .unwrap();
        let mut bytes = encode_edf(&rec).unwrap();
        // Second signal's samples-per-record field.
        let off = MAIN_HEADER + 216 * 2 + 8;
        bytes[off..off + 8].copy_from_slice(b"8       ");
        assert!(matches!(parse_edf(&bytes), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn truncated_data() {
        let mut b = minimal_edf("Cz", "0", &[0; 4], 4);
        b.truncate(b.len() - 2);
        assert!(matches!(parse_edf(&b), Err(Error::Parse(_))));
    }

    #[test]
    fn write_read_within_quantization() {
        let row: Vec<f64> = (0..500).map(|i| (i as f64 * 0.1).sin() * 50.0).collect();
        let rec = Recording::new("S7", 250.0, vec!["Fz".into()], vec![row.clone()], StateTag::NAP)
            .unwrap();
        let bytes = encode_edf(&rec).unwrap();
        let back = parse_edf(&bytes).unwrap();
        assert_eq!(back.sample_rate, 250.0);
        assert_eq!(back.subject_id, "S7");
        let step = 102.0 / 65535.0;
        for (a, b) in row.iter().zip(&back.samples[0]) {
            assert!((a - b).abs() <= step);
        }
        // Loading twice is bit-identical; dmin maps to pmin exactly.
        assert_eq!(parse_edf(&bytes).unwrap(), back);
        let h = EdfSignalHeader {
            label: "x".into(),
            physical_dimension: "uV".into(),
            physical_min: -51.0,
            physical_max: 51.0,
            digital_min: -32768,
            digital_max: 32767,
            samples_per_record: 1,
        };
        assert_eq!(h.to_physical(-32768), -51.0);
    }
}
