//! Loading recordings and labels, plus the bookkeeping around them: channel
//! retention, PSQI grouping and sleep-stage epoch lookup.

mod csv_io;
mod edf;

use std::ops::Range;
use std::path::Path;

pub use csv_io::{load_csv_recording, load_subject_table, write_csv_recording, Sidecar};
pub use edf::{load_edf_recording, write_edf_recording, EdfSignalHeader};

use crate::error::{Error, Result};
use crate::recording::{Group, Hypnogram, Recording, Stage};

/// PSQI global scores at or below this are good sleepers.
pub const PSQI_GOOD_SLEEPER_MAX: i32 = 5;

/// Percentage of recorded channels kept after bad-channel rejection.
pub fn compute_retention(total_channels: usize, retained_channels: usize) -> Result<f64> {
    if total_channels == 0 {
        return Err(Error::domain("retention undefined for zero channels"));
    }
    if retained_channels > total_channels {
        return Err(Error::domain(format!(
            "retained {retained_channels} exceeds total {total_channels}"
        )));
    }
    Ok(100.0 * retained_channels as f64 / total_channels as f64)
}

pub fn assign_group(psqi_score: i32) -> Result<Group> {
    if !(0..=21).contains(&psqi_score) {
        return Err(Error::domain(format!(
            "PSQI score {psqi_score} outside 0-21"
        )));
    }
    Ok(if psqi_score <= PSQI_GOOD_SLEEPER_MAX {
        Group::GS
    } else {
        Group::PS
    })
}

/// Samples per hypnogram epoch at `sample_rate`.
pub fn epoch_samples(sample_rate: f64, epoch_seconds: f64) -> usize {
    (epoch_seconds * sample_rate).round() as usize
}

/// Sample ranges of every epoch labelled `stage`. An absent stage yields an
/// empty list.
pub fn select_stage_epochs(
    rec: &Recording,
    hyp: &Hypnogram,
    stage: Stage,
) -> Result<Vec<Range<usize>>> {
    let len = epoch_samples(rec.sample_rate, hyp.epoch_length());
    let needed = hyp.len() * len;
    if needed > rec.n_samples() {
        return Err(Error::Alignment(format!(
            "{} epochs need {needed} samples, recording has {}",
            hyp.len(),
            rec.n_samples()
        )));
    }
    Ok(hyp
        .stages()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == stage)
        .map(|(i, _)| i * len..(i + 1) * len)
        .collect())
}

/// Sort and join overlapping or touching ranges.
pub fn merge_spans(spans: &[Range<usize>]) -> Vec<Range<usize>> {
    let mut sorted: Vec<Range<usize>> = spans.iter().filter(|s| !s.is_empty()).cloned().collect();
    sorted.sort_by_key(|s| s.start);
    let mut out: Vec<Range<usize>> = Vec::with_capacity(sorted.len());
    for s in sorted {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

pub fn load_hypnogram(path: &Path) -> Result<Hypnogram> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Hypnogram::parse(&text)
}

/// Load by extension: `.edf` directly, anything else as CSV with `sidecar`.
pub fn load_recording(path: &Path, sidecar: Option<&Sidecar>) -> Result<Recording> {
    let is_edf = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("edf"));
    if is_edf {
        let mut rec = load_edf_recording(path)?;
        if let Some(sc) = sidecar {
            if let Some(id) = &sc.subject_id {
                rec.subject_id = id.clone();
            }
            if let Some(state) = sc.state()? {
                rec.state = state;
            }
        }
        Ok(rec)
    } else {
        let sc = sidecar.ok_or_else(|| {
            Error::Config(format!("CSV recording {} needs a sidecar", path.display()))
        })?;
        load_csv_recording(path, sc)
    }
}

/// Mean and standard error of the mean (sample standard deviation / sqrt(n)).
pub fn mean_sem(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// "92.85 ± 4.66"
pub fn format_mean_sem(mean: f64, sem: f64) -> String {
    format!("{mean:.2} ± {sem:.2}")
}
