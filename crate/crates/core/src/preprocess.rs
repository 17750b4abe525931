//! Signal conditioning: decimation, zero-phase FIR band-pass, kurtosis-based
//! bad-channel detection, average reference and fixed-length epoching.

use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{convolve_centered, hamming, reflect_pad};
use crate::error::{Error, Result};
use crate::recording::Recording;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirWindow {
    Hamming,
}

/// Windowed-sinc band-pass design. The band edges are the -6 dB points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub num_taps: usize,
    pub window: FirWindow,
}

/// Transition bandwidth heuristic for a Hamming windowed-sinc edge, following
/// the usual EEG toolbox rule: a quarter of the edge frequency, at least 2 Hz,
/// but never wider than the distance to DC (high-pass edge) or Nyquist
/// (low-pass edge).
fn transition_width(edge_hz: f64, limit_hz: f64) -> f64 {
    (0.25 * edge_hz).max(2.0).min(limit_hz)
}

/// Hamming main-lobe rule: 3.3 / (transition / rate), rounded up to odd.
pub fn hamming_taps(sample_rate: f64, transition_hz: f64) -> usize {
    let n = (3.3 * sample_rate / transition_hz).ceil() as usize;
    n | 1
}

impl FilterSpec {
    /// Band-pass with the default tap count for `sample_rate`. For the
    /// 0.5-30 Hz EEG band this is `ceil(3.3 * rate / 0.5)` rounded to odd.
    pub fn bandpass(low_hz: f64, high_hz: f64, sample_rate: f64) -> Self {
        let nyquist = 0.5 * sample_rate;
        let df = transition_width(low_hz, low_hz).min(transition_width(high_hz, nyquist - high_hz));
        FilterSpec {
            low_hz,
            high_hz,
            num_taps: hamming_taps(sample_rate, df.max(f64::MIN_POSITIVE)),
            window: FirWindow::Hamming,
        }
    }

    /// The 0.5-30 Hz conditioning band.
    pub fn eeg_default(sample_rate: f64) -> Self {
        Self::bandpass(0.5, 30.0, sample_rate)
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < 0.5 * sample_rate)
        {
            return Err(Error::domain(format!(
                "band {}-{} Hz invalid at {} Hz",
                self.low_hz, self.high_hz, sample_rate
            )));
        }
        if self.num_taps % 2 == 0 || self.num_taps == 0 {
            return Err(Error::domain(format!(
                "tap count {} must be odd and positive",
                self.num_taps
            )));
        }
        Ok(())
    }

    /// Filter coefficients.
    pub fn design(&self, sample_rate: f64) -> Vec<f64> {
        let f1 = self.low_hz / sample_rate;
        let f2 = self.high_hz / sample_rate;
        windowed_sinc(self.num_taps, |m| {
            2.0 * f2 * sinc(2.0 * f2 * m) - 2.0 * f1 * sinc(2.0 * f1 * m)
        })
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn windowed_sinc(taps: usize, ideal: impl Fn(f64) -> f64) -> Vec<f64> {
    let w = hamming(taps);
    let mid = (taps / 2) as f64;
    w.iter()
        .enumerate()
        .map(|(i, wi)| wi * ideal(i as f64 - mid))
        .collect()
}

/// Low-pass windowed-sinc kernel with cutoff (-6 dB) at `cutoff_hz`.
pub fn design_lowpass(cutoff_hz: f64, sample_rate: f64, taps: usize) -> Vec<f64> {
    let fc = cutoff_hz / sample_rate;
    windowed_sinc(taps, |m| 2.0 * fc * sinc(2.0 * fc * m))
}

/// Apply a symmetric odd-length kernel with zero net delay. The series is
/// mirror-padded by the kernel length on both sides and trimmed afterwards.
pub fn filter_zero_phase(x: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    let pad = kernel.len();
    if x.len() <= pad {
        return Err(Error::SignalTooShort {
            needed: pad + 1,
            actual: x.len(),
        });
    }
    let padded = reflect_pad(x, pad);
    let y = convolve_centered(&padded, kernel);
    Ok(y[pad..pad + x.len()].to_vec())
}

/// Band-pass a single series, enforcing the length precondition.
pub fn bandpass_series(x: &[f64], spec: &FilterSpec, sample_rate: f64) -> Result<Vec<f64>> {
    spec.validate(sample_rate)?;
    let needed = 3 * spec.num_taps + 1;
    if x.len() < needed {
        return Err(Error::SignalTooShort {
            needed,
            actual: x.len(),
        });
    }
    filter_zero_phase(x, &spec.design(sample_rate))
}

pub fn bandpass_zero_phase(rec: &Recording, spec: &FilterSpec) -> Result<Recording> {
    spec.validate(rec.sample_rate)?;
    let needed = 3 * spec.num_taps + 1;
    if rec.n_samples() < needed {
        return Err(Error::SignalTooShort {
            needed,
            actual: rec.n_samples(),
        });
    }
    let kernel = spec.design(rec.sample_rate);
    let samples = rec
        .samples
        .par_iter()
        .map(|row| filter_zero_phase(row, &kernel))
        .collect::<Result<Vec<_>>>()?;
    Ok(rec.with_samples(samples, rec.sample_rate))
}

/// Integer-factor decimation with an anti-alias low-pass at 0.4 x the target
/// rate.
pub fn downsample(rec: &Recording, target_rate: f64) -> Result<Recording> {
    if !(target_rate > 0.0) {
        return Err(Error::UnsupportedRate(format!("target rate {target_rate}")));
    }
    let ratio = rec.sample_rate / target_rate;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return Err(Error::UnsupportedRate(format!(
            "{} Hz is not an integer multiple of {} Hz",
            rec.sample_rate, target_rate
        )));
    }
    let factor = factor as usize;
    if factor == 1 {
        return Ok(rec.clone());
    }
    let cutoff = 0.4 * target_rate;
    let df = transition_width(cutoff, 0.5 * rec.sample_rate - cutoff);
    let taps = hamming_taps(rec.sample_rate, df);
    let kernel = design_lowpass(cutoff, rec.sample_rate, taps);
    let samples = rec
        .samples
        .par_iter()
        .map(|row| {
            let y = filter_zero_phase(row, &kernel)?;
            Ok(y.into_iter().step_by(factor).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(rec.with_samples(samples, target_rate))
}

/// Excess kurtosis with population moments. `None` for a flat series.
pub fn kurtosis(x: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    if m2 <= f64::MIN_POSITIVE {
        None
    } else {
        Some(m4 / (m2 * m2) - 3.0)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust (median/MAD) z-scores.
pub fn robust_z(values: &[f64]) -> Vec<f64> {
    let mut tmp = values.to_vec();
    let med = median(&mut tmp);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    let mut scale = 1.482_602_218_505_602 * median(&mut dev);
    if scale <= 0.0 {
        // More than half the population is identical; fall back to the mean
        // absolute deviation rescaled to a normal sigma.
        scale = 1.253_314_137_315_500_3 * dev.iter().sum::<f64>() / dev.len() as f64;
    }
    if scale <= 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - med) / scale).collect()
}

/// Labels of channels whose kurtosis z-score (median/MAD across channels)
/// exceeds `z_threshold` in magnitude. Flat channels are always flagged.
pub fn detect_bad_channels(rec: &Recording, z_threshold: f64) -> Result<Vec<String>> {
    if rec.n_channels() < 4 {
        return Err(Error::InsufficientChannels {
            needed: 4,
            actual: rec.n_channels(),
        });
    }
    let kurt: Vec<Option<f64>> = rec.samples.par_iter().map(|row| kurtosis(row)).collect();
    let finite: Vec<(usize, f64)> = kurt
        .iter()
        .enumerate()
        .filter_map(|(i, k)| k.map(|k| (i, k)))
        .collect();
    let z = robust_z(&finite.iter().map(|(_, k)| *k).collect::<Vec<_>>());
    let mut bad = vec![false; rec.n_channels()];
    for (i, k) in kurt.iter().enumerate() {
        if k.is_none() {
            bad[i] = true;
        }
    }
    for ((i, _), zi) in finite.iter().zip(&z) {
        if zi.abs() > z_threshold {
            bad[*i] = true;
        }
    }
    Ok(rec
        .channel_labels
        .iter()
        .zip(bad)
        .filter(|(_, b)| *b)
        .map(|(l, _)| l.clone())
        .collect())
}

/// Subtract the across-channel mean at every instant.
pub fn average_reference(rec: &Recording) -> Result<Recording> {
    let c = rec.n_channels();
    if c < 2 {
        return Err(Error::InsufficientChannels {
            needed: 2,
            actual: c,
        });
    }
    let n = rec.n_samples();
    let mut mean = vec![0.0; n];
    for row in &rec.samples {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= c as f64;
    }
    let samples = rec
        .samples
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    Ok(rec.with_samples(samples, rec.sample_rate))
}

/// A fixed-length window into a recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Epoch {
    pub index: usize,
    pub samples: Range<usize>,
}

/// Consecutive non-overlapping epochs; a trailing partial epoch is dropped.
pub fn segment_epochs(rec: &Recording, epoch_seconds: f64) -> Result<Vec<Epoch>> {
    let len = (epoch_seconds * rec.sample_rate).round() as usize;
    if len == 0 {
        return Err(Error::domain("epoch length rounds to zero samples"));
    }
    let n = rec.n_samples();
    if n < len {
        return Err(Error::SignalTooShort {
            needed: len,
            actual: n,
        });
    }
    Ok((0..n / len)
        .map(|i| Epoch {
            index: i,
            samples: i * len..(i + 1) * len,
        })
        .collect())
}

/// Conditioning parameters for the full chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub target_rate_hz: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Overrides the default tap count when set.
    pub num_taps: Option<usize>,
    pub kurtosis_z: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            target_rate_hz: 250.0,
            low_hz: 0.5,
            high_hz: 30.0,
            num_taps: None,
            kurtosis_z: 5.0,
        }
    }
}

/// Output of the conditioning chain.
#[derive(Debug, Clone)]
pub struct Cleaned {
    pub recording: Recording,
    pub bad_channels: Vec<String>,
    pub total_channels: usize,
}

impl Cleaned {
    pub fn retention(&self) -> f64 {
        crate::ingest::compute_retention(self.total_channels, self.recording.n_channels())
            .unwrap_or(0.0)
    }
}

/// Downsample, band-pass, drop kurtosis outliers, re-reference.
pub fn clean(rec: &Recording, params: &PreprocessParams) -> Result<Cleaned> {
    let rec_ds = downsample(rec, params.target_rate_hz)?;
    let mut spec = FilterSpec::bandpass(params.low_hz, params.high_hz, rec_ds.sample_rate);
    if let Some(t) = params.num_taps {
        spec.num_taps = t;
    }
    let filtered = bandpass_zero_phase(&rec_ds, &spec)?;
    let bad = detect_bad_channels(&filtered, params.kurtosis_z)?;
    let kept = filtered.without_channels(&bad);
    let referenced = average_reference(&kept)?;
    Ok(Cleaned {
        recording: referenced,
        bad_channels: bad,
        total_channels: rec.n_channels(),
    })
}
