//! Seeded generators for coupled-oscillator signals, common-source channel
//! pairs and labelled cohorts.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classify::SubjectFeatureSet;
use crate::dsp::{fft_real, ifft};
use crate::error::{Error, Result};
use crate::recording::{
    Group, Hypnogram, Recording, Roi, RoiMap, Session, Sex, Stage, StateTag, SubjectMeta,
};
use crate::seed;
use crate::spectral::analytic;

/// Gaussian noise band-limited to `[lo, hi]` Hz by zeroing FFT bins, scaled
/// to unit standard deviation.
pub fn narrowband_noise(rng: &mut ChaCha8Rng, n: usize, sample_rate: f64, lo: f64, hi: f64) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let mut spec = fft_real(&white);
    for (k, v) in spec.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * sample_rate / n as f64;
        if f < lo || f > hi {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    let x: Vec<f64> = ifft(spec).into_iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    if sd == 0.0 {
        return x;
    }
    x.into_iter().map(|v| (v - mean) / sd).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacSignalSpec {
    pub phase_freq: f64,
    pub amp_freq: f64,
    /// Coupling factor in [0, 1].
    pub coupling: f64,
    /// Fast-oscillation base amplitude.
    pub amp_scale: f64,
    pub noise_sd: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for PacSignalSpec {
    fn default() -> Self {
        PacSignalSpec {
            phase_freq: 1.5,
            amp_freq: 20.0,
            coupling: 1.0,
            amp_scale: 0.5,
            noise_sd: 0.5,
            duration: 120.0,
            sample_rate: 250.0,
            seed: 0,
        }
    }
}

/// Modulation envelope `1 - chi + chi (1 + s) / 2` for a slow value `s` in [-1, 1].
pub fn modulation_envelope(coupling: f64, slow: f64) -> f64 {
    1.0 - coupling + coupling * (1.0 + slow) / 2.0
}

pub fn gen_pac_signal(spec: &PacSignalSpec) -> Result<Vec<f64>> {
    if !(spec.phase_freq > 0.0 && spec.phase_freq < spec.amp_freq) {
        return Err(Error::domain("phase frequency must be positive and below amplitude frequency"));
    }
    if !(0.0..=1.0).contains(&spec.coupling) {
        return Err(Error::domain(format!("coupling {} outside [0, 1]", spec.coupling)));
    }
    if !(spec.noise_sd >= 0.0 && spec.sample_rate > 0.0) {
        return Err(Error::domain("noise sd and sample rate must be non-negative and positive"));
    }
    if spec.duration * spec.phase_freq < 10.0 {
        return Err(Error::domain("signal shorter than ten slow cycles"));
    }
    if spec.amp_freq >= spec.sample_rate / 2.0 {
        return Err(Error::domain("amplitude frequency at or above Nyquist"));
    }
    let n = (spec.duration * spec.sample_rate).round() as usize;
    let mut rng = seed::rng(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::domain(e.to_string()))?;
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / spec.sample_rate;
            let slow = (2.0 * PI * spec.phase_freq * t).sin();
            let fast = (2.0 * PI * spec.amp_freq * t).sin();
            slow + modulation_envelope(spec.coupling, slow) * spec.amp_scale * fast
                + noise.sample(&mut rng)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonSourceSpec {
    pub lag_samples: usize,
    /// Rows map `[s(t), s(t - lag)]` onto the two channels.
    pub mix: [[f64; 2]; 2],
    pub noise_sd: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub seed: u64,
}

impl Default for CommonSourceSpec {
    fn default() -> Self {
        CommonSourceSpec {
            lag_samples: 0,
            mix: [[1.0, 0.0], [0.0, 1.0]],
            noise_sd: 0.5,
            duration: 60.0,
            sample_rate: 250.0,
            band_low: 8.0,
            band_high: 12.0,
            seed: 0,
        }
    }
}

impl CommonSourceSpec {
    /// Samples in a quarter cycle at the band centre.
    pub fn quarter_cycle(&self) -> usize {
        let fc = 0.5 * (self.band_low + self.band_high);
        (self.sample_rate / (4.0 * fc)).round() as usize
    }
}

/// Two channels `M [s(t); s(t - lag)] + noise` of one narrowband source `s`.
pub fn gen_common_source_pair(spec: &CommonSourceSpec) -> Result<Recording> {
    let m = spec.mix;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|v| v * v).sum::<f64>();
    if !(det.abs() > 1e-9 * scale) {
        return Err(Error::domain("mixing matrix is singular"));
    }
    if spec.noise_sd < 0.0 {
        return Err(Error::domain("negative noise sd"));
    }
    let n = (spec.duration * spec.sample_rate).round() as usize;
    let lag = spec.lag_samples;
    let mut rng = seed::rng(spec.seed);
    let s = narrowband_noise(&mut rng, n + lag, spec.sample_rate, spec.band_low, spec.band_high);
    let now = &s[lag..];
    let before = &s[..n];
    let mut rows = vec![Vec::with_capacity(n), Vec::with_capacity(n)];
    for t in 0..n {
        for (c, row) in rows.iter_mut().enumerate() {
            let mut v = m[c][0] * now[t] + m[c][1] * before[t];
            if spec.noise_sd > 0.0 {
                v += spec.noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            }
            row.push(v);
        }
    }
    Recording::new(
        format!("pair-{}", spec.seed),
        spec.sample_rate,
        vec!["X".into(), "Y".into()],
        rows,
        StateTag::NAP,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub feature: usize,
    /// Mean shift of the PS group in units of the common standard deviation.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_gs: usize,
    pub n_ps: usize,
    pub n_features: usize,
    pub effects: Vec<PlantedEffect>,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_gs: 11,
            n_ps: 13,
            n_features: 20,
            effects: Vec::new(),
            seed: 0,
        }
    }
}

/// Unit-variance Gaussian features; PS subjects carry the planted shifts.
/// GS subjects come first.
pub fn gen_cohort(spec: &CohortSpec) -> Result<Vec<SubjectFeatureSet>> {
    if spec.n_gs < 2 || spec.n_ps < 2 {
        return Err(Error::domain("each group needs at least two subjects"));
    }
    if spec.n_features == 0 {
        return Err(Error::domain("cohort needs at least one feature"));
    }
    if let Some(e) = spec.effects.iter().find(|e| e.feature >= spec.n_features) {
        return Err(Error::domain(format!("planted feature {} out of range", e.feature)));
    }
    let mut shift = vec![0.0; spec.n_features];
    for e in &spec.effects {
        shift[e.feature] += e.shift;
    }
    Ok((0..spec.n_gs + spec.n_ps)
        .map(|i| {
            let group = if i < spec.n_gs { Group::GS } else { Group::PS };
            let mut rng = seed::rng(seed::derive(spec.seed, i as u64));
            let features = (0..spec.n_features)
                .map(|f| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if group == Group::PS {
                        z + shift[f]
                    } else {
                        z
                    }
                })
                .collect();
            SubjectFeatureSet {
                subject_id: format!("S{:02}", i + 1),
                features,
                label: group,
                session: None,
            }
        })
        .collect())
}

/// Raw multichannel cohort with group differences planted in frontal beta
/// power, temporal-parietal delta lag and delta-phase/beta-amplitude coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCohortSpec {
    pub n_gs: usize,
    pub n_ps: usize,
    /// Subjects per group whose nap contains no N3 epoch.
    pub no_n3_gs: usize,
    pub no_n3_ps: usize,
    pub sample_rate: f64,
    pub rs_seconds: f64,
    pub nap_epochs: usize,
    pub channels_per_roi: usize,
    /// Planted effect strength; 0 makes the groups identical in distribution.
    pub effect: f64,
    /// Upper bound on spike-contaminated channels per recording.
    pub max_bad_channels: usize,
    pub seed: u64,
}

impl Default for RawCohortSpec {
    fn default() -> Self {
        RawCohortSpec {
            n_gs: 11,
            n_ps: 13,
            no_n3_gs: 4,
            no_n3_ps: 4,
            sample_rate: 500.0,
            rs_seconds: 60.0,
            nap_epochs: 8,
            channels_per_roi: 4,
            effect: 1.0,
            max_bad_channels: 2,
            seed: 0,
        }
    }
}

const MONTAGE: [[&str; 4]; 5] = [
    ["F3", "Fz", "F4", "AFz"],
    ["C3", "Cz", "C4", "FCz"],
    ["T7", "T8", "TP7", "TP8"],
    ["P3", "Pz", "P4", "CPz"],
    ["O1", "Oz", "O2", "POz"],
];

impl RawCohortSpec {
    fn validate(&self) -> Result<()> {
        if self.n_gs < 2 || self.n_ps < 2 {
            return Err(Error::domain("each group needs at least two subjects"));
        }
        if self.no_n3_gs > self.n_gs || self.no_n3_ps > self.n_ps {
            return Err(Error::domain("more N3-free subjects than group members"));
        }
        if !(2..=4).contains(&self.channels_per_roi) {
            return Err(Error::domain("channels per region must be 2-4"));
        }
        if self.nap_epochs < 6 {
            return Err(Error::domain("nap needs at least six epochs"));
        }
        if !(self.sample_rate >= 100.0) || !(self.rs_seconds >= 10.0) {
            return Err(Error::domain("sample rate or resting duration too small"));
        }
        Ok(())
    }

    pub fn channel_labels(&self) -> Vec<String> {
        MONTAGE
            .iter()
            .flat_map(|r| r[..self.channels_per_roi].iter().map(|s| s.to_string()))
            .collect()
    }

    pub fn roi_map(&self) -> RoiMap {
        RoiMap::from_pairs(MONTAGE.iter().zip(Roi::ALL).flat_map(|(labels, roi)| {
            labels[..self.channels_per_roi].iter().map(move |l| (l.to_string(), roi))
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub recording: Recording,
    pub hypnogram: Option<Hypnogram>,
    /// Labels of the spike-contaminated channels.
    pub planted_bad: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCohort {
    pub subjects: Vec<SubjectMeta>,
    pub recordings: Vec<RawRecording>,
    pub roi_map: RoiMap,
}

fn nap_hypnogram(epochs: usize, with_n3: bool) -> Hypnogram {
    let mut stages = vec![Stage::N2; epochs];
    stages[0] = Stage::Wake;
    stages[1] = Stage::N1;
    if with_n3 {
        for s in &mut stages[3..epochs - 1] {
            *s = Stage::N3;
        }
    }
    stages[epochs - 1] = Stage::N1;
    Hypnogram::new(stages)
}

struct SubjectTraits {
    beta_gain: f64,
    coupling: f64,
    lagged: bool,
}

/// Excess kurtosis of `(1 + m sin) * g` for Gaussian `g`.
fn modulated_excess_kurtosis(m: f64) -> f64 {
    let m2 = m * m;
    3.0 * (1.0 + 3.0 * m2 + 0.375 * m2 * m2) / (1.0 + 0.5 * m2).powi(2) - 3.0
}

fn depth_for_excess_kurtosis(target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if modulated_excess_kurtosis(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn quantize(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn gen_raw_recording(
    spec: &RawCohortSpec,
    traits: &SubjectTraits,
    subject_id: &str,
    state: StateTag,
    seconds: f64,
    seed_value: u64,
) -> Result<(Recording, Vec<String>)> {
    let rate = spec.sample_rate;
    let n = (seconds * rate).round() as usize;
    let mut rng = seed::rng(seed_value);
    let lag = (rate / (4.0 * 1.75)).round() as usize;
    let delta = narrowband_noise(&mut rng, n + lag, rate, 1.0, 2.5);
    let phase: Vec<f64> = analytic(&delta[lag..])?
        .iter()
        .map(|c| c.im.atan2(c.re))
        .collect();
    let carrier = narrowband_noise(&mut rng, n, rate, 16.0, 24.0);
    let beta: Vec<f64> = carrier
        .iter()
        .zip(&phase)
        .map(|(b, p)| 4.0 * traits.beta_gain * modulation_envelope(traits.coupling, p.cos()) * b)
        .collect();
    let labels = spec.channel_labels();
    let k = spec.channels_per_roi;
    let mut samples = Vec::with_capacity(labels.len());
    for (ci, _) in labels.iter().enumerate() {
        let roi = Roi::ALL[ci / k];
        let gain = 0.8 + 0.4 * rng.random::<f64>();
        let background = narrowband_noise(&mut rng, n, rate, 0.5, 30.0);
        // Channel-specific slow amplitude drift spreads kurtosis across the montage.
        let depth = depth_for_excess_kurtosis(rng.random::<f64>() * modulated_excess_kurtosis(0.9));
        let drift_phase = 2.0 * PI * rng.random::<f64>();
        let drift: Vec<f64> = (0..n)
            .map(|t| (2.0 * PI * 0.2 * t as f64 / rate + drift_phase).sin())
            .collect();
        let row: Vec<f64> = (0..n)
            .map(|t| {
                let mut v = 10.0 * background[t] + 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
                match roi {
                    Roi::Temporal => v += 20.0 * gain * delta[lag + t],
                    Roi::Parietal => {
                        let src = if traits.lagged { delta[t] } else { delta[lag + t] };
                        v += 20.0 * gain * src;
                    }
                    Roi::Frontal => v += gain * beta[t],
                    _ => v += 2.0 * gain * carrier[t],
                }
                (1.0 + depth * drift[t]) * v
            })
            .collect();
        samples.push(row);
    }
    // At most one contaminated channel per region.
    let n_bad = rng.random_range(0..=spec.max_bad_channels.min(Roi::ALL.len()));
    let mut regions: Vec<usize> = (0..Roi::ALL.len()).collect();
    regions.shuffle(&mut rng);
    let mut bad: Vec<usize> = regions[..n_bad]
        .iter()
        .map(|&r| r * k + rng.random_range(0..k))
        .collect();
    bad.sort_unstable();
    let spacing = (rate * 0.7) as usize;
    let width = rate * 0.008;
    let reach = (4.0 * width).ceil() as usize;
    for &ci in &bad {
        let mut t = rng.random_range(0..spacing);
        while t < n {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for d in t.saturating_sub(reach)..(t + reach + 1).min(n) {
                let x = (d as f64 - t as f64) / width;
                samples[ci][d] += sign * 300.0 * (-0.5 * x * x).exp();
            }
            t += spacing + rng.random_range(0..spacing);
        }
    }
    for row in &mut samples {
        for v in row.iter_mut() {
            *v = quantize(*v);
        }
    }
    let rec = Recording::new(subject_id, rate, labels.clone(), samples, state)?;
    Ok((rec, bad.into_iter().map(|i| labels[i].clone()).collect()))
}

/// Subjects, one nap and eight resting-state recordings each.
pub fn gen_raw_cohort(spec: &RawCohortSpec) -> Result<RawCohort> {
    spec.validate()?;
    let total = spec.n_gs + spec.n_ps;
    let mut meta_rng = seed::rng(seed::derive(spec.seed, u64::MAX));
    let mut subjects = Vec::with_capacity(total);
    let mut traits = Vec::with_capacity(total);
    for i in 0..total {
        let gs = i < spec.n_gs;
        let psqi = if gs {
            meta_rng.random_range(1..=5)
        } else {
            meta_rng.random_range(6..=14)
        };
        let age = 20.0 + meta_rng.random_range(0..12) as f64;
        let sex = if meta_rng.random::<bool>() { Sex::F } else { Sex::M };
        subjects.push(SubjectMeta::new(format!("S{:02}", i + 1), psqi, age, sex)?);
        let jitter = 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut meta_rng);
        let e = spec.effect;
        traits.push(SubjectTraits {
            beta_gain: (1.0 + if gs { e } else { 0.0 } + jitter).max(0.2),
            coupling: (0.2 + if gs { 0.6 * e.min(1.0) } else { 0.0 } + jitter).clamp(0.0, 1.0),
            lagged: gs && e > 0.0,
        });
    }
    let no_n3 = |i: usize| {
        if i < spec.n_gs {
            i < spec.no_n3_gs
        } else {
            i - spec.n_gs < spec.no_n3_ps
        }
    };
    let mut jobs = Vec::new();
    for i in 0..total {
        jobs.push((i, StateTag::NAP));
        for rs in Session::ALL.iter().flat_map(|s| s.rs_indices()) {
            jobs.push((i, StateTag::resting(*rs)?));
        }
    }
    let recordings = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(i, state))| {
            let (seconds, hyp) = match state.rs_index {
                None => (
                    spec.nap_epochs as f64 * Hypnogram::EPOCH_SECONDS,
                    Some(nap_hypnogram(spec.nap_epochs, !no_n3(i))),
                ),
                Some(_) => (spec.rs_seconds, None),
            };
            let (recording, planted_bad) = gen_raw_recording(
                spec,
                &traits[i],
                &subjects[i].subject_id,
                state,
                seconds,
                seed::derive(spec.seed, j as u64),
            )?;
            Ok(RawRecording {
                recording,
                hypnogram: hyp,
                planted_bad,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawCohort {
        subjects,
        recordings,
        roi_map: spec.roi_map(),
    })
}
