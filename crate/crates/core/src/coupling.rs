//! Phase-amplitude coupling: the Tort modulation index, cyclic-shift
//! surrogates and comodulograms.

use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{bandpass_series, FilterSpec};
use crate::recording::{Recording, Roi, RoiMap};
use crate::seed;
use crate::spectral::analytic_signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBinning {
    pub n_bins: usize,
}

impl Default for PhaseBinning {
    fn default() -> Self {
        PhaseBinning { n_bins: 18 }
    }
}

impl PhaseBinning {
    pub fn width_degrees(&self) -> f64 {
        360.0 / self.n_bins as f64
    }

    /// Lower bin edges in degrees, starting at -180.
    pub fn edges_degrees(&self) -> Vec<f64> {
        (0..=self.n_bins)
            .map(|j| -180.0 + j as f64 * self.width_degrees())
            .collect()
    }

    /// Bin of a phase in (-pi, pi].
    pub fn bin(&self, phase: f64) -> usize {
        let j = ((phase + PI) / (2.0 * PI) * self.n_bins as f64).floor();
        (j.max(0.0) as usize).min(self.n_bins - 1)
    }
}

/// Normalized mean amplitude per phase bin.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeDistribution {
    pub p: Vec<f64>,
}

fn bin_indices(phase: &[f64], binning: &PhaseBinning) -> Result<(Vec<u16>, Vec<usize>)> {
    if binning.n_bins < 2 || binning.n_bins > u16::MAX as usize {
        return Err(Error::domain(format!("{} phase bins", binning.n_bins)));
    }
    let idx: Vec<u16> = phase.iter().map(|&p| binning.bin(p) as u16).collect();
    let mut counts = vec![0usize; binning.n_bins];
    for &j in &idx {
        counts[j as usize] += 1;
    }
    if let Some(bin) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InsufficientCoverage { bin });
    }
    Ok((idx, counts))
}

fn distribution_from_sums(sums: &[f64], counts: &[usize]) -> Result<Vec<f64>> {
    let means: Vec<f64> = sums
        .iter()
        .zip(counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let total: f64 = means.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("amplitude envelope sums to zero"));
    }
    Ok(means.into_iter().map(|m| m / total).collect())
}

pub fn amplitude_distribution(
    phase: &[f64],
    amplitude: &[f64],
    binning: &PhaseBinning,
) -> Result<AmplitudeDistribution> {
    if phase.len() != amplitude.len() {
        return Err(Error::domain("phase and amplitude lengths differ"));
    }
    let (idx, counts) = bin_indices(phase, binning)?;
    let mut sums = vec![0.0; binning.n_bins];
    for (&j, &a) in idx.iter().zip(amplitude) {
        sums[j as usize] += a;
    }
    Ok(AmplitudeDistribution {
        p: distribution_from_sums(&sums, &counts)?,
    })
}

/// KL divergence from uniform divided by log N.
pub fn modulation_index(dist: &AmplitudeDistribution) -> f64 {
    mi_of(&dist.p)
}

fn mi_of(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let first = p[0];
    if p.iter().all(|&v| v == first) {
        return 0.0;
    }
    let kl: f64 = p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * (v * n).ln())
        .sum();
    (kl / n.ln()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub r: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig { r: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateResult {
    pub observed: f64,
    pub surrogates: Vec<f64>,
    pub p_value: f64,
}

/// Precomputed phase bins reused across many amplitude shifts.
struct BinnedPhase {
    idx: Vec<u16>,
    counts: Vec<usize>,
}

impl BinnedPhase {
    fn new(phase: &[f64], binning: &PhaseBinning) -> Result<Self> {
        let (idx, counts) = bin_indices(phase, binning)?;
        Ok(BinnedPhase { idx, counts })
    }

    fn mi_shifted(&self, amplitude: &[f64], shift: usize) -> Result<f64> {
        let n = amplitude.len();
        let mut sums = vec![0.0; self.counts.len()];
        let (head, tail) = self.idx.split_at(n - shift);
        for (&j, &a) in head.iter().zip(&amplitude[shift..]) {
            sums[j as usize] += a;
        }
        for (&j, &a) in tail.iter().zip(&amplitude[..shift]) {
            sums[j as usize] += a;
        }
        Ok(mi_of(&distribution_from_sums(&sums, &self.counts)?))
    }
}

/// Observed MI against `r` circular shifts of the amplitude series. Offsets
/// are uniform on `[min_shift, L - min_shift]`.
pub fn surrogate_mi(
    phase: &[f64],
    amplitude: &[f64],
    binning: &PhaseBinning,
    min_shift: usize,
    config: &SurrogateConfig,
) -> Result<SurrogateResult> {
    let n = phase.len();
    if amplitude.len() != n {
        return Err(Error::domain("phase and amplitude lengths differ"));
    }
    let min_shift = min_shift.max(1);
    if n < 10 * min_shift {
        return Err(Error::SignalTooShort {
            needed: 10 * min_shift,
            actual: n,
        });
    }
    let binned = BinnedPhase::new(phase, binning)?;
    surrogates_binned(&binned, amplitude, min_shift, config)
}

fn surrogates_binned(
    binned: &BinnedPhase,
    amplitude: &[f64],
    min_shift: usize,
    config: &SurrogateConfig,
) -> Result<SurrogateResult> {
    let n = amplitude.len();
    let observed = binned.mi_shifted(amplitude, 0)?;
    let mut rng = seed::rng(config.seed);
    let surrogates = (0..config.r)
        .map(|_| binned.mi_shifted(amplitude, rng.random_range(min_shift..=n - min_shift) % n))
        .collect::<Result<Vec<_>>>()?;
    let exceed = surrogates.iter().filter(|&&s| s >= observed).count();
    Ok(SurrogateResult {
        observed,
        p_value: (1 + exceed) as f64 / (config.r + 1) as f64,
        surrogates,
    })
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacConfig {
    pub phase_centers: Vec<f64>,
    pub amp_centers: Vec<f64>,
    pub phase_half_width: f64,
    pub phase_floor_hz: f64,
    pub amp_half_width: f64,
    pub n_bins: usize,
    /// Fraction trimmed from each end after the analytic signal.
    pub trim_fraction: f64,
    /// Phase centres at or above this limit are excluded from the
    /// delta-beta summary.
    pub delta_max_hz: f64,
    pub beta_min_hz: f64,
    pub beta_max_hz: f64,
}

impl Default for PacConfig {
    fn default() -> Self {
        PacConfig {
            phase_centers: linspace(0.5, 10.0, 10),
            amp_centers: linspace(11.0, 30.0, 10),
            phase_half_width: 1.0,
            phase_floor_hz: 0.25,
            amp_half_width: 2.5,
            n_bins: 18,
            trim_fraction: 0.1,
            delta_max_hz: 4.0,
            beta_min_hz: 11.0,
            beta_max_hz: 30.0,
        }
    }
}

impl PacConfig {
    pub fn binning(&self) -> PhaseBinning {
        PhaseBinning {
            n_bins: self.n_bins,
        }
    }

    pub fn phase_band(&self, center: f64) -> (f64, f64) {
        (
            (center - self.phase_half_width).max(self.phase_floor_hz),
            center + self.phase_half_width,
        )
    }

    pub fn amp_band(&self, center: f64) -> (f64, f64) {
        (center - self.amp_half_width, center + self.amp_half_width)
    }

    fn validate(&self) -> Result<()> {
        let pmax = self.phase_centers.iter().copied().fold(f64::MIN, f64::max);
        let amin = self.amp_centers.iter().copied().fold(f64::MAX, f64::min);
        if self.phase_centers.is_empty() || self.amp_centers.is_empty() || pmax >= amin {
            return Err(Error::domain("phase centres must lie below amplitude centres"));
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(Error::domain("trim fraction outside [0, 0.5)"));
        }
        Ok(())
    }

    /// Samples per cycle of the slowest phase band edge.
    pub fn min_shift(&self, sample_rate: f64) -> usize {
        let slowest = self
            .phase_centers
            .iter()
            .map(|&c| self.phase_band(c).0)
            .fold(f64::MAX, f64::min);
        (sample_rate / slowest).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comodulogram {
    pub phase_freqs: Vec<f64>,
    pub amp_freqs: Vec<f64>,
    /// `mi[phase][amp]`.
    pub mi: Vec<Vec<f64>>,
    pub surrogate_p: Option<Vec<Vec<f64>>>,
}

impl Comodulogram {
    /// Cell with the largest MI as `(phase index, amp index)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (i, row) in self.mi.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > self.mi[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    }
}

fn band_component(
    x: &[f64],
    sample_rate: f64,
    lo: f64,
    hi: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = FilterSpec::bandpass(lo, hi, sample_rate);
    analytic_signal(&bandpass_series(x, &spec, sample_rate)?)
}

/// Indices kept after edge trimming, restricted to `spans` when given.
fn kept_indices(n: usize, trim: f64, spans: Option<&[Range<usize>]>) -> Vec<usize> {
    let cut = (n as f64 * trim).floor() as usize;
    let inner = cut..n - cut;
    match spans {
        None => inner.collect(),
        Some(spans) => {
            let mut idx: Vec<usize> = spans
                .iter()
                .flat_map(|s| s.start.max(inner.start)..s.end.min(inner.end))
                .collect();
            idx.sort_unstable();
            idx.dedup();
            idx
        }
    }
}

fn select(x: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| x[i]).collect()
}

/// Phases for each centre and amplitude envelopes for each centre, after
/// trimming and span selection.
struct Components {
    phases: Vec<Vec<f64>>,
    amps: Vec<Vec<f64>>,
}

fn components(
    phase_src: &[f64],
    amp_src: &[f64],
    sample_rate: f64,
    phase_centers: &[f64],
    amp_centers: &[f64],
    config: &PacConfig,
    spans: Option<&[Range<usize>]>,
) -> Result<Components> {
    if phase_src.len() != amp_src.len() {
        return Err(Error::domain("phase and amplitude sources differ in length"));
    }
    let idx = kept_indices(phase_src.len(), config.trim_fraction, spans);
    let phases = phase_centers
        .par_iter()
        .map(|&c| {
            let (lo, hi) = config.phase_band(c);
            band_component(phase_src, sample_rate, lo, hi).map(|(p, _)| select(&p, &idx))
        })
        .collect::<Result<Vec<_>>>()?;
    let amps = amp_centers
        .par_iter()
        .map(|&c| {
            let (lo, hi) = config.amp_band(c);
            band_component(amp_src, sample_rate, lo, hi).map(|(_, a)| select(&a, &idx))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Components { phases, amps })
}

/// MI (and optional surrogate p) over the phase x amplitude grid. Phase is
/// taken from `phase_src` and amplitude from `amp_src`; pass the same series
/// twice for within-signal coupling. When `spans` is given, only samples
/// inside them contribute (filtering still runs on the full series).
pub fn comodulogram(
    phase_src: &[f64],
    amp_src: &[f64],
    sample_rate: f64,
    config: &PacConfig,
    surrogates: Option<&SurrogateConfig>,
    spans: Option<&[Range<usize>]>,
) -> Result<Comodulogram> {
    config.validate()?;
    let comp = components(
        phase_src,
        amp_src,
        sample_rate,
        &config.phase_centers,
        &config.amp_centers,
        config,
        spans,
    )?;
    let binning = config.binning();
    let binned = comp
        .phases
        .par_iter()
        .map(|p| BinnedPhase::new(p, &binning))
        .collect::<Result<Vec<_>>>()?;
    let n_amp = config.amp_centers.len();
    let min_shift = config.min_shift(sample_rate);
    let len = comp.amps.first().map_or(0, Vec::len);
    if surrogates.is_some() && len < 10 * min_shift {
        return Err(Error::SignalTooShort {
            needed: 10 * min_shift,
            actual: len,
        });
    }
    let cells = (0..binned.len() * n_amp)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / n_amp, cell % n_amp);
            match surrogates {
                None => Ok((binned[i].mi_shifted(&comp.amps[j], 0)?, None)),
                Some(s) => {
                    let cfg = SurrogateConfig {
                        r: s.r,
                        seed: seed::derive(s.seed, cell as u64),
                    };
                    let res = surrogates_binned(&binned[i], &comp.amps[j], min_shift, &cfg)?;
                    Ok((res.observed, Some(res.p_value)))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mi = cells.chunks(n_amp).map(|r| r.iter().map(|c| c.0).collect()).collect();
    let surrogate_p = surrogates.map(|_| {
        cells
            .chunks(n_amp)
            .map(|r| r.iter().map(|c| c.1.unwrap_or(1.0)).collect())
            .collect()
    });
    Ok(Comodulogram {
        phase_freqs: config.phase_centers.clone(),
        amp_freqs: config.amp_centers.clone(),
        mi,
        surrogate_p,
    })
}

/// Mean of the member channels of each region.
pub fn roi_signals(rec: &Recording, rois: &RoiMap) -> Result<Vec<Vec<f64>>> {
    let groups = rois.channel_groups(rec)?;
    Ok(groups
        .iter()
        .map(|members| {
            let mut acc = vec![0.0; rec.n_samples()];
            for &ch in members {
                for (a, v) in acc.iter_mut().zip(&rec.samples[ch]) {
                    *a += v;
                }
            }
            let k = members.len() as f64;
            acc.into_iter().map(|v| v / k).collect()
        })
        .collect())
}

/// Ordered region pairs (phase region, amplitude region), phase-major.
pub fn pac_pairs() -> Vec<(Roi, Roi)> {
    Roi::ALL
        .iter()
        .flat_map(|&p| Roi::ALL.iter().map(move |&a| (p, a)))
        .collect()
}

pub fn pac_pair_names() -> Vec<String> {
    pac_pairs()
        .into_iter()
        .map(|(p, a)| format!("{p}>{a}"))
        .collect()
}

/// Delta-phase x beta-amplitude coupling for every ordered region pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacPairValues {
    pub subject_id: String,
    /// Mean MI over the delta x beta cells, in `pac_pairs` order.
    pub values: Vec<f64>,
}

pub fn roi_pair_pac(
    rec: &Recording,
    rois: &RoiMap,
    config: &PacConfig,
    spans: Option<&[Range<usize>]>,
) -> Result<PacPairValues> {
    config.validate()?;
    if let Some(s) = spans {
        if s.is_empty() {
            return Err(Error::InsufficientData("no epochs selected".into()));
        }
    }
    let signals = roi_signals(rec, rois)?;
    let phase_centers: Vec<f64> = config
        .phase_centers
        .iter()
        .copied()
        .filter(|&c| c < config.delta_max_hz)
        .collect();
    let amp_centers: Vec<f64> = config
        .amp_centers
        .iter()
        .copied()
        .filter(|&c| c >= config.beta_min_hz && c <= config.beta_max_hz)
        .collect();
    if phase_centers.is_empty() || amp_centers.is_empty() {
        return Err(Error::domain("grid has no delta-phase or beta-amplitude centres"));
    }
    let comps = signals
        .par_iter()
        .map(|s| components(s, s, rec.sample_rate, &phase_centers, &amp_centers, config, spans))
        .collect::<Result<Vec<_>>>()?;
    let binning = config.binning();
    let binned: Vec<Vec<BinnedPhase>> = comps
        .iter()
        .map(|c| {
            c.phases
                .iter()
                .map(|p| BinnedPhase::new(p, &binning))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let values = pac_pairs()
        .par_iter()
        .map(|&(p, a)| {
            let mut total = 0.0;
            for bp in &binned[p.index()] {
                for amp in &comps[a.index()].amps {
                    total += bp.mi_shifted(amp, 0)?;
                }
            }
            Ok(total / (phase_centers.len() * amp_centers.len()) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PacPairValues {
        subject_id: rec.subject_id.clone(),
        values,
    })
}

/// Subjects x selected-pairs table; one column per `true` in `mask`.
pub fn delta_beta_pac_features(subjects: &[PacPairValues], mask: &[bool]) -> Result<Vec<Vec<f64>>> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptySelection);
    }
    subjects
        .iter()
        .map(|s| {
            if s.values.len() != mask.len() {
                return Err(Error::domain(format!(
                    "{}: {} pair values for a {}-entry mask",
                    s.subject_id,
                    s.values.len(),
                    mask.len()
                )));
            }
            Ok(s.values
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(v, _)| *v)
                .collect())
        })
        .collect()
}
