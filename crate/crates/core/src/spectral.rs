//! Short-time Fourier power, ROI x band power features and the analytic
//! signal.

use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{fft_real, forward_plan, ifft, kaiser};
use crate::error::{Error, Result};
use crate::ingest::merge_spans;
use crate::recording::{BandSet, Recording, Roi, RoiMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StftParams {
    pub window_seconds: f64,
    pub overlap_fraction: f64,
    pub kaiser_beta: f64,
    /// Lowest frequency row kept.
    pub min_hz: f64,
    /// Highest frequency row kept.
    pub max_hz: f64,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            window_seconds: 2.0,
            overlap_fraction: 0.99,
            kaiser_beta: 8.0,
            min_hz: 0.5,
            max_hz: 30.0,
        }
    }
}

impl StftParams {
    /// Same window and overlap with every frequency row from DC to Nyquist.
    pub fn full_range(&self) -> Self {
        StftParams {
            min_hz: 0.0,
            max_hz: f64::INFINITY,
            ..self.clone()
        }
    }

    fn frame(&self, sample_rate: f64) -> Result<(usize, usize)> {
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::domain(format!(
                "overlap {} outside [0, 1)",
                self.overlap_fraction
            )));
        }
        let n = (self.window_seconds * sample_rate).round() as usize;
        if n < 2 {
            return Err(Error::domain("STFT window shorter than two samples"));
        }
        let hop = ((n as f64 * (1.0 - self.overlap_fraction)).round() as usize).max(1);
        Ok((n, hop))
    }
}

/// Power spectral density per frame, in signal units squared per Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub freqs: Vec<f64>,
    /// Frame centres in seconds.
    pub times: Vec<f64>,
    /// `power[f][t]`.
    pub power: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// Time-averaged power per frequency row.
    pub fn mean_over_time(&self) -> Vec<f64> {
        self.power
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len().max(1) as f64)
            .collect()
    }
}

/// Precomputed window, bin range and scaling for a given rate.
struct StftPlan {
    n: usize,
    hop: usize,
    window: Vec<f64>,
    bins: std::ops::Range<usize>,
    bin_hz: f64,
    scale: f64,
}

impl StftPlan {
    fn new(params: &StftParams, sample_rate: f64) -> Result<Self> {
        let (n, hop) = params.frame(sample_rate)?;
        let window = kaiser(n, params.kaiser_beta);
        let bin_hz = sample_rate / n as f64;
        let last = n / 2;
        let lo = (0..=last)
            .find(|&k| k as f64 * bin_hz >= params.min_hz - 1e-9)
            .unwrap_or(last + 1);
        let hi = (0..=last)
            .rev()
            .find(|&k| k as f64 * bin_hz <= params.max_hz + 1e-9)
            .map_or(0, |k| k + 1);
        let energy: f64 = window.iter().map(|w| w * w).sum();
        Ok(StftPlan {
            n,
            hop,
            window,
            bins: lo..hi.max(lo),
            bin_hz,
            scale: 1.0 / (sample_rate * energy),
        })
    }

    fn frames(&self, len: usize) -> usize {
        if len < self.n {
            0
        } else {
            (len - self.n) / self.hop + 1
        }
    }

    /// One-sided density weight for bin `k`.
    fn weight(&self, k: usize) -> f64 {
        if k == 0 || (self.n % 2 == 0 && k == self.n / 2) {
            self.scale
        } else {
            2.0 * self.scale
        }
    }

    /// Calls `sink(frame, bin_offset, power)` for every kept cell.
    fn run(&self, signal: &[f64], mut sink: impl FnMut(usize, usize, f64)) {
        let fft = forward_plan(self.n);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for t in 0..self.frames(signal.len()) {
            let start = t * self.hop;
            for (b, (x, w)) in buf
                .iter_mut()
                .zip(signal[start..start + self.n].iter().zip(&self.window))
            {
                *b = Complex64::new(x * w, 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (j, k) in self.bins.clone().enumerate() {
                sink(t, j, buf[k].norm_sqr() * self.weight(k));
            }
        }
    }
}

/// Kaiser-tapered STFT power. Rows are limited to `[min_hz, max_hz]`.
pub fn stft_spectrogram(signal: &[f64], sample_rate: f64, params: &StftParams) -> Result<Spectrogram> {
    let plan = StftPlan::new(params, sample_rate)?;
    if signal.len() < plan.n {
        return Err(Error::SignalTooShort {
            needed: plan.n,
            actual: signal.len(),
        });
    }
    let frames = plan.frames(signal.len());
    let mut power = vec![vec![0.0; frames]; plan.bins.len()];
    plan.run(signal, |t, j, p| power[j][t] = p);
    Ok(Spectrogram {
        freqs: plan.bins.clone().map(|k| k as f64 * plan.bin_hz).collect(),
        times: (0..frames)
            .map(|t| (t * plan.hop) as f64 / sample_rate + 0.5 * plan.n as f64 / sample_rate)
            .collect(),
        power,
    })
}

/// Time-averaged STFT power without materialising the full matrix.
/// Returns `(freqs, mean power)`.
pub fn mean_power_spectrum(
    signal: &[f64],
    sample_rate: f64,
    params: &StftParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    mean_power_spectrum_spans(signal, sample_rate, params, &[0..signal.len()])
}

/// As `mean_power_spectrum`, averaging only frames that lie inside one of
/// `spans`. Adjacent spans are merged first.
pub fn mean_power_spectrum_spans(
    signal: &[f64],
    sample_rate: f64,
    params: &StftParams,
    spans: &[Range<usize>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let plan = StftPlan::new(params, sample_rate)?;
    let merged = merge_spans(spans);
    if merged.iter().any(|s| s.end > signal.len()) {
        return Err(Error::Alignment("span exceeds signal".into()));
    }
    let frames: usize = merged.iter().map(|s| plan.frames(s.len())).sum();
    if frames == 0 {
        return Err(Error::SignalTooShort {
            needed: plan.n,
            actual: merged.iter().map(|s| s.len()).max().unwrap_or(0),
        });
    }
    let mut acc = vec![0.0; plan.bins.len()];
    for span in &merged {
        plan.run(&signal[span.clone()], |_, j, p| acc[j] += p);
    }
    for a in &mut acc {
        *a /= frames as f64;
    }
    Ok((plan.bins.clone().map(|k| k as f64 * plan.bin_hz).collect(), acc))
}

/// Mean band power per region, `values[roi][band]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPowerFeatures {
    pub subject_id: String,
    pub band_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl BandPowerFeatures {
    /// Region-major, band-minor.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// Column names matching `flatten`.
    pub fn feature_names(band_names: &[String]) -> Vec<String> {
        Roi::ALL
            .iter()
            .flat_map(|r| band_names.iter().map(move |b| format!("{r}_{b}")))
            .collect()
    }
}

/// Per channel: STFT, mean over time, mean over each band's bins. Then mean
/// over the channels of each region.
pub fn band_roi_power(
    rec: &Recording,
    rois: &RoiMap,
    bands: &BandSet,
    params: &StftParams,
    spans: Option<&[Range<usize>]>,
) -> Result<BandPowerFeatures> {
    let whole = [0..rec.n_samples()];
    let spans = spans.unwrap_or(&whole);
    let groups = rois.channel_groups(rec)?;
    let used: Vec<usize> = {
        let mut v: Vec<usize> = groups.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    };
    let spectra = used
        .par_iter()
        .map(|&ch| mean_power_spectrum_spans(&rec.samples[ch], rec.sample_rate, params, spans))
        .collect::<Result<Vec<_>>>()?;
    let freqs = &spectra
        .first()
        .ok_or_else(|| Error::domain("no channels"))?
        .0;
    let band_bins: Vec<Vec<usize>> = bands
        .bands
        .iter()
        .map(|b| {
            (0..freqs.len())
                .filter(|&k| b.contains(freqs[k]))
                .collect::<Vec<_>>()
        })
        .collect();
    if let Some(i) = band_bins.iter().position(Vec::is_empty) {
        return Err(Error::domain(format!(
            "band {} contains no frequency bins",
            bands.bands[i].name
        )));
    }
    let per_channel: Vec<Vec<f64>> = spectra
        .iter()
        .map(|(_, p)| {
            band_bins
                .iter()
                .map(|bins| bins.iter().map(|&k| p[k]).sum::<f64>() / bins.len() as f64)
                .collect()
        })
        .collect();
    let values = groups
        .iter()
        .map(|members| {
            (0..bands.len())
                .map(|b| {
                    members
                        .iter()
                        .map(|ch| per_channel[used.binary_search(ch).unwrap()][b])
                        .sum::<f64>()
                        / members.len() as f64
                })
                .collect()
        })
        .collect();
    Ok(BandPowerFeatures {
        subject_id: rec.subject_id.clone(),
        band_names: bands.bands.iter().map(|b| b.name.clone()).collect(),
        values,
    })
}

/// Instantaneous phase in (-pi, pi] and amplitude from the FFT-built analytic
/// signal.
pub fn analytic_signal(signal: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let z = analytic(signal)?;
    let phase = z
        .iter()
        .map(|c| {
            let p = c.im.atan2(c.re);
            if p <= -PI {
                PI
            } else {
                p
            }
        })
        .collect();
    let amp = z.iter().map(|c| c.norm()).collect();
    Ok((phase, amp))
}

/// Complex analytic signal; its real part reproduces the input.
pub fn analytic(signal: &[f64]) -> Result<Vec<Complex64>> {
    let n = signal.len();
    if n < 16 {
        return Err(Error::SignalTooShort {
            needed: 16,
            actual: n,
        });
    }
    let mut spec = fft_real(signal);
    let half = n / 2;
    for (k, v) in spec.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *v *= h;
    }
    Ok(ifft(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::StateTag;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn tone(f: f64, rate: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * f * i as f64 / rate).sin())
            .collect()
    }

    #[test]
    fn tone_peak_at_nearest_bin() {
        let x = tone(10.0, 250.0, 250 * 20, 1.0);
        let (f, p) = mean_power_spectrum(&x, 250.0, &StftParams::default()).unwrap();
        let k = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert!((f[k] - 10.0).abs() < 1e-9);
        assert!(f[0] >= 0.5 && *f.last().unwrap() <= 30.0);
    }

    #[test]
    fn zero_signal_zero_power() {
        let s = stft_spectrogram(&vec![0.0; 1000], 250.0, &StftParams::default()).unwrap();
        assert!(s.power.iter().flatten().all(|&p| p == 0.0));
        assert_eq!(s.freqs.len(), 60);
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..250 * 400).map(|_| StandardNormal.sample(&mut rng)).collect();
        let params = StftParams {
            overlap_fraction: 0.5,
            ..StftParams::default()
        };
        let (_, p) = mean_power_spectrum(&x, 250.0, &params).unwrap();
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        // Unit-variance white noise has density 2 / rate one-sided.
        assert!((mean * 125.0 - 1.0).abs() < 0.1, "{mean}");
        for v in &p {
            assert!((10.0 * (v / mean).log10()).abs() < 3.0);
        }
    }

    #[test]
    fn window_longer_than_signal() {
        assert!(matches!(
            stft_spectrogram(&[0.0; 100], 250.0, &StftParams::default()),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn spectrogram_columns_match_hop() {
        let s = stft_spectrogram(&vec![1.0; 1000], 250.0, &StftParams::default()).unwrap();
        // 500-sample window, 5-sample hop.
        assert_eq!(s.times.len(), 101);
        assert!((s.times[1] - s.times[0] - 0.02).abs() < 1e-12);
        assert!((s.mean_over_time().len()) == s.freqs.len());
    }

    fn roi_recording(samples: Vec<Vec<f64>>) -> (Recording, RoiMap) {
        let labels: Vec<String> = (0..samples.len()).map(|i| format!("C{i}")).collect();
        let rois = RoiMap::from_pairs(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.clone(), Roi::ALL[i % 5])),
        );
        (
            Recording::new("s", 250.0, labels, samples, StateTag::NAP).unwrap(),
            rois,
        )
    }

    #[test]
    fn twenty_hz_tone_is_all_beta() {
        let x = tone(20.0, 250.0, 250 * 10, 1.0);
        let (rec, rois) = roi_recording(vec![x; 10]);
        let f = band_roi_power(&rec, &rois, &BandSet::default(), &StftParams::default(), None).unwrap();
        assert_eq!(f.flatten().len(), 20);
        let beta0 = f.values[0][3];
        for r in 0..5 {
            assert!((f.values[r][3] - beta0).abs() < 1e-12 * beta0);
            for b in 0..3 {
                assert!(f.values[r][b] < 1e-6 * beta0);
            }
        }
        let doubled = rec.with_samples(
            rec.samples.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect(),
            250.0,
        );
        let g = band_roi_power(&doubled, &rois, &BandSet::default(), &StftParams::default(), None)
            .unwrap();
        for (a, b) in f.flatten().iter().zip(g.flatten()) {
            assert!((b - 4.0 * a).abs() <= 1e-9 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn empty_roi_rejected() {
        let (rec, _) = roi_recording(vec![vec![0.0; 1000]; 5]);
        let rois = RoiMap::from_pairs([("C0", Roi::Frontal)]);
        assert!(matches!(
            band_roi_power(&rec, &rois, &BandSet::default(), &StftParams::default(), None),
            Err(Error::EmptyRoi(_))
        ));
    }

    #[test]
    fn cosine_analytic_signal() {
        let rate = 250.0;
        let n = 2500;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 5.0 * i as f64 / rate).cos())
            .collect();
        let (phase, amp) = analytic_signal(&x).unwrap();
        for i in n / 10..n - n / 10 {
            assert!((amp[i] - 1.0).abs() < 0.01);
        }
        let mut unwrapped = phase.clone();
        for i in 1..n {
            let mut d = phase[i] - phase[i - 1];
            while d > PI {
                d -= 2.0 * PI;
            }
            while d <= -PI {
                d += 2.0 * PI;
            }
            unwrapped[i] = unwrapped[i - 1] + d;
        }
        let slope = (unwrapped[n - 251] - unwrapped[250]) / ((n - 501) as f64 / rate);
        assert!((slope / (2.0 * PI * 5.0) - 1.0).abs() < 1e-3);
        let z = analytic(&x).unwrap();
        for (c, v) in z.iter().zip(&x) {
            assert!((c.re - v).abs() < 1e-9);
        }
    }

    #[test]
    fn analytic_edge_cases() {
        let (_, amp) = analytic_signal(&[0.0; 32]).unwrap();
        assert!(amp.iter().all(|&a| a == 0.0));
        assert!(matches!(
            analytic_signal(&[1.0; 15]),
            Err(Error::SignalTooShort { .. })
        ));
    }
}
