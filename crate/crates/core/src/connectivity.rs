//! Weighted phase lag index between channels, region-averaged matrices and
//! the 60-value connectivity feature vector.

use std::ops::Range;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{forward_plan, kaiser};
use crate::error::{Error, Result};
use crate::recording::{Band, BandSet, Recording, Roi, RoiMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WpliParams {
    pub segment_seconds: f64,
    pub overlap_fraction: f64,
    pub kaiser_beta: f64,
    pub min_segments: usize,
}

impl Default for WpliParams {
    fn default() -> Self {
        WpliParams {
            segment_seconds: 2.0,
            overlap_fraction: 0.5,
            kaiser_beta: 8.0,
            min_segments: 8,
        }
    }
}

impl WpliParams {
    pub fn segment_len(&self, sample_rate: f64) -> usize {
        (self.segment_seconds * sample_rate).round() as usize
    }

    pub fn hop(&self, sample_rate: f64) -> usize {
        let n = self.segment_len(sample_rate) as f64;
        ((n * (1.0 - self.overlap_fraction)).round() as usize).max(1)
    }

    /// Sliding segments inside each span; no segment crosses a span boundary.
    pub fn segments(&self, spans: &[Range<usize>], sample_rate: f64) -> Vec<Range<usize>> {
        sliding_segments(spans, self.segment_len(sample_rate), self.hop(sample_rate))
    }
}

pub fn sliding_segments(spans: &[Range<usize>], len: usize, hop: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    if len == 0 {
        return out;
    }
    for span in spans {
        let mut start = span.start;
        while start + len <= span.end {
            out.push(start..start + len);
            start += hop;
        }
    }
    out
}

/// Tapered spectra of one channel: `spectra[segment][bin]`.
struct SegmentSpectra {
    spectra: Vec<Vec<Complex64>>,
}

fn segment_spectra(x: &[f64], segments: &[Range<usize>], taper: &[f64], bins: usize) -> SegmentSpectra {
    let n = taper.len();
    let fft = forward_plan(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let spectra = segments
        .iter()
        .map(|seg| {
            let mut buf: Vec<Complex64> = x[seg.clone()]
                .iter()
                .zip(taper)
                .map(|(v, w)| Complex64::new(v * w, 0.0))
                .collect();
            fft.process_with_scratch(&mut buf, &mut scratch);
            buf.truncate(bins);
            buf
        })
        .collect();
    SegmentSpectra { spectra }
}

/// Pooled imaginary cross-spectrum sums for one band: `(|sum Im|, sum |Im|, sum |S|)`.
fn accumulate(a: &SegmentSpectra, b: &SegmentSpectra, bins: &[usize]) -> (f64, f64, f64) {
    let (mut num, mut den, mut mag) = (0.0, 0.0, 0.0);
    for (sa, sb) in a.spectra.iter().zip(&b.spectra) {
        for &k in bins {
            let s = sa[k] * sb[k].conj();
            num += s.im;
            den += s.im.abs();
            mag += s.norm();
        }
    }
    (num.abs(), den, mag)
}

fn ratio((num, den, mag): (f64, f64, f64)) -> f64 {
    if den <= 1e-10 * mag || den == 0.0 {
        0.0
    } else {
        (num / den).min(1.0)
    }
}

fn band_bins(band: &Band, n: usize, sample_rate: f64) -> Result<Vec<usize>> {
    let bins: Vec<usize> = (0..=n / 2)
        .filter(|&k| band.contains(k as f64 * sample_rate / n as f64))
        .collect();
    if bins.is_empty() {
        return Err(Error::domain(format!(
            "band {} has no bins at {} Hz resolution",
            band.name,
            sample_rate / n as f64
        )));
    }
    Ok(bins)
}

fn check_segments(segments: &[Range<usize>], params: &WpliParams) -> Result<usize> {
    if segments.len() < params.min_segments {
        return Err(Error::InsufficientData(format!(
            "{} segments, need at least {}",
            segments.len(),
            params.min_segments
        )));
    }
    let n = segments[0].len();
    if segments.iter().any(|s| s.len() != n) || n < 2 {
        return Err(Error::domain("segments must share one length of at least 2"));
    }
    Ok(n)
}

/// wPLI = |sum Im S_xy| / sum |Im S_xy|, pooled over segments and the band's
/// frequency bins. Zero when the imaginary part vanishes.
pub fn wpli_pair(
    x: &[f64],
    y: &[f64],
    sample_rate: f64,
    band: &Band,
    segments: &[Range<usize>],
    params: &WpliParams,
) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain("series lengths differ"));
    }
    let n = check_segments(segments, params)?;
    if segments.iter().any(|s| s.end > x.len()) {
        return Err(Error::domain("segment exceeds series"));
    }
    let bins = band_bins(band, n, sample_rate)?;
    let taper = kaiser(n, params.kaiser_beta);
    let top = bins[bins.len() - 1] + 1;
    let sx = segment_spectra(x, segments, &taper, top);
    let sy = segment_spectra(y, segments, &taper, top);
    Ok(ratio(accumulate(&sx, &sy, &bins)))
}

/// Region x region wPLI for one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityMatrix {
    pub band: String,
    pub roi_matrix: [[f64; 5]; 5],
}

/// Unique region pairs, row-major upper triangle including the diagonal.
pub fn connection_pairs() -> Vec<(Roi, Roi)> {
    let mut out = Vec::with_capacity(15);
    for (i, a) in Roi::ALL.iter().enumerate() {
        for b in &Roi::ALL[i..] {
            out.push((*a, *b));
        }
    }
    out
}

impl ConnectivityMatrix {
    pub fn unique_connections(&self) -> Vec<f64> {
        connection_pairs()
            .into_iter()
            .map(|(a, b)| self.roi_matrix[a.index()][b.index()])
            .collect()
    }
}

/// 15 connections x bands, connection-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WpliFeatures {
    pub subject_id: String,
    pub matrices: Vec<ConnectivityMatrix>,
}

impl WpliFeatures {
    pub fn flatten(&self) -> Vec<f64> {
        let per_band: Vec<Vec<f64>> = self.matrices.iter().map(|m| m.unique_connections()).collect();
        (0..15)
            .flat_map(|c| per_band.iter().map(move |b| b[c]))
            .collect()
    }

    pub fn feature_names(band_names: &[String]) -> Vec<String> {
        connection_pairs()
            .into_iter()
            .flat_map(|(a, b)| band_names.iter().map(move |n| format!("{a}-{b}_{n}")))
            .collect()
    }
}

/// Matrices for every band of `bands`, sharing one set of segment spectra.
pub fn wpli_matrices(
    rec: &Recording,
    rois: &RoiMap,
    bands: &[Band],
    spans: &[Range<usize>],
    params: &WpliParams,
) -> Result<Vec<ConnectivityMatrix>> {
    let groups = rois.channel_groups(rec)?;
    for (roi, members) in Roi::ALL.iter().zip(&groups) {
        if members.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "region {roi} has {} channel(s), within-region wPLI needs 2",
                members.len()
            )));
        }
    }
    let segments = params.segments(spans, rec.sample_rate);
    let n = check_segments(&segments, params)?;
    if segments.iter().any(|s| s.end > rec.n_samples()) {
        return Err(Error::Alignment("segment exceeds recording".into()));
    }
    let bins: Vec<Vec<usize>> = bands
        .iter()
        .map(|b| band_bins(b, n, rec.sample_rate))
        .collect::<Result<_>>()?;
    let top = bins.iter().flatten().max().map_or(0, |k| k + 1);
    let taper = kaiser(n, params.kaiser_beta);

    let mut used: Vec<usize> = groups.iter().flatten().copied().collect();
    used.sort_unstable();
    let spectra: Vec<SegmentSpectra> = used
        .par_iter()
        .map(|&ch| segment_spectra(&rec.samples[ch], &segments, &taper, top))
        .collect();
    let slot = |ch: usize| used.binary_search(&ch).unwrap();

    let pairs = connection_pairs();
    let cells: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let ga = &groups[a.index()];
            let gb = &groups[b.index()];
            let mut sums = vec![0.0; bands.len()];
            let mut count = 0usize;
            for (ia, &ca) in ga.iter().enumerate() {
                let others: &[usize] = if a == b { &ga[ia + 1..] } else { gb };
                for &cb in others {
                    for (s, bb) in sums.iter_mut().zip(&bins) {
                        *s += ratio(accumulate(&spectra[slot(ca)], &spectra[slot(cb)], bb));
                    }
                    count += 1;
                }
            }
            sums.into_iter().map(|s| s / count as f64).collect()
        })
        .collect();

    Ok(bands
        .iter()
        .enumerate()
        .map(|(bi, band)| {
            let mut m = [[0.0; 5]; 5];
            for (&(a, b), vals) in pairs.iter().zip(&cells) {
                m[a.index()][b.index()] = vals[bi];
                m[b.index()][a.index()] = vals[bi];
            }
            ConnectivityMatrix {
                band: band.name.clone(),
                roi_matrix: m,
            }
        })
        .collect())
}

pub fn wpli_matrix(
    rec: &Recording,
    rois: &RoiMap,
    band: &Band,
    spans: &[Range<usize>],
    params: &WpliParams,
) -> Result<ConnectivityMatrix> {
    Ok(wpli_matrices(rec, rois, std::slice::from_ref(band), spans, params)?.remove(0))
}

pub fn wpli_features(
    rec: &Recording,
    rois: &RoiMap,
    bands: &BandSet,
    spans: &[Range<usize>],
    params: &WpliParams,
) -> Result<WpliFeatures> {
    Ok(WpliFeatures {
        subject_id: rec.subject_id.clone(),
        matrices: wpli_matrices(rec, rois, &bands.bands, spans, params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::StateTag;
    use crate::synth::narrowband_noise;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    const RATE: f64 = 250.0;

    fn noise(rng: &mut rand_chacha::ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
        (0..n).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
    }

    fn whole(n: usize) -> Vec<Range<usize>> {
        WpliParams::default().segments(&[0..n], RATE)
    }

    fn alpha() -> Band {
        Band::new("alpha", 8.0, 12.0)
    }

    #[test]
    fn identical_signals_give_zero() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = noise(&mut rng, 250 * 30, 1.0);
        let y: Vec<f64> = x.iter().map(|v| 0.6 * v).collect();
        let segs = whole(x.len());
        assert_eq!(wpli_pair(&x, &x, RATE, &alpha(), &segs, &WpliParams::default()).unwrap(), 0.0);
        assert_eq!(wpli_pair(&x, &y, RATE, &alpha(), &segs, &WpliParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn quarter_cycle_lag_is_high_and_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 250 * 60;
        let lag = 6;
        let s = narrowband_noise(&mut rng, n + lag, RATE, 8.0, 12.0);
        let x: Vec<f64> = s[lag..].iter().map(|v| v + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let y: Vec<f64> = s[..n].iter().map(|v| v + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let segs = whole(n);
        let p = WpliParams::default();
        let a = wpli_pair(&x, &y, RATE, &alpha(), &segs, &p).unwrap();
        let b = wpli_pair(&y, &x, RATE, &alpha(), &segs, &p).unwrap();
        assert!(a > 0.9, "{a}");
        assert_eq!(a, b);
        let xs: Vec<f64> = x.iter().map(|v| 3.5 * v).collect();
        let ys: Vec<f64> = y.iter().map(|v| 0.02 * v).collect();
        let c = wpli_pair(&xs, &ys, RATE, &alpha(), &segs, &p).unwrap();
        assert!((a - c).abs() < 1e-9);
    }

    #[test]
    fn zero_lag_mixtures_shrink_with_ensemble() {
        let p = WpliParams::default();
        let mut means = Vec::new();
        for segments in [8usize, 32, 128] {
            let n = (segments + 1) * 250;
            let mut total = 0.0;
            let trials = 40;
            for seed in 0..trials {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
                let s = narrowband_noise(&mut rng, n, RATE, 8.0, 12.0);
                let x: Vec<f64> = s.iter().map(|v| v + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
                let y: Vec<f64> = s.iter().map(|v| -0.6 * v + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
                let segs = whole(n);
                assert_eq!(segs.len(), segments);
                total += wpli_pair(&x, &y, RATE, &alpha(), &segs, &p).unwrap();
            }
            means.push(total / trials as f64);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
        assert!(means[2] < 0.1);
    }

    #[test]
    fn too_few_segments() {
        let x = vec![0.0; 250 * 5];
        let segs = whole(x.len());
        assert!(matches!(
            wpli_pair(&x, &x, RATE, &alpha(), &segs, &WpliParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    fn noise_recording(seed: u64, seconds: usize) -> (Recording, RoiMap) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<String> = (0..15).map(|i| format!("E{i}")).collect();
        let samples = (0..15).map(|_| noise(&mut rng, 250 * seconds, 1.0)).collect();
        let rois = RoiMap::from_pairs(
            labels.iter().enumerate().map(|(i, l)| (l.clone(), Roi::ALL[i / 3])),
        );
        (
            Recording::new("s", RATE, labels, samples, StateTag::NAP).unwrap(),
            rois,
        )
    }

    #[test]
    fn white_noise_matrix_is_low_symmetric_and_sized() {
        let (rec, rois) = noise_recording(3, 60);
        let f = wpli_features(&rec, &rois, &BandSet::default(), &[0..rec.n_samples()], &WpliParams::default())
            .unwrap();
        assert_eq!(f.flatten().len(), 60);
        for m in &f.matrices {
            for i in 0..5 {
                for j in 0..5 {
                    assert_eq!(m.roi_matrix[i][j], m.roi_matrix[j][i]);
                    assert!((0.0..0.3).contains(&m.roi_matrix[i][j]), "{}", m.roi_matrix[i][j]);
                }
            }
            assert_eq!(m.unique_connections().len(), 15);
        }
        assert_eq!(WpliFeatures::feature_names(&["a".into(), "b".into(), "c".into(), "d".into()]).len(), 60);
    }

    #[test]
    fn single_channel_region_rejected() {
        let (rec, mut rois) = noise_recording(4, 20);
        rois.insert("E1", Roi::Central);
        rois.insert("E2", Roi::Central);
        assert!(wpli_matrix(&rec, &rois, &alpha(), &[0..rec.n_samples()], &WpliParams::default()).is_err());
    }

    #[test]
    fn segments_stay_inside_spans() {
        let segs = sliding_segments(&[0..10, 20..27], 4, 2);
        assert_eq!(segs, vec![0..4, 2..6, 4..8, 6..10, 20..24, 22..26]);
    }
}
