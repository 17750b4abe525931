//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p sqeeg-cli --test acceptance -- --nocapture` to see
//! the report lines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use sqeeg_cli::config::{RecordingFormat, RunConfig};
use sqeeg_cli::{
    cmd_classify, cmd_features, cmd_preprocess, cmd_report, cmd_stats, cmd_synth, with_threads,
};
use sqeeg_core::classify::{
    logreg_gradient, logreg_objective, loso_cv, metrics, train_svm_linear, ClassifierKind,
    ClassifierSpec, Confusion, LinearModel, SVM_TOLERANCE,
};
use sqeeg_core::connectivity::{wpli_pair, WpliParams};
use sqeeg_core::coupling::{
    comodulogram, modulation_index, roi_signals, AmplitudeDistribution, PacConfig, SurrogateConfig,
};
use sqeeg_core::features::{
    classification_columns, extract_features, Family, FeatureParams, FeatureTable, SessionFeatures,
};
use sqeeg_core::preprocess::{bandpass_series, clean, FilterSpec, PreprocessParams};
use sqeeg_core::report::{render_dimension_table, DimensionRow};
use sqeeg_core::stats::{bonferroni, fdr_bh, mann_whitney_u};
use sqeeg_core::synth::{
    gen_cohort, gen_common_source_pair, gen_pac_signal, gen_raw_cohort, narrowband_noise,
    CohortSpec, CommonSourceSpec, PacSignalSpec, PlantedEffect, RawCohortSpec,
};
use sqeeg_core::{seed, Band, BandSet, Group, Session};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:>2} {}: {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// Criterion 1.
const MI_EXACT_TOL: f64 = 1e-12;
const MI_RUNTIME: Duration = Duration::from_secs(1);

#[test]
fn c01_mi_analytic_anchors() {
    let start = Instant::now();
    let n = 18;
    let uniform = modulation_index(&AmplitudeDistribution { p: vec![1.0 / n as f64; n] });
    let mut hot = vec![0.0; n];
    hot[7] = 1.0;
    let one_hot = modulation_index(&AmplitudeDistribution { p: hot });
    let mut two = vec![0.0; n];
    two[2] = 0.5;
    two[13] = 0.5;
    let two_bin = modulation_index(&AmplitudeDistribution { p: two });
    let expected = 9f64.ln() / 18f64.ln();
    let elapsed = start.elapsed();
    let pass = uniform == 0.0
        && one_hot == 1.0
        && (two_bin - expected).abs() <= MI_EXACT_TOL
        && elapsed < MI_RUNTIME;
    verdict(
        1,
        "MI analytic anchors",
        pass,
        &format!(
            "uniform={uniform}, one-hot={one_hot}, two-bin err={:.1e} (tol {MI_EXACT_TOL:.0e}), {}",
            (two_bin - expected).abs(),
            secs(elapsed)
        ),
    );
}

// Criterion 2.
const PAC_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const PAC_SEEDS: u64 = 20;
const PAC_RUNTIME: Duration = Duration::from_secs(120);
const RHO_TOL: f64 = 1e-12;

fn nearest(values: &[f64], target: f64) -> usize {
    (0..values.len())
        .min_by(|&i, &j| (values[i] - target).abs().total_cmp(&(values[j] - target).abs()))
        .unwrap()
}

fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    let rx = sqeeg_core::stats::midranks(x);
    let ry = sqeeg_core::stats::midranks(y);
    sqeeg_core::stats::pearson_correlation(&rx, &ry).unwrap().statistic
}

#[test]
fn c02_pac_monotone_in_coupling() {
    let start = Instant::now();
    let cfg = PacConfig::default();
    let mut means = Vec::new();
    for &chi in &PAC_LEVELS {
        let mut total = 0.0;
        for s in 0..PAC_SEEDS {
            let spec = PacSignalSpec {
                coupling: chi,
                seed: seed::derive(2, s),
                ..PacSignalSpec::default()
            };
            let x = gen_pac_signal(&spec).unwrap();
            let c = comodulogram(&x, &x, spec.sample_rate, &cfg, None, None).unwrap();
            let (pi, ai) = (nearest(&c.phase_freqs, spec.phase_freq), nearest(&c.amp_freqs, spec.amp_freq));
            total += c.mi[pi][ai];
        }
        means.push(total / PAC_SEEDS as f64);
    }
    let elapsed = start.elapsed();
    let strictly = means.windows(2).all(|w| w[1] > w[0]);
    let rho = spearman_rho(&PAC_LEVELS, &means);
    verdict(
        2,
        "PAC monotone in coupling",
        strictly && (rho - 1.0).abs() <= RHO_TOL && elapsed < PAC_RUNTIME,
        &format!("mean MI {:?}, spearman rho={rho}, {}", means.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>(), secs(elapsed)),
    );
}

// Criterion 3.
const NULL_TRIALS: u64 = 500;
const NULL_ALPHA: f64 = 0.05;
const NULL_RATE_RANGE: (f64, f64) = (0.01, 0.10);
const NULL_RUNTIME: Duration = Duration::from_secs(600);

#[test]
fn c03_surrogate_calibration_under_null() {
    use rayon::prelude::*;
    let start = Instant::now();
    let base = PacSignalSpec::default();
    let cfg = PacConfig {
        phase_centers: vec![base.phase_freq],
        amp_centers: vec![base.amp_freq],
        ..PacConfig::default()
    };
    let p_values: Vec<f64> = (0..NULL_TRIALS)
        .into_par_iter()
        .map(|t| {
            let spec = PacSignalSpec {
                coupling: 0.0,
                seed: seed::derive(3, t),
                ..base.clone()
            };
            let x = gen_pac_signal(&spec).unwrap();
            let s = SurrogateConfig {
                r: 200,
                seed: seed::derive(33, t),
            };
            let c = comodulogram(&x, &x, spec.sample_rate, &cfg, Some(&s), None).unwrap();
            c.surrogate_p.unwrap()[0][0]
        })
        .collect();
    let rate = p_values.iter().filter(|&&p| p <= NULL_ALPHA).count() as f64 / NULL_TRIALS as f64;
    let elapsed = start.elapsed();
    verdict(
        3,
        "surrogate calibration under the null",
        rate >= NULL_RATE_RANGE.0 && rate <= NULL_RATE_RANGE.1 && elapsed < NULL_RUNTIME,
        &format!(
            "rejection rate {rate:.3} at alpha {NULL_ALPHA} over {NULL_TRIALS} trials (allowed {:?}), {}",
            NULL_RATE_RANGE,
            secs(elapsed)
        ),
    );
}

// Criterion 4.
const WPLI_SEEDS: u64 = 20;
const WPLI_ZERO_LAG_MAX: f64 = 0.1;
const WPLI_LAGGED_MIN: f64 = 0.9;
const WPLI_RUNTIME: Duration = Duration::from_secs(60);

#[test]
fn c04_wpli_volume_conduction() {
    let start = Instant::now();
    let band = Band::new("alpha", 8.0, 12.0);
    let params = WpliParams::default();
    let run = |lag: bool, s: u64| {
        let mut spec = CommonSourceSpec {
            duration: 60.0,
            seed: seed::derive(4, s),
            ..CommonSourceSpec::default()
        };
        if lag {
            spec.lag_samples = spec.quarter_cycle();
        } else {
            spec.mix = [[1.0, 0.0], [0.0, -0.6]];
        }
        let rec = gen_common_source_pair(&spec).unwrap();
        let segs = params.segments(&[0..rec.n_samples()], rec.sample_rate);
        wpli_pair(&rec.samples[0], &rec.samples[1], rec.sample_rate, &band, &segs, &params).unwrap()
    };
    let zero: Vec<f64> = (0..WPLI_SEEDS).map(|s| run(false, s)).collect();
    let lagged: Vec<f64> = (0..WPLI_SEEDS).map(|s| run(true, s)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let min_lagged = lagged.iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    verdict(
        4,
        "wPLI rejects zero-lag mixing",
        mean(&zero) < WPLI_ZERO_LAG_MAX && min_lagged > WPLI_LAGGED_MIN && elapsed < WPLI_RUNTIME,
        &format!(
            "zero-lag mean {:.3} (max single seed {:.3}, limit {WPLI_ZERO_LAG_MAX}), quarter-cycle min {:.3} (limit {WPLI_LAGGED_MIN}), {}",
            mean(&zero),
            zero.iter().copied().fold(0.0, f64::max),
            min_lagged,
            secs(elapsed)
        ),
    );
}

// Criterion 5.
#[test]
fn c05_feature_dimensions() {
    let spec = RawCohortSpec {
        n_gs: 2,
        n_ps: 2,
        no_n3_gs: 0,
        no_n3_ps: 0,
        sample_rate: 250.0,
        rs_seconds: 40.0,
        nap_epochs: 6,
        seed: 5,
        ..RawCohortSpec::default()
    };
    let cohort = gen_raw_cohort(&spec).unwrap();
    let raw = cohort
        .recordings
        .iter()
        .find(|r| r.recording.state.rs_index == Some(1))
        .unwrap();
    let cleaned = clean(&raw.recording, &PreprocessParams::default()).unwrap();
    let rec = &cleaned.recording;
    let params = FeatureParams::default();
    let spans = [0..rec.n_samples()];
    let f = extract_features(rec, &cohort.roi_map, &spans, &params).unwrap();
    let signals = roi_signals(rec, &cohort.roi_map).unwrap();
    let c = comodulogram(&signals[2], &signals[0], rec.sample_rate, &params.pac, None, None).unwrap();
    let como_ok = c.mi.len() == 10 && c.mi.iter().all(|r| r.len() == 10);

    // 24 subjects, 8 without the nap stage.
    let sessions: Vec<SessionFeatures> = (0..24)
        .flat_map(|i| {
            let label = if i < 11 { Group::GS } else { Group::PS };
            let id = format!("S{:02}", i + 1);
            let has_nap = !(i < 4 || (11..15).contains(&i));
            Session::ALL
                .into_iter()
                .filter(move |s| *s != Session::Nap || has_nap)
                .map(move |session| SessionFeatures {
                    subject_id: id.clone(),
                    session,
                    label,
                    n_recordings: 1,
                    power: vec![i as f64; 20],
                    wpli: vec![i as f64; 60],
                    pac: vec![i as f64; 25],
                })
        })
        .collect();
    let bands = BandSet::default();
    let shape = |s: Session, fam: Family| {
        FeatureTable::build(&sessions, s, fam, &bands).unwrap().shape()
    };
    let nap_pac = FeatureTable::build(&sessions, Session::Nap, Family::Pac, &bands).unwrap();
    let mask: Vec<bool> = (0..25).map(|j| j % 6 == 0 && j < 24).collect();
    let picked = classification_columns(Family::Pac, &nap_pac.columns, &mask);
    let dims = render_dimension_table(&[DimensionRow {
        session: Session::Nap,
        family: Family::Pac,
        n_subjects: nap_pac.shape().0,
        n_features: picked.len(),
    }]);
    let pass = f.power.len() == 20
        && f.wpli.len() == 60
        && f.pac.len() == 25
        && como_ok
        && shape(Session::PreNap, Family::Power) == (24, 20)
        && shape(Session::PreNap, Family::Wpli) == (24, 60)
        && nap_pac.shape() == (16, 25)
        && picked.len() == 4
        && dims.contains("16 × 4");
    verdict(
        5,
        "feature dimension bookkeeping",
        pass,
        &format!(
            "power {}, wPLI {}, comodulogram {}x{}, pre-nap tables {:?} {:?}, nap PAC {}x{} -> {}",
            f.power.len(),
            f.wpli.len(),
            c.mi.len(),
            c.mi.first().map_or(0, Vec::len),
            shape(Session::PreNap, Family::Power),
            shape(Session::PreNap, Family::Wpli),
            nap_pac.shape().0,
            nap_pac.shape().1,
            sqeeg_core::report::format_dimension(nap_pac.shape().0, picked.len())
        ),
    );
}

// Criterion 6.
const METRIC_PAIRS: usize = 1000;

/// Brute-force oracle: counts from a 2x2 table, each metric as one exact
/// rational converted once to f64.
fn oracle_metrics(truth: &[Group], pred: &[Group]) -> (f64, f64, f64) {
    let mut table = [[0i128; 2]; 2];
    let idx = |g: Group| usize::from(g == Group::PS);
    for (&t, &p) in truth.iter().zip(pred) {
        table[idx(t)][idx(p)] += 1;
    }
    let n: i128 = table.iter().flatten().sum();
    let agree = table[0][0] + table[1][1];
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let expected = rows[0] * cols[0] + rows[1] * cols[1];
    let q = |a: i128, b: i128| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let tp = table[1][1];
    (
        q(agree, n),
        q(2 * tp, 2 * tp + table[0][1] + table[1][0]),
        q(n * agree - expected, n * n - expected),
    )
}

#[test]
fn c06_metric_oracle() {
    let mut rng = seed::rng(6);
    let mut mismatches = 0;
    for _ in 0..METRIC_PAIRS {
        let n = rng.random_range(1..60);
        let g = |b: bool| if b { Group::PS } else { Group::GS };
        let truth: Vec<Group> = (0..n).map(|_| g(rng.random())).collect();
        let pred: Vec<Group> = (0..n).map(|_| g(rng.random())).collect();
        let m = metrics(&Confusion::from_pairs(&truth, &pred)).unwrap();
        if (m.acc, m.f1, m.kappa) != oracle_metrics(&truth, &pred) {
            mismatches += 1;
        }
    }
    let perfect_truth = [Group::GS, Group::PS, Group::PS, Group::GS];
    let perfect = metrics(&Confusion::from_pairs(&perfect_truth, &perfect_truth)).unwrap();
    let chance = metrics(&Confusion::from_pairs(
        &[Group::GS, Group::GS, Group::PS, Group::PS],
        &[Group::GS, Group::PS, Group::GS, Group::PS],
    ))
    .unwrap();
    let pass = mismatches == 0 && perfect.kappa == 1.0 && perfect.acc == 1.0 && chance.kappa == 0.0;
    verdict(
        6,
        "ACC/F1/kappa match brute-force oracle",
        pass,
        &format!(
            "{mismatches} mismatches over {METRIC_PAIRS} pairs, perfect kappa={}, chance kappa={}",
            perfect.kappa, chance.kappa
        ),
    );
}

// Criterion 7.
const MW_MAX_TOTAL: usize = 8;
const MW_RUNTIME: Duration = Duration::from_secs(60);

/// Exact two-sided p by enumerating every placement of the pooled values,
/// with U counted pairwise (ties count one half) in doubled integer units.
fn oracle_mw_p(pooled: &[f64], na: usize, observed: u32) -> f64 {
    let n = pooled.len();
    let nb = n - na;
    let doubled_u = |mask: u32| -> i64 {
        let mut u = 0i64;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|j| mask >> j & 1 == 0) {
                u += match pooled[i].partial_cmp(&pooled[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
        u
    };
    let centre = (na * nb) as i64;
    let obs = (doubled_u(observed) - centre).abs();
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == na {
            total += 1;
            if (doubled_u(mask) - centre).abs() >= obs {
                hit += 1;
            }
        }
    }
    hit as f64 / total as f64
}

#[test]
fn c07_mann_whitney_exact_enumeration() {
    let start = Instant::now();
    let value_sets: [[f64; MW_MAX_TOTAL]; 3] = [
        [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        [1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 4.0, 5.0],
        [0.5, 0.5, 0.5, 0.5, 2.0, 2.0, 9.0, 9.0],
    ];
    let mut cases = 0u64;
    let mut mismatches = 0u64;
    for values in &value_sets {
        for n in 2..=MW_MAX_TOTAL {
            let pooled = &values[..n];
            for mask in 0u32..(1 << n) {
                let na = mask.count_ones() as usize;
                if na == 0 || na == n {
                    continue;
                }
                let a: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pooled[i]).collect();
                let b: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| pooled[i]).collect();
                // The library ranks `a` then `b`; re-order the oracle's pool to match.
                let reordered: Vec<f64> = a.iter().chain(&b).copied().collect();
                let p = mann_whitney_u(&a, &b).unwrap().p_value;
                cases += 1;
                if p != oracle_mw_p(&reordered, na, (1u32 << na) - 1) {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        7,
        "Mann-Whitney exact path equals enumeration",
        mismatches == 0 && elapsed < MW_RUNTIME,
        &format!("{mismatches} mismatches over {cases} labelled partitions (n <= {MW_MAX_TOTAL}), {}", secs(elapsed)),
    );
}

// Criterion 8.
const BH_VECTORS: usize = 1000;
const BH_ALPHA: f64 = 0.05;

/// Hand rule: largest k with p_(k) <= k alpha / m; reject the k smallest.
fn oracle_bh(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len();
    let mut sorted: Vec<(f64, usize)> = p.iter().copied().zip(0..).collect();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let k = (1..=m)
        .rev()
        .find(|&k| sorted[k - 1].0 <= k as f64 * alpha / m as f64)
        .unwrap_or(0);
    let mut out = vec![false; m];
    for &(_, i) in &sorted[..k] {
        out[i] = true;
    }
    out
}

#[test]
fn c08_bh_oracle_and_bonferroni_subset() {
    let mut rng = seed::rng(8);
    let (mut mismatches, mut subset_violations) = (0, 0);
    for _ in 0..BH_VECTORS {
        let m = rng.random_range(1..=20);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                if rng.random_bool(0.3) {
                    rng.random_range(1e-5..0.01)
                } else {
                    rng.random_range(1e-4..=1.0)
                }
            })
            .collect();
        let bh: Vec<bool> = fdr_bh(&p, BH_ALPHA).unwrap().iter().map(|d| d.reject).collect();
        if bh != oracle_bh(&p, BH_ALPHA) {
            mismatches += 1;
        }
        if bonferroni(&p, BH_ALPHA).iter().zip(&bh).any(|(&bf, &b)| bf && !b) {
            subset_violations += 1;
        }
    }
    verdict(
        8,
        "BH-FDR matches hand rule and contains Bonferroni",
        mismatches == 0 && subset_violations == 0,
        &format!("{mismatches} mismatches, {subset_violations} subset violations over {BH_VECTORS} vectors"),
    );
}

// Criterion 9.
const LOSO_PLANTED_MIN_ACC: f64 = 0.9;
const LOSO_SHUFFLES: u64 = 100;
const LOSO_CHANCE: (f64, f64) = (0.35, 0.65);

#[test]
fn c09_loso_sanity() {
    let planted = gen_cohort(&CohortSpec {
        n_gs: 11,
        n_ps: 13,
        n_features: 4,
        effects: (0..4).map(|feature| PlantedEffect { feature, shift: 3.0 }).collect(),
        seed: 9,
    })
    .unwrap();
    let svm = ClassifierSpec::new(ClassifierKind::Svm);
    let report = loso_cv(&planted, &svm).unwrap();
    let mut leakage_free = report.leakage_free() && report.folds.len() == 24;
    let mut total = 0.0;
    for s in 0..LOSO_SHUFFLES {
        let mut data = planted.clone();
        let mut labels: Vec<Group> = data.iter().map(|d| d.label).collect();
        labels.shuffle(&mut seed::rng(seed::derive(99, s)));
        for (d, l) in data.iter_mut().zip(labels) {
            d.label = l;
        }
        let r = loso_cv(&data, &svm).unwrap();
        leakage_free &= r.leakage_free();
        total += r.metrics.acc;
    }
    let shuffled = total / LOSO_SHUFFLES as f64;
    verdict(
        9,
        "LOSO sanity",
        report.metrics.acc >= LOSO_PLANTED_MIN_ACC
            && shuffled >= LOSO_CHANCE.0
            && shuffled <= LOSO_CHANCE.1
            && leakage_free,
        &format!(
            "planted ACC {:.3} (min {LOSO_PLANTED_MIN_ACC}), shuffled mean ACC {shuffled:.3} (allowed {:?}), leakage-free {leakage_free}",
            report.metrics.acc, LOSO_CHANCE
        ),
    );
}

// Criterion 10.
const GRAD_POINTS: usize = 50;
const GRAD_REL_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-5;

#[test]
fn c10_logreg_gradient_and_svm_symmetry() {
    let data = gen_cohort(&CohortSpec {
        n_gs: 8,
        n_ps: 9,
        n_features: 5,
        effects: vec![PlantedEffect { feature: 0, shift: 1.0 }],
        seed: 10,
    })
    .unwrap();
    let x: Vec<Vec<f64>> = data.iter().map(|d| d.features.clone()).collect();
    let y: Vec<Group> = data.iter().map(|d| d.label).collect();
    let lambda = 0.1;
    let mut rng = seed::rng(10);
    let mut worst = 0.0f64;
    for _ in 0..GRAD_POINTS {
        let model = LinearModel {
            w: (0..5).map(|_| rng.random_range(-2.0..2.0)).collect(),
            b: rng.random_range(-2.0..2.0),
        };
        let (gw, gb) = logreg_gradient(&x, &y, lambda, &model);
        let mut analytic = gw.clone();
        analytic.push(gb);
        let numeric: Vec<f64> = (0..=5)
            .map(|k| {
                let shifted = |h: f64| {
                    let mut m = model.clone();
                    if k < 5 {
                        m.w[k] += h;
                    } else {
                        m.b += h;
                    }
                    logreg_objective(&x, &y, lambda, &m)
                };
                (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP)
            })
            .collect();
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(diff / scale);
    }
    let flipped: Vec<Group> = y
        .iter()
        .map(|g| if *g == Group::GS { Group::PS } else { Group::GS })
        .collect();
    let a = train_svm_linear(&x, &y, lambda).unwrap();
    let b = train_svm_linear(&x, &flipped, lambda).unwrap();
    let sym = a
        .w
        .iter()
        .zip(&b.w)
        .map(|(p, q)| (p + q).abs())
        .fold((a.b + b.b).abs(), f64::max);
    let sym_tol = (SVM_TOLERANCE * 1e3).max(1e-6);
    verdict(
        10,
        "logistic gradient and SVM label symmetry",
        worst <= GRAD_REL_TOL && sym <= sym_tol,
        &format!(
            "worst gradient relative error {worst:.2e} over {GRAD_POINTS} points (tol {GRAD_REL_TOL:.0e}), SVM |w+w'|,|b+b'| max {sym:.2e} (tol {sym_tol:.0e})"
        ),
    );
}

// Criterion 11.
const PASS_TONE_TOL: f64 = 0.05;
const STOP_TONE_MAX: f64 = 0.10;

#[test]
fn c11_zero_phase_filter() {
    let rate = 250.0;
    let spec = FilterSpec::eeg_default(rate);
    let n = (rate * 60.0) as usize;
    let core = 3000..n - 3000;
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    let tone = |f: f64| -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / rate).sin())
            .collect()
    };
    let gain = |f: f64| {
        let x = tone(f);
        let y = bandpass_series(&x, &spec, rate).unwrap();
        rms(&y[core.clone()]) / rms(&x[core.clone()])
    };
    let (g15, g60) = (gain(15.0), gain(60.0));

    let mut lags = Vec::new();
    for (s, (lo, hi)) in [(1.0, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 25.0)].into_iter().enumerate() {
        let mut rng = seed::rng(seed::derive(11, s as u64));
        let x = narrowband_noise(&mut rng, n, rate, lo, hi);
        let y = bandpass_series(&x, &spec, rate).unwrap();
        let xc = |lag: i64| -> f64 {
            core.clone()
                .map(|i| x[i] * y[(i as i64 + lag) as usize])
                .sum()
        };
        let best = (-25i64..=25).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        lags.push(best);
    }
    verdict(
        11,
        "zero-phase band-pass",
        (g15 - 1.0).abs() <= PASS_TONE_TOL && g60 < STOP_TONE_MAX && lags.iter().all(|&l| l == 0),
        &format!(
            "15 Hz gain {g15:.4} (tol {PASS_TONE_TOL}), 60 Hz gain {g60:.2e} (max {STOP_TONE_MAX}), xcorr peak lags {lags:?}"
        ),
    );
}

// Criteria 12 and 13.
fn e2e_config(out: &Path, threads: usize) -> RunConfig {
    let mut cfg = RunConfig {
        output_dir: out.to_path_buf(),
        threads,
        ..RunConfig::default()
    };
    cfg.synth.n_gs = 6;
    cfg.synth.n_ps = 6;
    cfg.synth.no_n3_gs = 1;
    cfg.synth.no_n3_ps = 1;
    cfg.synth.rs_seconds = 40.0;
    cfg.synth.nap_epochs = 6;
    cfg.synth.seed = 3;
    cfg.synth.format = RecordingFormat::Edf;
    cfg.stats.permutations = 200;
    cfg
}

fn run_pipeline(cfg: &RunConfig) {
    with_threads(cfg.threads, || {
        cmd_synth(cfg)?;
        cmd_preprocess(cfg)?;
        cmd_features(cfg, &Family::ALL)?;
        cmd_stats(cfg)?;
        cmd_classify(cfg)?;
        cmd_report(cfg)
    })
    .unwrap();
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn first_difference(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> String {
    if a.keys().ne(b.keys()) {
        return "file lists differ".into();
    }
    a.iter()
        .find(|(k, v)| b[*k] != **v)
        .map_or("none".into(), |(k, _)| k.display().to_string())
}

fn is_mean_sem(cell: &str) -> bool {
    let Some((m, s)) = cell.split_once(" ± ") else {
        return false;
    };
    let two_dp = |v: &str| {
        v.split_once('.')
            .is_some_and(|(i, d)| !i.is_empty() && i.chars().all(|c| c.is_ascii_digit()) && d.len() == 2 && d.chars().all(|c| c.is_ascii_digit()))
    };
    two_dp(m.trim()) && two_dp(s.trim())
}

#[test]
fn c12_c13_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let dirs = [
        tmp.path().join("parallel-a"),
        tmp.path().join("parallel-b"),
        tmp.path().join("serial"),
    ];
    run_pipeline(&e2e_config(&dirs[0], 4));
    run_pipeline(&e2e_config(&dirs[1], 4));
    run_pipeline(&e2e_config(&dirs[2], 1));
    let trees: Vec<_> = dirs.iter().map(|d| tree(d)).collect();
    let rerun_equal = trees[0] == trees[1];
    let serial_equal = trees[0] == trees[2];
    let n_files = trees[0].len();
    let elapsed = start.elapsed();

    let c12 = rerun_equal && serial_equal && n_files > 0;
    let c12_detail = format!(
        "{n_files} files; rerun identical {rerun_equal} (first diff {}), serial vs parallel identical {serial_equal} (first diff {}), {}",
        first_difference(&trees[0], &trees[1]),
        first_difference(&trees[0], &trees[2]),
        secs(elapsed)
    );

    let text = |p: &str| String::from_utf8(trees[0][Path::new(p)].clone()).unwrap();
    let report = text("report/report.txt");
    let grid = text("classify/table.txt");
    let retention = text("preprocess/retention.txt");
    let grid_lines: Vec<&str> = grid.lines().collect();
    let sessions_ok = Session::ALL.iter().all(|s| grid_lines[0].contains(s.title()));
    let metric_header = grid_lines[1].split_whitespace().collect::<Vec<_>>();
    let header_ok = metric_header[..2] == ["Classifier", "Feature"]
        && metric_header[2..].chunks(3).all(|c| c == ["ACC", "F1", "Kappa"])
        && metric_header.len() == 2 + 3 * 4;
    let body: Vec<&str> = grid_lines[3..].to_vec();
    let families_ok = body.len() == 12
        && body.chunks(3).all(|c| {
            Family::ALL.iter().zip(c).all(|(f, line)| line.contains(f.title()))
        });
    let cells_ok = body.iter().all(|l| {
        let values: Vec<&str> = l.split_whitespace().rev().take(12).collect();
        values.iter().all(|v| *v == "NA" || (v.len() >= 4 && v.parse::<f64>().is_ok() && v.split_once('.').is_some_and(|(_, d)| d.len() == 2)))
    });
    let some_numeric = body
        .iter()
        .any(|l| l.split_whitespace().any(|v| v.parse::<f64>().is_ok()));
    let ret_lines: Vec<&str> = retention.lines().collect();
    let ret_header_ok = ret_lines[0].contains("Bad channels removed (n)") && ret_lines[0].contains("Data retention (%)");
    let ret_rows: Vec<&str> = ret_lines[2..].to_vec();
    let ret_rows_ok = ret_rows.len() == 9
        && ret_rows.iter().all(|l| {
            let cells: Vec<&str> = l.split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
            cells.len() >= 3 && is_mean_sem(cells[cells.len() - 1]) && is_mean_sem(cells[cells.len() - 2])
        });
    let c13 = sessions_ok
        && header_ok
        && families_ok
        && cells_ok
        && some_numeric
        && ret_header_ok
        && ret_rows_ok
        && report.contains(&grid)
        && report.contains(&retention);
    let c13_detail = format!(
        "grid sessions {sessions_ok}, ACC/F1/Kappa header {header_ok}, 12 classifier x feature rows {families_ok}, 2-dp cells {cells_ok} (some evaluated {some_numeric}); retention header {ret_header_ok}, 9 state rows mean ± SEM {ret_rows_ok}"
    );
    println!(
        "criterion 12 {}: end-to-end determinism: {c12_detail}",
        if c12 { "PASS" } else { "FAIL" }
    );
    println!(
        "criterion 13 {}: table-format reproduction: {c13_detail}",
        if c13 { "PASS" } else { "FAIL" }
    );
    if c13 {
        println!("{report}");
    }
    assert!(c12, "criterion 12 failed: {c12_detail}");
    assert!(c13, "criterion 13 failed: {c13_detail}");
}
