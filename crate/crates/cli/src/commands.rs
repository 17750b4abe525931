//! The six pipeline stages. Each reads its inputs from the previous stage's
//! directory under the output root and writes its own.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sqeeg_core::classify::{loso_cv, ClassifierKind, FoldResult};
use sqeeg_core::connectivity::wpli_features;
use sqeeg_core::coupling::{comodulogram, roi_pair_pac, roi_signals, Comodulogram, SurrogateConfig};
use sqeeg_core::features::{
    aggregate_sessions, analysis_spans, classification_columns, Family, FeatureTable,
    RecordingFeatures,
};
use sqeeg_core::ingest::{format_mean_sem, mean_sem, write_csv_recording, write_edf_recording};
use sqeeg_core::preprocess::clean;
use sqeeg_core::report::{
    classification_csv, render_classification_grid, render_dimension_table, render_retention_table,
    retention_csv, retention_rows, ClassificationCell, DimensionRow, RetentionRecord,
};
use sqeeg_core::spectral::band_roi_power;
use sqeeg_core::stats::{
    chi_square_independence, format_count_percent, format_p, groupwise_feature_screen,
    mann_whitney_u,
};
use sqeeg_core::synth::gen_raw_cohort;
use sqeeg_core::{seed, Error, Group, Hypnogram, Session, Sex, StateTag, SubjectMeta};

use crate::config::{RecordingFormat, RunConfig};
use crate::manifest::{roi_table, LoadedManifest, Manifest, ManifestEntry, MANIFEST_FILE};
use crate::output::{csv_string, write_atomic, write_atomic_with};
use crate::ConfigError;

/// Directory layout under the output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn synth(&self) -> PathBuf {
        self.root.join("synth")
    }

    pub fn preprocess(&self) -> PathBuf {
        self.root.join("preprocess")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats")
    }

    pub fn classify(&self) -> PathBuf {
        self.root.join("classify")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// What a command did, for the terminal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub warnings: Vec<String>,
    pub summary: String,
}

fn layout(cfg: &RunConfig) -> Layout {
    Layout::new(&cfg.output_dir)
}

fn recording_stem(subject: &str, state: StateTag) -> String {
    format!("{subject}_{}", state.slug())
}

fn subjects_csv(subjects: &[SubjectMeta]) -> anyhow::Result<String> {
    csv_string(
        &["subject_id", "psqi", "age", "sex"],
        subjects.iter().map(|s| {
            [
                s.subject_id.clone(),
                s.psqi_score.to_string(),
                s.age.to_string(),
                match s.sex {
                    Sex::F => "F".to_string(),
                    Sex::M => "M".to_string(),
                },
            ]
        }),
    )
}

fn need(path: &Path, stage: &str) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError(format!(
            "{} not found; run `{stage}` first",
            path.display()
        )))
    }
}

fn json_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Generate a synthetic raw cohort with a manifest `preprocess` can read.
pub fn cmd_synth(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let spec = cfg.synth.spec();
    let cohort = gen_raw_cohort(&spec).map_err(|e| ConfigError(format!("synth: {e}")))?;
    let dir = layout(cfg).synth();
    let ext = match cfg.synth.format {
        RecordingFormat::Edf => "edf",
        RecordingFormat::Csv => "csv",
    };
    let entries = cohort
        .recordings
        .par_iter()
        .map(|raw| {
            let rec = &raw.recording;
            let stem = recording_stem(&rec.subject_id, rec.state);
            let file = PathBuf::from("raw").join(format!("{stem}.{ext}"));
            let target = dir.join(&file);
            match cfg.synth.format {
                RecordingFormat::Edf => write_atomic_with(&target, |p| write_edf_recording(rec, p))?,
                RecordingFormat::Csv => write_atomic_with(&target, |p| write_csv_recording(rec, p))?,
            }
            let mut entry = ManifestEntry::new(&rec.subject_id, rec.state, file);
            if cfg.synth.format == RecordingFormat::Csv {
                entry.sample_rate_hz = Some(rec.sample_rate);
            }
            if let Some(h) = &raw.hypnogram {
                let hyp = PathBuf::from("raw").join(format!("{stem}.hyp"));
                write_atomic(&dir.join(&hyp), h.render().as_bytes())?;
                entry.hypnogram = Some(hyp);
            }
            Ok(entry)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    write_atomic(&dir.join("subjects.csv"), subjects_csv(&cohort.subjects)?.as_bytes())?;
    let planted = csv_string(
        &["subject_id", "session", "rs_index", "planted_bad_channels"],
        cohort.recordings.iter().map(|r| {
            [
                r.recording.subject_id.clone(),
                r.recording.state.session.as_str().to_string(),
                r.recording.state.rs_index.map_or(String::new(), |i| i.to_string()),
                r.planted_bad.join(";"),
            ]
        }),
    )?;
    write_atomic(&dir.join("planted_bad_channels.csv"), planted.as_bytes())?;
    let manifest = Manifest {
        subjects: "subjects.csv".into(),
        rois: roi_table(&cohort.roi_map),
        recordings: entries,
    };
    write_atomic(&dir.join(MANIFEST_FILE), manifest.render()?.as_bytes())?;
    Ok(Outcome {
        warnings: Vec::new(),
        summary: format!(
            "synth: {} subjects, {} recordings -> {}",
            cohort.subjects.len(),
            cohort.recordings.len(),
            dir.display()
        ),
    })
}

struct CleanedRow {
    entry: ManifestEntry,
    record: RetentionRecord,
    total: usize,
    bad: Vec<String>,
}

fn read_manifest(path: &Path) -> Result<LoadedManifest, ConfigError> {
    LoadedManifest::load(path)
}

/// Filter, drop bad channels and re-reference every recording; write the
/// cleaned recordings, a manifest for them and the retention table.
pub fn cmd_preprocess(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let raw_path = cfg.raw_manifest_path();
    let manifest = read_manifest(&raw_path)?;
    let rois = cfg.features.roi_override()?.unwrap_or_else(|| manifest.rois.clone());
    let params = cfg.preprocess.params();
    let dir = layout(cfg).preprocess();

    let rows = (0..manifest.len())
        .into_par_iter()
        .map(|i| {
            let e = &manifest.manifest.recordings[i];
            let state = manifest.states[i];
            let rec = manifest
                .load_recording(i)
                .with_context(|| format!("subject {}: loading {}", e.subject, e.file.display()))?;
            let cleaned = clean(&rec, &params)
                .with_context(|| format!("subject {}: cleaning {}", e.subject, state.label()))?;
            let stem = recording_stem(&e.subject, state);
            let file = PathBuf::from("cleaned").join(format!("{stem}.edf"));
            write_atomic_with(&dir.join(&file), |p| write_edf_recording(&cleaned.recording, p))?;
            let mut entry = ManifestEntry::new(&e.subject, state, file);
            if let Some(h) = manifest.load_hypnogram(i)? {
                let hyp = PathBuf::from("cleaned").join(format!("{stem}.hyp"));
                write_atomic(&dir.join(&hyp), h.render().as_bytes())?;
                entry.hypnogram = Some(hyp);
            }
            Ok(CleanedRow {
                entry,
                record: RetentionRecord {
                    subject_id: e.subject.clone(),
                    state,
                    bad_channels: cleaned.bad_channels.len(),
                    retention: cleaned.retention(),
                },
                total: cleaned.total_channels,
                bad: cleaned.bad_channels,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    write_atomic(&dir.join("subjects.csv"), subjects_csv(&manifest.subjects)?.as_bytes())?;
    let out_manifest = Manifest {
        subjects: "subjects.csv".into(),
        rois: roi_table(&rois),
        recordings: rows.iter().map(|r| r.entry.clone()).collect(),
    };
    write_atomic(&dir.join(MANIFEST_FILE), out_manifest.render()?.as_bytes())?;

    let channels = csv_string(
        &[
            "subject_id",
            "session",
            "rs_index",
            "total_channels",
            "bad_channels",
            "retention_percent",
            "removed",
        ],
        rows.iter().map(|r| {
            [
                r.record.subject_id.clone(),
                r.record.state.session.as_str().to_string(),
                r.record.state.rs_index.map_or(String::new(), |i| i.to_string()),
                r.total.to_string(),
                r.record.bad_channels.to_string(),
                r.record.retention.to_string(),
                r.bad.join(";"),
            ]
        }),
    )?;
    write_atomic(&dir.join("channels.csv"), channels.as_bytes())?;
    let records: Vec<RetentionRecord> = rows.iter().map(|r| r.record.clone()).collect();
    let table = retention_rows(&records);
    write_atomic(&dir.join("retention.csv"), retention_csv(&table)?.as_bytes())?;
    write_atomic(&dir.join("retention.txt"), render_retention_table(&table).as_bytes())?;
    Ok(Outcome {
        warnings: Vec::new(),
        summary: format!(
            "preprocess: {} recordings cleaned, {} channels removed -> {}",
            rows.len(),
            rows.iter().map(|r| r.bad.len()).sum::<usize>(),
            dir.display()
        ),
    })
}

/// Parse `--family`: one family name or `all`.
pub fn parse_families(s: &str) -> Result<Vec<Family>, ConfigError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Family::ALL.to_vec());
    }
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<Family>()
                .map_err(|e| ConfigError(format!("--family: {e}")))
        })
        .collect()
}

struct Exclusion {
    subject: String,
    state: StateTag,
    reason: String,
}

enum RecordingOutcome {
    Done(RecordingFeatures, Option<Comodulogram>),
    Excluded(Exclusion),
}

fn is_subject_level(e: &Error) -> bool {
    matches!(e, Error::InsufficientData(_) | Error::EmptyRoi(_))
}

fn comodulogram_csv(grid: &[Vec<f64>], phase: &[f64], amp: &[f64]) -> anyhow::Result<String> {
    let mut header = vec!["phase_hz".to_string()];
    header.extend(amp.iter().map(|a| a.to_string()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_string(
        &header_refs,
        grid.iter().zip(phase).map(|(row, p)| {
            let mut r = vec![p.to_string()];
            r.extend(row.iter().map(|v| v.to_string()));
            r
        }),
    )
}

/// Extract the requested feature families per recording, average them per
/// subject and session, and write one table per session and family. Nap
/// recordings without the analysed stage and recordings with an empty region
/// are excluded with a warning.
pub fn cmd_features(cfg: &RunConfig, families: &[Family]) -> anyhow::Result<Outcome> {
    let lay = layout(cfg);
    let path = lay.preprocess().join(MANIFEST_FILE);
    need(&path, "preprocess")?;
    let manifest = read_manifest(&path)?;
    let rois = cfg.features.roi_override()?.unwrap_or_else(|| manifest.rois.clone());
    let params = cfg.features.params()?;
    let (phase_roi, amp_roi) = cfg.features.comodulogram_rois()?;
    let want = |f: Family| families.contains(&f);
    let dir = lay.features();

    let outcomes = (0..manifest.len())
        .into_par_iter()
        .map(|i| {
            let e = &manifest.manifest.recordings[i];
            let state = manifest.states[i];
            let rec = manifest
                .load_recording(i)
                .with_context(|| format!("subject {}: loading {}", e.subject, e.file.display()))?;
            let hyp: Option<Hypnogram> = manifest.load_hypnogram(i)?;
            let excluded = |err: &Error| {
                RecordingOutcome::Excluded(Exclusion {
                    subject: e.subject.clone(),
                    state,
                    reason: err.to_string(),
                })
            };
            let spans = match analysis_spans(&rec, hyp.as_ref(), params.nap_stage) {
                Ok(s) => s,
                Err(err) if is_subject_level(&err) => return Ok(excluded(&err)),
                Err(err) => return Err(err.into()),
            };
            let run = || -> sqeeg_core::Result<(RecordingFeatures, Option<Comodulogram>)> {
                let power = if want(Family::Power) {
                    band_roi_power(&rec, &rois, &params.bands, &params.stft, Some(&spans))?.flatten()
                } else {
                    Vec::new()
                };
                let wpli = if want(Family::Wpli) {
                    wpli_features(&rec, &rois, &params.bands, &spans, &params.wpli)?.flatten()
                } else {
                    Vec::new()
                };
                let (pac, como) = if want(Family::Pac) {
                    let values = roi_pair_pac(&rec, &rois, &params.pac, Some(&spans))?.values;
                    let como = if state.session == Session::Nap {
                        let signals = roi_signals(&rec, &rois)?;
                        let surrogates = (cfg.features.surrogates > 0).then(|| SurrogateConfig {
                            r: cfg.features.surrogates,
                            seed: seed::derive(cfg.features.surrogate_seed, i as u64),
                        });
                        Some(comodulogram(
                            &signals[phase_roi.index()],
                            &signals[amp_roi.index()],
                            rec.sample_rate,
                            &params.pac,
                            surrogates.as_ref(),
                            Some(&spans),
                        )?)
                    } else {
                        None
                    };
                    (values, como)
                } else {
                    (Vec::new(), None)
                };
                Ok((
                    RecordingFeatures {
                        subject_id: e.subject.clone(),
                        state,
                        power,
                        wpli,
                        pac,
                    },
                    como,
                ))
            };
            match run() {
                Ok((f, c)) => Ok(RecordingOutcome::Done(f, c)),
                Err(err) if is_subject_level(&err) => Ok(excluded(&err)),
                Err(err) => Err(anyhow::Error::from(err)
                    .context(format!("subject {}: features for {}", e.subject, state.label()))),
            }
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut features = Vec::new();
    let mut exclusions = Vec::new();
    let mut warnings = Vec::new();
    let mut n_como = 0;
    for o in outcomes {
        match o {
            RecordingOutcome::Done(f, como) => {
                if let Some(c) = como {
                    let stem = recording_stem(&f.subject_id, f.state);
                    let cdir = dir.join("comodulograms");
                    write_atomic(
                        &cdir.join(format!("{stem}.csv")),
                        comodulogram_csv(&c.mi, &c.phase_freqs, &c.amp_freqs)?.as_bytes(),
                    )?;
                    if let Some(p) = &c.surrogate_p {
                        write_atomic(
                            &cdir.join(format!("{stem}_p.csv")),
                            comodulogram_csv(p, &c.phase_freqs, &c.amp_freqs)?.as_bytes(),
                        )?;
                    }
                    n_como += 1;
                }
                features.push(f);
            }
            RecordingOutcome::Excluded(x) => {
                warnings.push(format!(
                    "subject {} excluded from {}: {}",
                    x.subject,
                    x.state.label(),
                    x.reason
                ));
                exclusions.push(x);
            }
        }
    }
    let excluded_csv = csv_string(
        &["subject_id", "session", "rs_index", "reason"],
        exclusions.iter().map(|x| {
            [
                x.subject.clone(),
                x.state.session.as_str().to_string(),
                x.state.rs_index.map_or(String::new(), |i| i.to_string()),
                x.reason.clone(),
            ]
        }),
    )?;
    write_atomic(&dir.join("excluded.csv"), excluded_csv.as_bytes())?;

    let sessions = aggregate_sessions(&features, &manifest.labels())?;
    let mut shapes = Vec::new();
    for family in families {
        for session in Session::ALL {
            let table = FeatureTable::build(&sessions, session, *family, &params.bands)?;
            let (n, d) = table.shape();
            write_atomic(
                &dir.join(format!("{}.csv", table.file_stem())),
                table.to_csv()?.as_bytes(),
            )?;
            shapes.push(format!("{} {n}x{d}", table.file_stem()));
        }
    }
    Ok(Outcome {
        warnings,
        summary: format!(
            "features: {} tables ({}), {} comodulograms, {} recordings excluded -> {}",
            shapes.len(),
            shapes.join(", "),
            n_como,
            exclusions.len(),
            dir.display()
        ),
    })
}

fn table_path(lay: &Layout, session: Session, family: Family) -> PathBuf {
    lay.features()
        .join(format!("{}_{}.csv", session.as_str(), family.as_str()))
}

fn mask_path(lay: &Layout, session: Session, family: Family) -> PathBuf {
    lay.stats()
        .join(format!("{}_{}.csv", session.as_str(), family.as_str()))
}

fn read_table(path: &Path, session: Session, family: Family) -> anyhow::Result<FeatureTable> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    FeatureTable::from_csv(&text, session, family)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

/// Row of a stats CSV: one feature's test and decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRow {
    pub feature: String,
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_p: f64,
    pub significant: bool,
}

pub fn read_mask(path: &Path) -> Result<Vec<MaskRow>, ConfigError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<MaskRow>, _>>()
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScreenSummary {
    session: Session,
    family: Family,
    n_subjects: usize,
    n_features: usize,
    n_significant: usize,
}

fn demographics(subjects: &[SubjectMeta]) -> anyhow::Result<String> {
    let pick = |g: Group, f: fn(&SubjectMeta) -> f64| -> Vec<f64> {
        subjects.iter().filter(|s| s.group == g).map(f).collect()
    };
    let ms = |v: &[f64]| mean_sem(v).map_or("NA".to_string(), |(m, s)| format_mean_sem(m, s));
    let mut rows = Vec::new();
    let n_gs = subjects.iter().filter(|s| s.group == Group::GS).count() as u64;
    let n_ps = subjects.len() as u64 - n_gs;
    rows.push(["n".to_string(), n_gs.to_string(), n_ps.to_string(), String::new(), String::new()]);
    for (name, f) in [
        ("age", (|s: &SubjectMeta| s.age) as fn(&SubjectMeta) -> f64),
        ("psqi", |s: &SubjectMeta| s.psqi_score as f64),
    ] {
        let (a, b) = (pick(Group::GS, f), pick(Group::PS, f));
        let (stat, p) = match mann_whitney_u(&a, &b) {
            Ok(r) => (r.statistic.to_string(), format_p(r.p_value)),
            Err(_) => ("NA".into(), "NA".into()),
        };
        rows.push([name.to_string(), ms(&a), ms(&b), stat, p]);
    }
    let female = |g: Group| {
        subjects
            .iter()
            .filter(|s| s.group == g && s.sex == Sex::F)
            .count() as u64
    };
    let (f_gs, f_ps) = (female(Group::GS), female(Group::PS));
    let (stat, p) = match chi_square_independence([[f_gs, n_gs - f_gs], [f_ps, n_ps - f_ps]], true) {
        Ok(r) => (format!("{:.3}", r.statistic), format_p(r.p_value)),
        Err(_) => ("NA".into(), "NA".into()),
    };
    let pct = |c: u64, n: u64| {
        if n == 0 {
            "NA".to_string()
        } else {
            format_count_percent(c, n)
        }
    };
    rows.push(["female".to_string(), pct(f_gs, n_gs), pct(f_ps, n_ps), stat, p]);
    csv_string(&["variable", "gs", "ps", "statistic", "p_value"], rows)
}

/// Permutation-test every feature of every table between groups, correct
/// with BH-FDR and write one mask CSV per table.
pub fn cmd_stats(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let lay = layout(cfg);
    let st = &cfg.stats;
    if st.permutations == 0 || !(st.alpha > 0.0 && st.alpha < 1.0) {
        return Err(ConfigError("stats.permutations must be positive and alpha in (0, 1)".into()).into());
    }
    let dir = lay.stats();
    let mut warnings = Vec::new();
    let mut summary = Vec::new();
    for (fi, family) in Family::ALL.into_iter().enumerate() {
        for (si, session) in Session::ALL.into_iter().enumerate() {
            let path = table_path(&lay, session, family);
            if !path.exists() {
                continue;
            }
            let table = read_table(&path, session, family)?;
            let (n, d) = table.shape();
            let count = |g: Group| table.labels.iter().filter(|&&l| l == g).count();
            if count(Group::GS) < 2 || count(Group::PS) < 2 || d == 0 {
                warnings.push(format!(
                    "{}: too few subjects per group to screen, no features selected",
                    table.file_stem()
                ));
            }
            let rows = if count(Group::GS) < 2 || count(Group::PS) < 2 || d == 0 {
                table
                    .columns
                    .iter()
                    .map(|c| MaskRow {
                        feature: c.clone(),
                        statistic: f64::NAN,
                        p_value: 1.0,
                        adjusted_p: 1.0,
                        significant: false,
                    })
                    .collect()
            } else {
                let task = (fi * Session::ALL.len() + si) as u64;
                let screen = groupwise_feature_screen(
                    &table.rows,
                    &table.labels,
                    st.permutations,
                    st.alpha,
                    seed::derive(st.seed, task),
                )?;
                screen
                    .tests
                    .iter()
                    .map(|t| MaskRow {
                        feature: table.columns[t.feature].clone(),
                        statistic: t.statistic,
                        p_value: t.p_value,
                        adjusted_p: t.adjusted_p,
                        significant: t.reject,
                    })
                    .collect::<Vec<_>>()
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner()?;
            let target = mask_path(&lay, session, family);
            if rows.is_empty() {
                write_atomic(&target, b"feature,statistic,p_value,adjusted_p,significant\n")?;
            } else {
                write_atomic(&target, &bytes)?;
            }
            summary.push(ScreenSummary {
                session,
                family,
                n_subjects: n,
                n_features: d,
                n_significant: rows.iter().filter(|r| r.significant).count(),
            });
        }
    }
    if summary.is_empty() {
        return Err(ConfigError(format!(
            "no feature tables in {}; run `features` first",
            lay.features().display()
        ))
        .into());
    }
    let subjects_path = lay.preprocess().join("subjects.csv");
    if subjects_path.exists() {
        let subjects = sqeeg_core::ingest::load_subject_table(&subjects_path)
            .map_err(|e| ConfigError(format!("subject table: {e}")))?;
        write_atomic(&dir.join("demographics.csv"), demographics(&subjects)?.as_bytes())?;
    }
    write_atomic(&dir.join("summary.json"), json_string(&summary)?.as_bytes())?;
    let sig: usize = summary.iter().map(|s| s.n_significant).sum();
    Ok(Outcome {
        warnings,
        summary: format!(
            "stats: {} tables screened, {sig} significant features -> {}",
            summary.len(),
            dir.display()
        ),
    })
}

/// Per-fold detail for one classifier, family and session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub classifier: ClassifierKind,
    pub family: Family,
    pub session: Session,
    pub columns: Vec<String>,
    pub folds: Vec<FoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub dimensions: Vec<DimensionRow>,
    pub cells: Vec<ClassificationCell>,
    pub runs: Vec<CellRun>,
}

/// LOSO-evaluate every configured classifier on every family and session,
/// restricted to the significant columns of the family's band.
pub fn cmd_classify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let lay = layout(cfg);
    let specs = cfg.classify.specs()?;
    let mut inputs = Vec::new();
    for family in Family::ALL {
        for session in Session::ALL {
            let path = table_path(&lay, session, family);
            if !path.exists() {
                continue;
            }
            let table = read_table(&path, session, family)?;
            let mpath = mask_path(&lay, session, family);
            need(&mpath, "stats")?;
            let mask_rows = read_mask(&mpath)?;
            let names: Vec<&str> = mask_rows.iter().map(|r| r.feature.as_str()).collect();
            let cols: Vec<&str> = table.columns.iter().map(String::as_str).collect();
            if names != cols {
                return Err(ConfigError(format!(
                    "{} does not match the columns of {}",
                    mpath.display(),
                    path.display()
                ))
                .into());
            }
            let mask: Vec<bool> = mask_rows.iter().map(|r| r.significant).collect();
            let indices = classification_columns(family, &table.columns, &mask);
            inputs.push((family, session, table, indices));
        }
    }
    if inputs.is_empty() {
        return Err(ConfigError(format!(
            "no feature tables in {}; run `features` first",
            lay.features().display()
        ))
        .into());
    }
    let dimensions: Vec<DimensionRow> = Session::ALL
        .iter()
        .flat_map(|s| {
            inputs
                .iter()
                .filter(move |(_, session, _, _)| session == s)
                .map(|(family, session, table, idx)| DimensionRow {
                    session: *session,
                    family: *family,
                    n_subjects: table.shape().0,
                    n_features: idx.len(),
                })
        })
        .collect();

    let mut warnings = Vec::new();
    let mut cells = Vec::new();
    let mut runs = Vec::new();
    for spec in &specs {
        for (family, session, table, indices) in &inputs {
            let mut cell = ClassificationCell {
                classifier: spec.kind,
                family: *family,
                session: *session,
                n_subjects: table.shape().0,
                n_features: indices.len(),
                metrics: None,
            };
            if !indices.is_empty() {
                match loso_cv(&table.dataset(indices), spec) {
                    Ok(report) => {
                        for f in report.folds.iter().filter(|f| f.fallback.is_some()) {
                            warnings.push(format!(
                                "{} {}: fold {} predicted the majority class ({})",
                                spec.kind.as_str(),
                                table.file_stem(),
                                f.subject_id,
                                f.fallback.as_deref().unwrap_or_default()
                            ));
                        }
                        cell.metrics = Some(report.metrics);
                        runs.push(CellRun {
                            classifier: spec.kind,
                            family: *family,
                            session: *session,
                            columns: indices.iter().map(|&i| table.columns[i].clone()).collect(),
                            folds: report.folds,
                        });
                    }
                    Err(e @ Error::Domain(_)) => warnings.push(format!(
                        "{} {}: not evaluated: {e}",
                        spec.kind.as_str(),
                        table.file_stem()
                    )),
                    Err(e) => return Err(e.into()),
                }
            }
            cells.push(cell);
        }
    }
    let dir = lay.classify();
    write_atomic(&dir.join("report.csv"), classification_csv(&cells)?.as_bytes())?;
    let report = ClassifyReport {
        dimensions,
        cells,
        runs,
    };
    write_atomic(&dir.join("report.json"), json_string(&report)?.as_bytes())?;
    write_atomic(
        &dir.join("table.txt"),
        render_classification_grid(&report.cells).as_bytes(),
    )?;
    write_atomic(
        &dir.join("dimensions.txt"),
        render_dimension_table(&report.dimensions).as_bytes(),
    )?;
    let evaluated = report.cells.iter().filter(|c| c.metrics.is_some()).count();
    Ok(Outcome {
        warnings,
        summary: format!(
            "classify: {} cells, {evaluated} evaluated -> {}",
            report.cells.len(),
            dir.display()
        ),
    })
}

#[derive(Debug, Deserialize)]
struct ChannelRow {
    subject_id: String,
    session: String,
    rs_index: Option<u8>,
    bad_channels: usize,
    retention_percent: f64,
}

fn read_retention(path: &Path) -> anyhow::Result<Vec<RetentionRecord>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in r.deserialize::<ChannelRow>() {
        let row = row.map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let session: Session = row
            .session
            .parse()
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        out.push(RetentionRecord {
            subject_id: row.subject_id,
            state: StateTag::new(session, row.rs_index)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
            bad_channels: row.bad_channels,
            retention: row.retention_percent,
        });
    }
    Ok(out)
}

/// Render the retention, input-dimension and classification tables from the
/// outputs of `preprocess` and `classify`.
pub fn cmd_report(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let lay = layout(cfg);
    let channels = lay.preprocess().join("channels.csv");
    let report_json = lay.classify().join("report.json");
    need(&channels, "preprocess")?;
    need(&report_json, "classify")?;
    let records = read_retention(&channels)?;
    let text = std::fs::read_to_string(&report_json)
        .with_context(|| format!("cannot read {}", report_json.display()))?;
    let report: ClassifyReport = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("{}: {e}", report_json.display())))?;
    let mut out = String::new();
    out.push_str("Preprocessing quality\n\n");
    out.push_str(&render_retention_table(&retention_rows(&records)));
    out.push_str("\nClassifier input dimensions\n\n");
    out.push_str(&render_dimension_table(&report.dimensions));
    out.push_str("\nClassification performance (ACC, F1, Kappa)\n\n");
    out.push_str(&render_classification_grid(&report.cells));
    let dir = lay.report();
    write_atomic(&dir.join("report.txt"), out.as_bytes())?;
    Ok(Outcome {
        warnings: Vec::new(),
        summary: format!("report: -> {}", dir.join("report.txt").display()),
    })
}
