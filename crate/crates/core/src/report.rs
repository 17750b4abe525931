//! Plain-text and CSV renderings of the preprocessing-quality table, the
//! input-dimension table and the classification grid.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierKind, Metrics};
use crate::error::{Error, Result};
use crate::features::Family;
use crate::ingest::{format_mean_sem, mean_sem};
use crate::recording::{Session, StateTag};

/// One cleaned recording's quality numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRecord {
    pub subject_id: String,
    pub state: StateTag,
    pub bad_channels: usize,
    pub retention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub state: StateTag,
    pub n: usize,
    pub bad_mean: f64,
    pub bad_sem: f64,
    pub retention_mean: f64,
    pub retention_sem: f64,
}

/// Mean and SEM per state, nap first then RS 1-8.
pub fn retention_rows(records: &[RetentionRecord]) -> Vec<RetentionRow> {
    let mut by_state: BTreeMap<StateTag, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let e = by_state.entry(r.state).or_default();
        e.0.push(r.bad_channels as f64);
        e.1.push(r.retention);
    }
    by_state
        .into_iter()
        .map(|(state, (bad, ret))| {
            let (bm, bs) = mean_sem(&bad).unwrap_or((0.0, 0.0));
            let (rm, rs) = mean_sem(&ret).unwrap_or((0.0, 0.0));
            RetentionRow {
                state,
                n: bad.len(),
                bad_mean: bm,
                bad_sem: bs,
                retention_mean: rm,
                retention_sem: rs,
            }
        })
        .collect()
}

const RETENTION_HEADER: [&str; 4] = [
    "Session",
    "State",
    "Bad channels removed (n)",
    "Data retention (%)",
];

fn retention_cells(rows: &[RetentionRow]) -> Vec<[String; 4]> {
    let mut last: Option<Session> = None;
    rows.iter()
        .map(|r| {
            let session = if last == Some(r.state.session) {
                String::new()
            } else {
                r.state.session.title().to_string()
            };
            last = Some(r.state.session);
            [
                session,
                r.state.label(),
                format_mean_sem(r.bad_mean, r.bad_sem),
                format_mean_sem(r.retention_mean, r.retention_sem),
            ]
        })
        .collect()
}

fn column_widths(header: &[String], rows: &[Vec<String>]) -> Vec<usize> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    widths
}

fn layout_line(cells: &[String], widths: &[usize]) -> String {
    let mut s = String::new();
    for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
        if i + 1 == cells.len() {
            s.push_str(c);
        } else {
            let _ = write!(s, "{c:<w$}  ");
        }
    }
    s.trim_end().to_string()
}

fn render_columns(header: &[String], rows: &[Vec<String>]) -> String {
    let widths = column_widths(header, rows);
    let mut out = layout_line(header, &widths);
    out.push('\n');
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        out.push_str(&layout_line(r, &widths));
        out.push('\n');
    }
    out
}

pub fn render_retention_table(rows: &[RetentionRow]) -> String {
    let header: Vec<String> = RETENTION_HEADER.iter().map(|s| s.to_string()).collect();
    let cells: Vec<Vec<String>> = retention_cells(rows).into_iter().map(Vec::from).collect();
    render_columns(&header, &cells)
}

pub fn retention_csv(rows: &[RetentionRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["session", "state", "n", "bad_channels_removed", "data_retention_percent"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.state.session.as_str().to_string(),
            r.state.label(),
            r.n.to_string(),
            format_mean_sem(r.bad_mean, r.bad_sem),
            format_mean_sem(r.retention_mean, r.retention_sem),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::parse(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::parse(e.to_string()))
}

/// `16 × 4`
pub fn format_dimension(n: usize, d: usize) -> String {
    format!("{n} × {d}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub session: Session,
    pub family: Family,
    pub n_subjects: usize,
    pub n_features: usize,
}

pub fn render_dimension_table(rows: &[DimensionRow]) -> String {
    let header = vec![
        "Session".to_string(),
        "Feature".to_string(),
        "Input dimension (N × D)".to_string(),
    ];
    let mut last = None;
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let s = if last == Some(r.session) {
                String::new()
            } else {
                r.session.title().to_string()
            };
            last = Some(r.session);
            vec![s, r.family.title().to_string(), format_dimension(r.n_subjects, r.n_features)]
        })
        .collect();
    render_columns(&header, &cells)
}

/// One classifier x feature x session result. `metrics` is `None` when no
/// feature survived selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationCell {
    pub classifier: ClassifierKind,
    pub family: Family,
    pub session: Session,
    pub n_subjects: usize,
    pub n_features: usize,
    pub metrics: Option<Metrics>,
}

fn two(v: f64) -> String {
    format!("{v:.2}")
}

/// `0.81 / 0.73 / 0.60`
pub fn format_triple(m: &Metrics) -> String {
    format!("{} / {} / {}", two(m.acc), two(m.f1), two(m.kappa))
}

/// Classifier and feature rows against ACC / F1 / Kappa columns per session.
pub fn render_classification_grid(cells: &[ClassificationCell]) -> String {
    let mut index: BTreeMap<(ClassifierKind, Family, Session), &ClassificationCell> = BTreeMap::new();
    for c in cells {
        index.insert((c.classifier, c.family, c.session), c);
    }
    let classifiers: Vec<ClassifierKind> = ClassifierKind::ALL
        .into_iter()
        .filter(|k| cells.iter().any(|c| c.classifier == *k))
        .collect();
    let families: Vec<Family> = Family::ALL
        .into_iter()
        .filter(|f| cells.iter().any(|c| c.family == *f))
        .collect();
    let sessions: Vec<Session> = Session::ALL
        .into_iter()
        .filter(|s| cells.iter().any(|c| c.session == *s))
        .collect();

    let mut sub = vec!["Classifier".to_string(), "Feature".to_string()];
    for _ in &sessions {
        sub.extend(["ACC".to_string(), "F1".to_string(), "Kappa".to_string()]);
    }
    let mut rows = Vec::new();
    for k in &classifiers {
        for (fi, f) in families.iter().enumerate() {
            let mut row = vec![
                if fi == 0 { k.as_str().to_string() } else { String::new() },
                f.title().to_string(),
            ];
            for s in &sessions {
                match index.get(&(*k, *f, *s)).and_then(|c| c.metrics) {
                    Some(m) => row.extend([two(m.acc), two(m.f1), two(m.kappa)]),
                    None => row.extend(["NA".to_string(), "NA".to_string(), "NA".to_string()]),
                }
            }
            rows.push(row);
        }
    }
    let mut widths = column_widths(&sub, &rows);
    // Each session title spans its three metric columns.
    for (i, s) in sessions.iter().enumerate() {
        let span: usize = widths[2 + 3 * i..5 + 3 * i].iter().sum::<usize>() + 4;
        let need = s.title().chars().count();
        if need > span {
            widths[4 + 3 * i] += need - span;
        }
    }
    let mut top = vec![String::new(), String::new()];
    let mut top_widths = widths[..2].to_vec();
    for (i, s) in sessions.iter().enumerate() {
        top.push(s.title().to_string());
        top_widths.push(widths[2 + 3 * i..5 + 3 * i].iter().sum::<usize>() + 4);
    }
    let mut out = layout_line(&top, &top_widths);
    out.push('\n');
    out.push_str(&layout_line(&sub, &widths));
    out.push('\n');
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in &rows {
        out.push_str(&layout_line(r, &widths));
        out.push('\n');
    }
    out
}

/// `classifier,feature,session,n_subjects,n_features,acc,f1,kappa`
pub fn classification_csv(cells: &[ClassificationCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "classifier",
        "feature",
        "session",
        "n_subjects",
        "n_features",
        "acc",
        "f1",
        "kappa",
    ])
    .map_err(csv_err)?;
    for c in cells {
        let m = |f: fn(&Metrics) -> f64| c.metrics.as_ref().map_or("NA".to_string(), |m| f(m).to_string());
        w.write_record([
            c.classifier.as_str().to_string(),
            c.family.title().to_string(),
            c.session.as_str().to_string(),
            c.n_subjects.to_string(),
            c.n_features.to_string(),
            m(|m| m.acc),
            m(|m| m.f1),
            m(|m| m.kappa),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}
