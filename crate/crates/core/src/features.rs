//! Per-recording feature extraction, session aggregation and the
//! subject x feature tables fed to the screen and the classifiers.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::classify::SubjectFeatureSet;
use crate::connectivity::{wpli_features, WpliFeatures, WpliParams};
use crate::coupling::{pac_pair_names, roi_pair_pac, PacConfig};
use crate::error::{Error, Result};
use crate::ingest::{merge_spans, select_stage_epochs};
use crate::recording::{BandSet, Group, Hypnogram, Recording, RoiMap, Session, Stage, StateTag};
use crate::spectral::{band_roi_power, BandPowerFeatures, StftParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Power,
    Wpli,
    Pac,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Power, Family::Wpli, Family::Pac];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Power => "power",
            Family::Wpli => "wpli",
            Family::Pac => "pac",
        }
    }

    /// Name of the classification feature built from this family.
    pub fn title(self) -> &'static str {
        match self {
            Family::Power => "Beta power",
            Family::Wpli => "Delta wPLI",
            Family::Pac => "Delta-beta PAC",
        }
    }

    /// Band whose columns feed classification; `None` keeps every column.
    pub fn classification_band(self) -> Option<&'static str> {
        match self {
            Family::Power => Some("beta"),
            Family::Wpli => Some("delta"),
            Family::Pac => None,
        }
    }

    pub fn column_names(self, bands: &BandSet) -> Vec<String> {
        let names: Vec<String> = bands.bands.iter().map(|b| b.name.clone()).collect();
        match self {
            Family::Power => BandPowerFeatures::feature_names(&names),
            Family::Wpli => WpliFeatures::feature_names(&names),
            Family::Pac => pac_pair_names(),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "power" => Ok(Family::Power),
            "wpli" => Ok(Family::Wpli),
            "pac" => Ok(Family::Pac),
            _ => Err(Error::Config(format!("unknown feature family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub bands: BandSet,
    pub stft: StftParams,
    pub wpli: WpliParams,
    pub pac: PacConfig,
    /// Sleep stage analysed in nap recordings.
    pub nap_stage: Stage,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            bands: BandSet::default(),
            stft: StftParams::default(),
            wpli: WpliParams::default(),
            pac: PacConfig::default(),
            nap_stage: Stage::N3,
        }
    }
}

/// Sample ranges analysed in `rec`: the nap stage's epochs for nap
/// recordings, the whole series otherwise.
pub fn analysis_spans(
    rec: &Recording,
    hypnogram: Option<&Hypnogram>,
    nap_stage: Stage,
) -> Result<Vec<Range<usize>>> {
    if rec.state.session != Session::Nap {
        return Ok(vec![0..rec.n_samples()]);
    }
    let hyp = hypnogram.ok_or_else(|| {
        Error::Config(format!("nap recording of {} has no hypnogram", rec.subject_id))
    })?;
    let spans = merge_spans(&select_stage_epochs(rec, hyp, nap_stage)?);
    if spans.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} has no {nap_stage} epochs",
            rec.subject_id
        )));
    }
    Ok(spans)
}

/// All three feature families for one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingFeatures {
    pub subject_id: String,
    pub state: StateTag,
    pub power: Vec<f64>,
    pub wpli: Vec<f64>,
    pub pac: Vec<f64>,
}

impl RecordingFeatures {
    pub fn family(&self, family: Family) -> &[f64] {
        match family {
            Family::Power => &self.power,
            Family::Wpli => &self.wpli,
            Family::Pac => &self.pac,
        }
    }
}

pub fn extract_features(
    rec: &Recording,
    rois: &RoiMap,
    spans: &[Range<usize>],
    params: &FeatureParams,
) -> Result<RecordingFeatures> {
    let power = band_roi_power(rec, rois, &params.bands, &params.stft, Some(spans))?;
    let wpli = wpli_features(rec, rois, &params.bands, spans, &params.wpli)?;
    let pac = roi_pair_pac(rec, rois, &params.pac, Some(spans))?;
    Ok(RecordingFeatures {
        subject_id: rec.subject_id.clone(),
        state: rec.state,
        power: power.flatten(),
        wpli: wpli.flatten(),
        pac: pac.values,
    })
}

/// One subject's features for one session: the mean over that session's
/// recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFeatures {
    pub subject_id: String,
    pub session: Session,
    pub label: Group,
    pub n_recordings: usize,
    pub power: Vec<f64>,
    pub wpli: Vec<f64>,
    pub pac: Vec<f64>,
}

impl SessionFeatures {
    pub fn family(&self, family: Family) -> &[f64] {
        match family {
            Family::Power => &self.power,
            Family::Wpli => &self.wpli,
            Family::Pac => &self.pac,
        }
    }
}

fn mean_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Result<Vec<f64>> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for r in rows {
        if n == 0 {
            acc = r.to_vec();
        } else if r.len() != acc.len() {
            return Err(Error::domain("recordings of one session differ in feature length"));
        } else {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
        }
        n += 1;
    }
    Ok(acc.into_iter().map(|v| v / n as f64).collect())
}

/// Average recordings into per-subject session rows, ordered by session then
/// subject id. Subjects absent from `labels` are an error.
pub fn aggregate_sessions(
    recordings: &[RecordingFeatures],
    labels: &BTreeMap<String, Group>,
) -> Result<Vec<SessionFeatures>> {
    let mut grouped: BTreeMap<(Session, &str), Vec<&RecordingFeatures>> = BTreeMap::new();
    for r in recordings {
        grouped
            .entry((r.state.session, r.subject_id.as_str()))
            .or_default()
            .push(r);
    }
    grouped
        .into_iter()
        .map(|((session, id), recs)| {
            let label = *labels
                .get(id)
                .ok_or_else(|| Error::Config(format!("subject {id} has no group label")))?;
            Ok(SessionFeatures {
                subject_id: id.to_string(),
                session,
                label,
                n_recordings: recs.len(),
                power: mean_rows(recs.iter().map(|r| r.power.as_slice()))?,
                wpli: mean_rows(recs.iter().map(|r| r.wpli.as_slice()))?,
                pac: mean_rows(recs.iter().map(|r| r.pac.as_slice()))?,
            })
        })
        .collect()
}

/// Subjects x features for one session and family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub session: Session,
    pub family: Family,
    pub columns: Vec<String>,
    pub subject_ids: Vec<String>,
    pub labels: Vec<Group>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn build(
        sessions: &[SessionFeatures],
        session: Session,
        family: Family,
        bands: &BandSet,
    ) -> Result<Self> {
        let columns = family.column_names(bands);
        let mut t = FeatureTable {
            session,
            family,
            columns,
            subject_ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
        };
        for s in sessions.iter().filter(|s| s.session == session) {
            let row = s.family(family);
            if row.len() != t.columns.len() {
                return Err(Error::domain(format!(
                    "{}: {} {family} values for {} columns",
                    s.subject_id,
                    row.len(),
                    t.columns.len()
                )));
            }
            t.subject_ids.push(s.subject_id.clone());
            t.labels.push(s.label);
            t.rows.push(row.to_vec());
        }
        Ok(t)
    }

    /// `(N, D)`
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.session.as_str(), self.family.as_str())
    }

    /// Header `subject_id,group,<columns>`; values in shortest round-trip form.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["subject_id".to_string(), "group".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for ((id, g), row) in self.subject_ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.clone(), g.as_str().to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::parse(e.to_string()))
    }

    pub fn from_csv(text: &str, session: Session, family: Family) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 2 || &header[0] != "subject_id" || &header[1] != "group" {
            return Err(Error::parse("feature table must start with subject_id,group"));
        }
        let mut t = FeatureTable {
            session,
            family,
            columns: header.iter().skip(2).map(str::to_string).collect(),
            subject_ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            t.subject_ids.push(rec[0].to_string());
            t.labels.push(rec[1].parse()?);
            t.rows.push(
                rec.iter()
                    .skip(2)
                    .map(|v| v.parse().map_err(|_| Error::parse(format!("bad value '{v}'"))))
                    .collect::<Result<_>>()?,
            );
        }
        Ok(t)
    }

    /// Columns picked by `indices`, as classifier input.
    pub fn dataset(&self, indices: &[usize]) -> Vec<SubjectFeatureSet> {
        self.subject_ids
            .iter()
            .zip(&self.labels)
            .zip(&self.rows)
            .map(|((id, g), row)| SubjectFeatureSet {
                subject_id: id.clone(),
                features: indices.iter().map(|&i| row[i]).collect(),
                label: *g,
                session: Some(self.session),
            })
            .collect()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::parse(e.to_string())
}

fn column_band(name: &str) -> Option<&str> {
    name.rsplit_once('_').map(|(_, b)| b)
}

/// Significant columns of `family` that belong to its classification band.
pub fn classification_columns(family: Family, columns: &[String], mask: &[bool]) -> Vec<usize> {
    columns
        .iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (name, &keep))| {
            keep && family
                .classification_band()
                .is_none_or(|b| column_band(name) == Some(b))
        })
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec_features(id: &str, state: StateTag, v: f64) -> RecordingFeatures {
        RecordingFeatures {
            subject_id: id.into(),
            state,
            power: vec![v; 20],
            wpli: vec![v; 60],
            pac: vec![v; 25],
        }
    }

    #[test]
    fn sessions_average_their_recordings() {
        let mut recs = Vec::new();
        for rs in 1..=8u8 {
            recs.push(rec_features("b", StateTag::resting(rs).unwrap(), rs as f64));
        }
        recs.push(rec_features("a", StateTag::NAP, 9.0));
        let labels = BTreeMap::from([("a".to_string(), Group::GS), ("b".to_string(), Group::PS)]);
        let s = aggregate_sessions(&recs, &labels).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!((s[0].session, s[0].subject_id.as_str()), (Session::Nap, "a"));
        assert_eq!(s[1].session, Session::PreNap);
        assert_eq!(s[1].power[0], 2.5);
        assert_eq!(s[2].wpli[59], 5.5);
        assert_eq!(s[3].pac[0], 7.5);
        assert_eq!(s[3].n_recordings, 2);
        assert!(aggregate_sessions(&recs, &BTreeMap::new()).is_err());
    }

    #[test]
    fn table_round_trip_and_selection() {
        let labels = BTreeMap::from([("a".to_string(), Group::GS), ("b".to_string(), Group::PS)]);
        let recs = vec![
            rec_features("a", StateTag::resting(7).unwrap(), 0.1),
            rec_features("b", StateTag::resting(8).unwrap(), 1.0 / 3.0),
        ];
        let s = aggregate_sessions(&recs, &labels).unwrap();
        let bands = BandSet::default();
        let t = FeatureTable::build(&s, Session::PostNight, Family::Wpli, &bands).unwrap();
        assert_eq!(t.shape(), (2, 60));
        let back = FeatureTable::from_csv(&t.to_csv().unwrap(), Session::PostNight, Family::Wpli).unwrap();
        assert_eq!(back, t);

        let mut mask = vec![false; 60];
        mask[0] = true;
        mask[1] = true;
        mask[4] = true;
        let idx = classification_columns(Family::Wpli, &t.columns, &mask);
        assert_eq!(idx, vec![0, 4]);
        assert_eq!(t.dataset(&idx)[1].features, vec![1.0 / 3.0; 2]);
        let names = Family::Power.column_names(&bands);
        let mut m = vec![false; 20];
        m[3] = true;
        m[2] = true;
        assert_eq!(classification_columns(Family::Power, &names, &m), vec![3]);
        assert_eq!(classification_columns(Family::Pac, &pac_pair_names(), &[true; 25]).len(), 25);
    }

    #[test]
    fn nap_spans_need_the_stage() {
        let rec = Recording::new(
            "s",
            100.0,
            vec!["a".into()],
            vec![vec![0.0; 9000]],
            StateTag::NAP,
        )
        .unwrap();
        let hyp = Hypnogram::new(vec![Stage::N2, Stage::N3, Stage::N3]);
        assert_eq!(analysis_spans(&rec, Some(&hyp), Stage::N3).unwrap(), vec![3000..9000]);
        let no = Hypnogram::new(vec![Stage::N2; 3]);
        assert!(matches!(
            analysis_spans(&rec, Some(&no), Stage::N3),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(analysis_spans(&rec, None, Stage::N3), Err(Error::Config(_))));
    }
}
