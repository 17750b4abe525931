//! Domain types shared by every pipeline stage.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Experimental session a recording belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Session {
    Nap,
    PreNap,
    PostNap,
    PostNight,
}

impl Session {
    pub const ALL: [Session; 4] = [
        Session::Nap,
        Session::PreNap,
        Session::PostNap,
        Session::PostNight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Session::Nap => "nap",
            Session::PreNap => "pre-nap",
            Session::PostNap => "post-nap",
            Session::PostNight => "post-night",
        }
    }

    /// Title-cased name used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Session::Nap => "Nap",
            Session::PreNap => "Pre-nap",
            Session::PostNap => "Post-nap",
            Session::PostNight => "Post-night",
        }
    }

    /// Resting-state indices recorded in this session.
    pub fn rs_indices(self) -> &'static [u8] {
        match self {
            Session::Nap => &[],
            Session::PreNap => &[1, 2, 3, 4],
            Session::PostNap => &[5, 6],
            Session::PostNight => &[7, 8],
        }
    }

    pub fn for_rs_index(index: u8) -> Option<Session> {
        Session::ALL
            .into_iter()
            .find(|s| s.rs_indices().contains(&index))
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Session {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "nap" => Ok(Session::Nap),
            "prenap" => Ok(Session::PreNap),
            "postnap" => Ok(Session::PostNap),
            "postnight" => Ok(Session::PostNight),
            _ => Err(Error::Config(format!("unknown session '{s}'"))),
        }
    }
}

/// Recording state: the session plus, for resting-state blocks, the RS index 1-8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateTag {
    pub session: Session,
    pub rs_index: Option<u8>,
}

impl StateTag {
    pub const NAP: StateTag = StateTag {
        session: Session::Nap,
        rs_index: None,
    };

    pub fn resting(index: u8) -> Result<Self> {
        let session = Session::for_rs_index(index)
            .ok_or_else(|| Error::Config(format!("RS index {index} outside 1-8")))?;
        Ok(StateTag {
            session,
            rs_index: Some(index),
        })
    }

    /// Build from a session name and optional RS index, checking consistency.
    pub fn new(session: Session, rs_index: Option<u8>) -> Result<Self> {
        match (session, rs_index) {
            (Session::Nap, None) => Ok(StateTag::NAP),
            (Session::Nap, Some(i)) => Err(Error::Config(format!(
                "nap recordings carry no RS index (got {i})"
            ))),
            (s, Some(i)) if s.rs_indices().contains(&i) => Ok(StateTag {
                session: s,
                rs_index: Some(i),
            }),
            (s, Some(i)) => Err(Error::Config(format!(
                "RS {i} does not belong to session {s}"
            ))),
            (s, None) => Err(Error::Config(format!("session {s} requires an RS index"))),
        }
    }

    /// Short label: "Nap" or "RS 3".
    pub fn label(&self) -> String {
        match self.rs_index {
            Some(i) => format!("RS {i}"),
            None => "Nap".to_string(),
        }
    }

    /// File-name friendly label: "nap" or "rs3".
    pub fn slug(&self) -> String {
        match self.rs_index {
            Some(i) => format!("rs{i}"),
            None => "nap".to_string(),
        }
    }
}

/// Multichannel sampled signal, channels x time, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub sample_rate: f64,
    pub channel_labels: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub state: StateTag,
}

impl Recording {
    /// Construct and validate.
    pub fn new(
        subject_id: impl Into<String>,
        sample_rate: f64,
        channel_labels: Vec<String>,
        samples: Vec<Vec<f64>>,
        state: StateTag,
    ) -> Result<Self> {
        let rec = Recording {
            subject_id: subject_id.into(),
            sample_rate,
            channel_labels,
            samples,
            state,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::domain(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.channel_labels.len() != self.samples.len() {
            return Err(Error::domain(format!(
                "{} labels for {} channels",
                self.channel_labels.len(),
                self.samples.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for label in &self.channel_labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::domain(format!("duplicate channel label '{label}'")));
            }
        }
        let n = self.n_samples();
        for (label, row) in self.channel_labels.iter().zip(&self.samples) {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "channel '{label}' has {} samples, expected {n}",
                    row.len()
                )));
            }
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::domain(format!(
                    "channel '{label}' sample {i} is not finite"
                )));
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_seconds(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.channel_index(label).map(|i| self.samples[i].as_slice())
    }

    /// Same metadata, new sample matrix (and optionally rate).
    pub(crate) fn with_samples(&self, samples: Vec<Vec<f64>>, sample_rate: f64) -> Recording {
        Recording {
            subject_id: self.subject_id.clone(),
            sample_rate,
            channel_labels: self.channel_labels.clone(),
            samples,
            state: self.state,
        }
    }

    /// Copy with the named channels dropped.
    pub fn without_channels(&self, drop: &[String]) -> Recording {
        let (labels, samples): (Vec<_>, Vec<_>) = self
            .channel_labels
            .iter()
            .zip(&self.samples)
            .filter(|(l, _)| !drop.contains(l))
            .map(|(l, s)| (l.clone(), s.clone()))
            .unzip();
        Recording {
            subject_id: self.subject_id.clone(),
            sample_rate: self.sample_rate,
            channel_labels: labels,
            samples,
            state: self.state,
        }
    }
}

/// AASM sleep stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Wake,
    Rem,
    N1,
    N2,
    N3,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Wake => "W",
            Stage::Rem => "REM",
            Stage::N1 => "N1",
            Stage::N2 => "N2",
            Stage::N3 => "N3",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" | "WAKE" => Ok(Stage::Wake),
            "R" | "REM" => Ok(Stage::Rem),
            "N1" => Ok(Stage::N1),
            "N2" => Ok(Stage::N2),
            "N3" => Ok(Stage::N3),
            other => Err(Error::parse(format!("unknown sleep stage '{other}'"))),
        }
    }
}

/// Per-30-s-epoch sleep stage labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypnogram {
    stages: Vec<Stage>,
}

impl Hypnogram {
    pub const EPOCH_SECONDS: f64 = 30.0;

    pub fn new(stages: Vec<Stage>) -> Self {
        Hypnogram { stages }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn epoch_length(&self) -> f64 {
        Self::EPOCH_SECONDS
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn contains(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    /// Parse one stage label per non-empty line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let stages = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Hypnogram { stages })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            out.push_str(s.as_str());
            out.push('\n');
        }
        out
    }
}

/// Sleep-quality group derived from the PSQI global score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Good sleeper.
    GS,
    /// Poor sleeper.
    PS,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::GS => "GS",
            Group::PS => "PS",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "GS" | "gs" => Ok(Group::GS),
            "PS" | "ps" => Ok(Group::PS),
            other => Err(Error::parse(format!("unknown group '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "F" | "f" => Ok(Sex::F),
            "M" | "m" => Ok(Sex::M),
            other => Err(Error::parse(format!("unknown sex '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMeta {
    pub subject_id: String,
    pub psqi_score: u8,
    pub age: f64,
    pub sex: Sex,
    pub group: Group,
}

impl SubjectMeta {
    /// Group is derived from the score, so the two can never disagree.
    pub fn new(subject_id: impl Into<String>, psqi_score: u8, age: f64, sex: Sex) -> Result<Self> {
        let group = crate::ingest::assign_group(psqi_score as i32)?;
        Ok(SubjectMeta {
            subject_id: subject_id.into(),
            psqi_score,
            age,
            sex,
            group,
        })
    }
}

/// Scalp region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Roi {
    Frontal,
    Central,
    Temporal,
    Parietal,
    Occipital,
}

impl Roi {
    pub const ALL: [Roi; 5] = [
        Roi::Frontal,
        Roi::Central,
        Roi::Temporal,
        Roi::Parietal,
        Roi::Occipital,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Roi::Frontal => "frontal",
            Roi::Central => "central",
            Roi::Temporal => "temporal",
            Roi::Parietal => "parietal",
            Roi::Occipital => "occipital",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Roi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Roi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Roi::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown region '{s}'")))
    }
}

/// Channel label to region assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoiMap {
    map: BTreeMap<String, Roi>,
}

impl RoiMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: impl Into<String>, roi: Roi) {
        self.map.insert(label.into(), roi);
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Roi)>,
        S: Into<String>,
    {
        let mut m = RoiMap::new();
        for (l, r) in pairs {
            m.insert(l, r);
        }
        m
    }

    pub fn get(&self, label: &str) -> Option<Roi> {
        self.map.get(label).copied()
    }

    /// Labels mapped to `roi`, sorted.
    pub fn labels(&self, roi: Roi) -> Vec<&str> {
        self.map
            .iter()
            .filter(|(_, r)| **r == roi)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Channel indices of `rec` per region, in region order. Labels absent from
    /// the recording (for example rejected channels) are skipped.
    pub fn channel_groups(&self, rec: &Recording) -> Result<[Vec<usize>; 5]> {
        let mut groups: [Vec<usize>; 5] = Default::default();
        for (i, label) in rec.channel_labels.iter().enumerate() {
            if let Some(roi) = self.get(label) {
                groups[roi.index()].push(i);
            }
        }
        for roi in Roi::ALL {
            if groups[roi.index()].is_empty() {
                return Err(Error::EmptyRoi(roi.to_string()));
            }
        }
        Ok(groups)
    }

    /// Every mapped label must exist in the recording.
    pub fn check_labels(&self, rec: &Recording) -> Result<()> {
        for label in self.map.keys() {
            if rec.channel_index(label).is_none() {
                return Err(Error::Config(format!(
                    "ROI map names channel '{label}' absent from recording"
                )));
            }
        }
        Ok(())
    }
}

/// Frequency band. Bins are assigned with `low <= f < high`, or `low <= f <= high`
/// when `closed` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
    pub closed: bool,
}

impl Band {
    pub fn new(name: impl Into<String>, low_hz: f64, high_hz: f64) -> Self {
        Band {
            name: name.into(),
            low_hz,
            high_hz,
            closed: false,
        }
    }

    pub fn closed(mut self) -> Self {
        self.closed = true;
        self
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.low_hz && (f < self.high_hz || (self.closed && f <= self.high_hz))
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.low_hz + self.high_hz)
    }

    pub fn range(&self) -> Range<f64> {
        self.low_hz..self.high_hz
    }
}

/// Ordered set of named bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub bands: Vec<Band>,
}

impl Default for BandSet {
    /// delta [0.5,4), theta [4,8), alpha [8,11), beta [11,30].
    fn default() -> Self {
        BandSet {
            bands: vec![
                Band::new("delta", 0.5, 4.0),
                Band::new("theta", 4.0, 8.0),
                Band::new("alpha", 8.0, 11.0),
                Band::new("beta", 11.0, 30.0).closed(),
            ],
        }
    }
}

impl BandSet {
    pub fn get(&self, name: &str) -> Option<&Band> {
        self.bands.iter().find(|b| b.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.name == name)
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}
