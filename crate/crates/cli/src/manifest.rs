//! Input manifest: where each recording, hypnogram and the subject table live.
//!
//! ```toml
//! subjects = "subjects.csv"
//!
//! [rois]
//! frontal = ["F3", "Fz", "F4"]
//!
//! [[recording]]
//! subject = "S01"
//! session = "nap"
//! file = "raw/S01_nap.edf"
//! hypnogram = "raw/S01_nap.hyp"
//!
//! [[recording]]
//! subject = "S01"
//! session = "pre-nap"
//! rs_index = 1
//! file = "raw/S01_rs1.csv"
//! sample_rate_hz = 500.0
//! ```
//!
//! Paths are relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqeeg_core::ingest::Sidecar;
use sqeeg_core::ingest::{load_hypnogram, load_recording};
use sqeeg_core::{Hypnogram, Recording, Roi, RoiMap, Session, StateTag, SubjectMeta};

use crate::config::roi_map_from_table;
use crate::ConfigError;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub subjects: PathBuf,
    #[serde(default)]
    pub rois: BTreeMap<String, Vec<String>>,
    #[serde(default, rename = "recording")]
    pub recordings: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub subject: String,
    pub session: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rs_index: Option<u8>,
    pub file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypnogram: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn new(subject: &str, state: StateTag, file: PathBuf) -> Self {
        ManifestEntry {
            subject: subject.to_string(),
            session: state.session.as_str().to_string(),
            rs_index: state.rs_index,
            file,
            sample_rate_hz: None,
            hypnogram: None,
        }
    }

    pub fn state(&self) -> Result<StateTag, ConfigError> {
        let session: Session = self
            .session
            .parse()
            .map_err(|e| ConfigError(format!("subject {}: {e}", self.subject)))?;
        StateTag::new(session, self.rs_index)
            .map_err(|e| ConfigError(format!("subject {}: {e}", self.subject)))
    }
}

pub fn roi_table(map: &RoiMap) -> BTreeMap<String, Vec<String>> {
    Roi::ALL
        .iter()
        .map(|r| {
            (
                r.as_str().to_string(),
                map.labels(*r).into_iter().map(str::to_string).collect(),
            )
        })
        .collect()
}

impl Manifest {
    pub fn render(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// A manifest whose references have all been checked.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub subjects: Vec<SubjectMeta>,
    pub rois: RoiMap,
    pub states: Vec<StateTag>,
}

impl LoadedManifest {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Manifest = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("manifest {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::validate(dir, manifest)
    }

    fn validate(dir: PathBuf, manifest: Manifest) -> Result<Self, ConfigError> {
        let subject_path = dir.join(&manifest.subjects);
        let subjects = sqeeg_core::ingest::load_subject_table(&subject_path)
            .map_err(|e| ConfigError(format!("subject table: {e}")))?;
        let known: BTreeSet<&str> = subjects.iter().map(|s| s.subject_id.as_str()).collect();
        if known.len() != subjects.len() {
            return Err(ConfigError("subject table repeats a subject id".into()));
        }
        let rois = roi_map_from_table(&manifest.rois)?;
        let mut seen = BTreeSet::new();
        let mut states = Vec::with_capacity(manifest.recordings.len());
        for e in &manifest.recordings {
            let state = e.state()?;
            if !known.contains(e.subject.as_str()) {
                return Err(ConfigError(format!(
                    "subject {} is not in the subject table",
                    e.subject
                )));
            }
            if !seen.insert((e.subject.clone(), state)) {
                return Err(ConfigError(format!(
                    "subject {}: {} listed twice",
                    e.subject,
                    state.label()
                )));
            }
            if !dir.join(&e.file).is_file() {
                return Err(ConfigError(format!(
                    "subject {}: recording {} not found",
                    e.subject,
                    e.file.display()
                )));
            }
            if state.session == Session::Nap {
                match &e.hypnogram {
                    None => {
                        return Err(ConfigError(format!(
                            "subject {}: nap recording has no hypnogram",
                            e.subject
                        )))
                    }
                    Some(h) if !dir.join(h).is_file() => {
                        return Err(ConfigError(format!(
                            "subject {}: hypnogram {} not found",
                            e.subject,
                            h.display()
                        )))
                    }
                    Some(_) => {}
                }
            }
            let is_edf = e
                .file
                .extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| x.eq_ignore_ascii_case("edf"));
            if !is_edf && e.sample_rate_hz.is_none() {
                return Err(ConfigError(format!(
                    "subject {}: CSV recording {} needs sample_rate_hz",
                    e.subject,
                    e.file.display()
                )));
            }
            states.push(state);
        }
        Ok(LoadedManifest {
            dir,
            manifest,
            subjects,
            rois,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.recordings.is_empty()
    }

    pub fn labels(&self) -> BTreeMap<String, sqeeg_core::Group> {
        self.subjects
            .iter()
            .map(|s| (s.subject_id.clone(), s.group))
            .collect()
    }

    pub fn load_recording(&self, i: usize) -> sqeeg_core::Result<Recording> {
        let e = &self.manifest.recordings[i];
        let sidecar = Sidecar {
            sample_rate_hz: e.sample_rate_hz,
            subject_id: Some(e.subject.clone()),
            state_tag: Some(e.session.clone()),
            rs_index: e.rs_index,
        };
        let mut rec = load_recording(&self.dir.join(&e.file), Some(&sidecar))?;
        rec.subject_id = e.subject.clone();
        rec.state = self.states[i];
        Ok(rec)
    }

    pub fn load_hypnogram(&self, i: usize) -> sqeeg_core::Result<Option<Hypnogram>> {
        match &self.manifest.recordings[i].hypnogram {
            None => Ok(None),
            Some(h) => load_hypnogram(&self.dir.join(h)).map(Some),
        }
    }
}
