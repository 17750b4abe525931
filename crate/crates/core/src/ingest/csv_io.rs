use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::recording::{Recording, Session, Sex, StateTag, SubjectMeta};

/// Metadata that accompanies a CSV recording, since the CSV itself carries
/// only channel labels and samples.
///
/// Stored as `key = value` lines (a TOML subset):
///
/// ```text
/// sample_rate_hz = 1000
/// subject_id = "S01"
/// state_tag = "pre-nap"
/// rs_index = 2
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sidecar {
    pub sample_rate_hz: Option<f64>,
    pub subject_id: Option<String>,
    pub state_tag: Option<String>,
    pub rs_index: Option<u8>,
}

impl Sidecar {
    pub fn for_recording(rec: &Recording) -> Self {
        Sidecar {
            sample_rate_hz: Some(rec.sample_rate),
            subject_id: Some(rec.subject_id.clone()),
            state_tag: Some(rec.state.session.as_str().to_string()),
            rs_index: rec.state.rs_index,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sc = Sidecar::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("sidecar line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            let bad = |what: &str| Error::Config(format!("sidecar {key}: invalid {what} '{value}'"));
            match key {
                "sample_rate_hz" => {
                    sc.sample_rate_hz = Some(value.parse().map_err(|_| bad("number"))?)
                }
                "subject_id" => sc.subject_id = Some(value.to_string()),
                "state_tag" => sc.state_tag = Some(value.to_string()),
                "rs_index" => sc.rs_index = Some(value.parse().map_err(|_| bad("index"))?),
                other => {
                    return Err(Error::Config(format!("unknown sidecar key '{other}'")));
                }
            }
        }
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Sidecar::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(r) = self.sample_rate_hz {
            let _ = writeln!(out, "sample_rate_hz = {r}");
        }
        if let Some(id) = &self.subject_id {
            let _ = writeln!(out, "subject_id = \"{id}\"");
        }
        if let Some(s) = &self.state_tag {
            let _ = writeln!(out, "state_tag = \"{s}\"");
        }
        if let Some(i) = self.rs_index {
            let _ = writeln!(out, "rs_index = {i}");
        }
        out
    }

    /// The declared state, if any.
    pub fn state(&self) -> Result<Option<StateTag>> {
        match &self.state_tag {
            None => Ok(None),
            Some(s) => {
                let session: Session = s.parse()?;
                StateTag::new(session, self.rs_index).map(Some)
            }
        }
    }
}

/// Read a CSV whose first row holds channel labels and whose remaining rows
/// hold one sample per channel.
pub fn load_csv_recording(path: &Path, sidecar: &Sidecar) -> Result<Recording> {
    let sample_rate = sidecar
        .sample_rate_hz
        .ok_or_else(|| Error::Config(format!("{}: sidecar lacks sample_rate_hz", path.display())))?;
    let state = sidecar
        .state()?
        .ok_or_else(|| Error::Config(format!("{}: sidecar lacks state_tag", path.display())))?;
    let subject_id = sidecar.subject_id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });

    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));

    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if labels.is_empty() || labels.iter().any(String::is_empty) {
        return Err(Error::parse(format!("{}: empty channel label", path.display())));
    }

    let mut samples = vec![Vec::new(); labels.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
        if record.len() != labels.len() {
            return Err(Error::parse(format!(
                "{}: row {} has {} columns, header has {}",
                path.display(),
                row + 2,
                record.len(),
                labels.len()
            )));
        }
        for (ch, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(format!("{}: row {} non-numeric cell '{cell}'", path.display(), row + 2))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(format!(
                    "{}: row {} non-finite cell '{cell}'",
                    path.display(),
                    row + 2
                )));
            }
            samples[ch].push(v);
        }
    }

    Recording::new(subject_id, sample_rate, labels, samples, state)
}

/// Write a recording in the layout `load_csv_recording` reads. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv_recording(rec: &Recording, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(rec.n_samples() * rec.n_channels() * 10);
    out.push_str(&rec.channel_labels.join(","));
    out.push('\n');
    for t in 0..rec.n_samples() {
        for (ch, row) in rec.samples.iter().enumerate() {
            if ch > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", row[t]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Subject table: `subject_id,psqi,age,sex` with a header row.
pub fn load_subject_table(path: &Path) -> Result<Vec<SubjectMeta>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
        let field = |i: usize| {
            record.get(i).ok_or_else(|| {
                Error::parse(format!("{}: row {} too short", path.display(), row + 2))
            })
        };
        let id = field(0)?.to_string();
        let psqi: i32 = field(1)?
            .parse()
            .map_err(|_| Error::parse(format!("{}: bad psqi on row {}", path.display(), row + 2)))?;
        let age: f64 = field(2)?
            .parse()
            .map_err(|_| Error::parse(format!("{}: bad age on row {}", path.display(), row + 2)))?;
        let sex: Sex = field(3)?.parse()?;
        if !(0..=21).contains(&psqi) {
            return Err(Error::domain(format!("{id}: PSQI {psqi} outside 0-21")));
        }
        out.push(SubjectMeta::new(id, psqi as u8, age, sex)?);
    }
    Ok(out)
}
