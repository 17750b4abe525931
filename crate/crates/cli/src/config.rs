//! Run configuration, read from a TOML file.
//!
//! Every section is optional. Relative paths resolve against the directory
//! holding the config file. `SQEEG_OUTPUT_DIR` and `SQEEG_THREADS` override
//! the output directory and thread count.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqeeg_core::classify::{ClassifierKind, ClassifierSpec};
use sqeeg_core::features::FeatureParams;
use sqeeg_core::preprocess::PreprocessParams;
use sqeeg_core::synth::RawCohortSpec;
use sqeeg_core::{Band, BandSet, Roi, RoiMap, Stage};

use crate::ConfigError;

pub const OUTPUT_DIR_ENV: &str = "SQEEG_OUTPUT_DIR";
pub const THREADS_ENV: &str = "SQEEG_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub input: InputConfig,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeaturesConfig,
    pub stats: StatsConfig,
    pub classify: ClassifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("sqeeg-out"),
            threads: 0,
            input: InputConfig::default(),
            synth: SynthConfig::default(),
            preprocess: PreprocessConfig::default(),
            features: FeaturesConfig::default(),
            stats: StatsConfig::default(),
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Raw-data manifest. Defaults to the one written by `synth`.
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordingFormat {
    Edf,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_gs: usize,
    pub n_ps: usize,
    pub no_n3_gs: usize,
    pub no_n3_ps: usize,
    pub sample_rate_hz: f64,
    pub rs_seconds: f64,
    pub nap_epochs: usize,
    pub channels_per_roi: usize,
    pub effect: f64,
    pub max_bad_channels: usize,
    pub seed: u64,
    pub format: RecordingFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = RawCohortSpec::default();
        SynthConfig {
            n_gs: d.n_gs,
            n_ps: d.n_ps,
            no_n3_gs: d.no_n3_gs,
            no_n3_ps: d.no_n3_ps,
            sample_rate_hz: d.sample_rate,
            rs_seconds: d.rs_seconds,
            nap_epochs: d.nap_epochs,
            channels_per_roi: d.channels_per_roi,
            effect: d.effect,
            max_bad_channels: d.max_bad_channels,
            seed: d.seed,
            format: RecordingFormat::Edf,
        }
    }
}

impl SynthConfig {
    pub fn spec(&self) -> RawCohortSpec {
        RawCohortSpec {
            n_gs: self.n_gs,
            n_ps: self.n_ps,
            no_n3_gs: self.no_n3_gs,
            no_n3_ps: self.no_n3_ps,
            sample_rate: self.sample_rate_hz,
            rs_seconds: self.rs_seconds,
            nap_epochs: self.nap_epochs,
            channels_per_roi: self.channels_per_roi,
            effect: self.effect,
            max_bad_channels: self.max_bad_channels,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_rate_hz: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    pub num_taps: Option<usize>,
    pub kurtosis_z: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let d = PreprocessParams::default();
        PreprocessConfig {
            target_rate_hz: d.target_rate_hz,
            low_hz: d.low_hz,
            high_hz: d.high_hz,
            num_taps: d.num_taps,
            kurtosis_z: d.kurtosis_z,
        }
    }
}

impl PreprocessConfig {
    pub fn params(&self) -> PreprocessParams {
        PreprocessParams {
            target_rate_hz: self.target_rate_hz,
            low_hz: self.low_hz,
            high_hz: self.high_hz,
            num_taps: self.num_taps,
            kurtosis_z: self.kurtosis_z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
    #[serde(default)]
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub nap_stage: String,
    /// Replaces the default delta-theta-alpha-beta set when non-empty.
    pub bands: Vec<BandConfig>,
    /// Replaces the manifest's region map when non-empty.
    pub rois: std::collections::BTreeMap<String, Vec<String>>,
    pub phase_centers_hz: Vec<f64>,
    pub amp_centers_hz: Vec<f64>,
    pub comodulogram_phase_roi: String,
    pub comodulogram_amp_roi: String,
    /// Surrogates per comodulogram cell; 0 skips the surrogate p-values.
    pub surrogates: usize,
    pub surrogate_seed: u64,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        let pac = sqeeg_core::coupling::PacConfig::default();
        FeaturesConfig {
            nap_stage: "N3".into(),
            bands: Vec::new(),
            rois: Default::default(),
            phase_centers_hz: pac.phase_centers,
            amp_centers_hz: pac.amp_centers,
            comodulogram_phase_roi: "temporal".into(),
            comodulogram_amp_roi: "frontal".into(),
            surrogates: 0,
            surrogate_seed: 0,
        }
    }
}

impl FeaturesConfig {
    pub fn params(&self) -> Result<FeatureParams, ConfigError> {
        let mut p = FeatureParams::default();
        if !self.bands.is_empty() {
            p.bands = BandSet {
                bands: self
                    .bands
                    .iter()
                    .map(|b| {
                        let band = Band::new(b.name.clone(), b.low_hz, b.high_hz);
                        if b.closed {
                            band.closed()
                        } else {
                            band
                        }
                    })
                    .collect(),
            };
        }
        p.pac.phase_centers = self.phase_centers_hz.clone();
        p.pac.amp_centers = self.amp_centers_hz.clone();
        p.nap_stage = self
            .nap_stage
            .parse::<Stage>()
            .map_err(|e| ConfigError(format!("features.nap_stage: {e}")))?;
        Ok(p)
    }

    pub fn comodulogram_rois(&self) -> Result<(Roi, Roi), ConfigError> {
        let parse = |key: &str, v: &str| {
            v.parse::<Roi>()
                .map_err(|e| ConfigError(format!("features.{key}: {e}")))
        };
        Ok((
            parse("comodulogram_phase_roi", &self.comodulogram_phase_roi)?,
            parse("comodulogram_amp_roi", &self.comodulogram_amp_roi)?,
        ))
    }

    pub fn roi_override(&self) -> Result<Option<RoiMap>, ConfigError> {
        if self.rois.is_empty() {
            return Ok(None);
        }
        roi_map_from_table(&self.rois).map(Some)
    }
}

pub fn roi_map_from_table(
    table: &std::collections::BTreeMap<String, Vec<String>>,
) -> Result<RoiMap, ConfigError> {
    let mut map = RoiMap::new();
    for (name, labels) in table {
        let roi: Roi = name.parse().map_err(|e| ConfigError(format!("rois: {e}")))?;
        for l in labels {
            map.insert(l.clone(), roi);
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            permutations: 1000,
            alpha: 0.05,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub classifiers: Vec<String>,
    pub lambda: f64,
    pub k: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            classifiers: ClassifierKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
            lambda: 0.1,
            k: 5,
        }
    }
}

impl ClassifyConfig {
    pub fn specs(&self) -> Result<Vec<ClassifierSpec>, ConfigError> {
        if self.classifiers.is_empty() {
            return Err(ConfigError("classify.classifiers is empty".into()));
        }
        if !(self.lambda > 0.0) || self.k == 0 {
            return Err(ConfigError("classify.lambda must be positive and k at least 1".into()));
        }
        let mut kinds: Vec<ClassifierKind> = self
            .classifiers
            .iter()
            .map(|s| s.parse().map_err(|e| ConfigError(format!("classify.classifiers: {e}"))))
            .collect::<Result<_, _>>()?;
        kinds.sort();
        kinds.dedup();
        Ok(kinds
            .into_iter()
            .map(|kind| ClassifierSpec {
                kind,
                lambda: self.lambda,
                k: self.k,
            })
            .collect())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    /// Read `path`, resolve relative paths against its directory and apply
    /// environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_env()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        if let Some(m) = &self.input.manifest {
            if m.is_relative() {
                self.input.manifest = Some(base.join(m));
            }
        }
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Ok(t) = std::env::var(THREADS_ENV) {
            self.threads = t
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("{THREADS_ENV}: expected a count, got '{t}'")))?;
        }
        Ok(())
    }

    pub fn raw_manifest_path(&self) -> PathBuf {
        self.input
            .manifest
            .clone()
            .unwrap_or_else(|| self.output_dir.join("synth").join(crate::manifest::MANIFEST_FILE))
    }
}
