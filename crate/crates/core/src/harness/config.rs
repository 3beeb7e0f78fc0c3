use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::{ControlConfig, SensorState};
use crate::error::{Error, Result};
use crate::lmb::TruncationConfig;
use crate::metrics::OspaParams;
use crate::models::{BirthConfig, MeasurementModel, MotionModel, TruthConfig};

/// Which filter drives the main recursion. Control always scores commands
/// with the CB-MeMBer update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    #[default]
    LmbPeecs,
    CbmemberPeecs,
}

impl FilterMode {
    pub const ALL: [FilterMode; 2] = [FilterMode::LmbPeecs, FilterMode::CbmemberPeecs];

    pub fn as_str(&self) -> &'static str {
        match self {
            FilterMode::LmbPeecs => "lmb-peecs",
            FilterMode::CbmemberPeecs => "cbmember-peecs",
        }
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lmb-peecs" => Ok(FilterMode::LmbPeecs),
            "cbmember-peecs" => Ok(FilterMode::CbmemberPeecs),
            other => Err(Error::Config(format!(
                "unknown filter mode `{other}` (expected lmb-peecs or cbmember-peecs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_scans: u32,
    pub n_trials: usize,
    pub seed: u64,
    pub mode: FilterMode,
    pub output_dir: PathBuf,
    /// Sensor position before the first command.
    pub sensor_initial: [f64; 2],
    /// Existence threshold for reported tracks.
    pub extraction_threshold: f64,
    /// Particles drawn per birth component and scan.
    pub birth_particles: usize,
    pub motion: MotionModel,
    pub measurement: MeasurementModel,
    pub birth: BirthConfig,
    pub truth: TruthConfig,
    pub truncation: TruncationConfig,
    pub control: ControlConfig,
    pub ospa: OspaParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_scans: 50,
            n_trials: 20,
            seed: 1,
            mode: FilterMode::LmbPeecs,
            output_dir: PathBuf::from("out"),
            sensor_initial: [0.0, 1500.0],
            extraction_threshold: 0.5,
            birth_particles: 1000,
            motion: MotionModel::default(),
            measurement: MeasurementModel::default(),
            birth: BirthConfig::default(),
            truth: TruthConfig::default(),
            truncation: TruncationConfig::default(),
            control: ControlConfig::default(),
            ospa: OspaParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn sensor_start(&self) -> SensorState {
        SensorState::new(self.sensor_initial[0], self.sensor_initial[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_scans == 0 {
            return Err(Error::Config("n_scans must be >= 1".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        if self.birth_particles == 0 {
            return Err(Error::Config("birth_particles must be >= 1".into()));
        }
        if !self.sensor_initial.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("sensor_initial must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.extraction_threshold) {
            return Err(Error::Config(format!(
                "extraction_threshold {} outside [0, 1)",
                self.extraction_threshold
            )));
        }
        self.motion.validate()?;
        self.measurement.validate()?;
        self.truncation.validate()?;
        self.control.validate()?;
        self.ospa.validate()?;
        Ok(())
    }
}
