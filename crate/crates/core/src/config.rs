//! TOML scenario files.
//!
//! ```toml
//! seed = 7
//! victim_circuit = "GHZ"
//! victim_repetitions = 2500
//! probe_circuit = "probe"
//!
//! [device]
//! name = "simulator"
//! [device.circuits.GHZ]
//! mean = 0.168084145
//! variance = 0.003
//! [device.circuits.probe]
//! mean = 0.05
//! variance = 0.0001
//!
//! [uc]
//! backend = "sim"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{grover_catalog, Backend, BaselineError, BaselineTable, GroverCalibration, GroverVariant};
use crate::cloudsim::{DeviceProfile, Scenario, SimError};
use crate::mitigations::Mitigation;
use crate::trace::{assemble_trace, assemble_trace_known_count, AttackerView, Trace, TraceError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("scenario has no [{0}] section")]
    MissingSection(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

fn one() -> usize {
    1
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UcSection {
    /// Baseline CSV, relative to the scenario file; the bundled table if absent.
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default = "default_backend")]
    pub backend: Backend,
}

fn default_backend() -> Backend {
    Backend::Simulator
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpSection {
    /// Reference devices; the scenario device is added when not listed.
    pub devices: Vec<DeviceProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NullSection {
    /// Circuit for the second trace; the victim circuit if absent.
    #[serde(default)]
    pub circuit_b: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoSection {
    /// 1-based catalog index of the victim's variant.
    pub variant: usize,
    #[serde(default)]
    pub calibration: GroverCalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub victim_circuit: String,
    pub victim_repetitions: usize,
    pub probe_circuit: String,
    #[serde(default = "one")]
    pub probe_every: usize,
    /// Victim duration the attacker assumes when counting runs per interval;
    /// the device's own mean if absent.
    #[serde(default)]
    pub avg_victim: Option<f64>,
    /// Victim runs the attacker knows each probe interval to hold. When set,
    /// runs are not counted from `avg_victim`.
    #[serde(default)]
    pub runs_per_interval: Option<usize>,
    /// Per-job overhead subtracted from intervals; the device gap if absent.
    #[serde(default)]
    pub gap_correction: Option<f64>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Monte-Carlo runs for `mitigate`.
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub device: DeviceProfile,
    #[serde(default)]
    pub uc: Option<UcSection>,
    #[serde(default)]
    pub qp: Option<QpSection>,
    #[serde(default)]
    pub null: Option<NullSection>,
    #[serde(default)]
    pub co: Option<CoSection>,
    #[serde(default)]
    pub mitigations: Vec<Mitigation>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_runs() -> usize {
    200
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.prepare()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            source: Box::new(source),
        })?;
        cfg.prepare()?;
        Ok(cfg)
    }

    /// Fills the victim circuit from the Grover catalog when a `[co]`
    /// section names a variant the device does not define, then validates.
    fn prepare(&mut self) -> Result<(), ConfigError> {
        if let Some(co) = &self.co {
            let catalog = self.catalog()?;
            let v = co
                .variant
                .checked_sub(1)
                .and_then(|i| catalog.get(i))
                .ok_or_else(|| ConfigError::Invalid(format!("co.variant must be in 1..=24, got {}", co.variant)))?;
            self.device
                .circuit_timings
                .entry(self.victim_circuit.clone())
                .or_insert(v.timing);
        }
        if self.runs_per_interval == Some(0) {
            return Err(ConfigError::Invalid("runs_per_interval must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        for m in &self.mitigations {
            m.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.scenario().validate()?;
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            device: self.device.clone(),
            victim_circuit: self.victim_circuit.clone(),
            victim_repetitions: self.victim_repetitions,
            probe_circuit: self.probe_circuit.clone(),
            probe_every: self.probe_every,
            seed: self.seed,
        }
    }

    pub fn avg_victim(&self) -> Result<f64, ConfigError> {
        match self.avg_victim {
            Some(a) => Ok(a),
            None => Ok(self.device.timing(&self.victim_circuit)?.mean),
        }
    }

    /// Rebuilds the victim trace from the attacker's view with the
    /// scenario's counting rule.
    pub fn assemble(&self, view: &AttackerView) -> Result<Trace, TraceError> {
        match self.runs_per_interval {
            Some(k) => assemble_trace_known_count(view, k, self.gap_correction()),
            None => {
                let avg = self.avg_victim().map_err(|e| TraceError::InvalidArgument(e.to_string()))?;
                assemble_trace(view, avg, self.gap_correction())
            }
        }
    }

    pub fn gap_correction(&self) -> f64 {
        self.gap_correction.unwrap_or(self.device.inter_job_gap)
    }

    pub fn uc(&self) -> Result<&UcSection, ConfigError> {
        self.uc.as_ref().ok_or(ConfigError::MissingSection("uc"))
    }

    pub fn table(&self) -> Result<BaselineTable, ConfigError> {
        match self.uc()?.table.as_ref() {
            Some(p) => Ok(BaselineTable::load(self.base_dir.join(p))?),
            None => Ok(BaselineTable::bundled()),
        }
    }

    /// QP reference devices, with the scenario device first when the list
    /// does not already contain a device of that name.
    pub fn qp_devices(&self) -> Result<Vec<DeviceProfile>, ConfigError> {
        let qp = self.qp.as_ref().ok_or(ConfigError::MissingSection("qp"))?;
        let mut devices = qp.devices.clone();
        if !devices.iter().any(|d| d.name == self.device.name) {
            devices.insert(0, self.device.clone());
        }
        Ok(devices)
    }

    pub fn catalog(&self) -> Result<Vec<GroverVariant>, ConfigError> {
        let co = self.co.as_ref().ok_or(ConfigError::MissingSection("co"))?;
        Ok(grover_catalog(&co.calibration)?)
    }
}
