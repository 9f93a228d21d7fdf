use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, BaselineError};
use crate::stats::TimingDistribution;

/// The 26-row benchmark table shipped with the crate.
pub const BUNDLED_TABLE: &str = include_str!("../../data/table1.csv");

const DEFAULT_SIM_VARIANCE: f64 = 0.003;
const DEFAULT_QC_VARIANCE: f64 = 0.3;

/// One benchmark circuit: mean latency on each backend and, optionally, the
/// reference required-measurement counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub name: String,
    /// Seconds.
    #[serde(rename = "sim_latency_s")]
    pub sim_latency: f64,
    /// Seconds.
    #[serde(rename = "qc_latency_s")]
    pub qc_latency: f64,
    pub sim_required: Option<f64>,
    pub qc_required: Option<f64>,
}

impl BaselineEntry {
    pub fn latency(&self, backend: Backend) -> f64 {
        match backend {
            Backend::Simulator => self.sim_latency,
            Backend::Hardware => self.qc_latency,
        }
    }

    pub fn required(&self, backend: Backend) -> Option<f64> {
        match backend {
            Backend::Simulator => self.sim_required,
            Backend::Hardware => self.qc_required,
        }
    }

    pub fn set_required(&mut self, backend: Backend, value: Option<f64>) {
        match backend {
            Backend::Simulator => self.sim_required = value,
            Backend::Hardware => self.qc_required = value,
        }
    }

    fn validate(&self) -> Result<(), BaselineError> {
        let check = |what: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(BaselineError::InvalidValue {
                    name: self.name.clone(),
                    what,
                    value,
                })
            }
        };
        check("simulator latency", self.sim_latency)?;
        check("hardware latency", self.qc_latency)?;
        for (what, req) in [
            ("simulator requirement", self.sim_required),
            ("hardware requirement", self.qc_required),
        ] {
            if let Some(v) = req {
                if !(v >= 1.0) || !v.is_finite() {
                    return Err(BaselineError::InvalidValue {
                        name: self.name.clone(),
                        what,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

/// All benchmark rows plus the per-backend latency variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTable {
    pub entries: Vec<BaselineEntry>,
    /// Seconds².
    pub sim_variance: f64,
    /// Seconds².
    pub qc_variance: f64,
}

impl BaselineTable {
    /// Validated table with the default variances (0.003 s² and 0.3 s²).
    pub fn new(entries: Vec<BaselineEntry>) -> Result<Self, BaselineError> {
        Self::with_variances(entries, DEFAULT_SIM_VARIANCE, DEFAULT_QC_VARIANCE)
    }

    pub fn with_variances(
        entries: Vec<BaselineEntry>,
        sim_variance: f64,
        qc_variance: f64,
    ) -> Result<Self, BaselineError> {
        if entries.is_empty() {
            return Err(BaselineError::Empty);
        }
        let mut seen = HashSet::new();
        for e in &entries {
            e.validate()?;
            if !seen.insert(e.name.as_str()) {
                return Err(BaselineError::Duplicate(e.name.clone()));
            }
        }
        for (what, v) in [("sim_variance", sim_variance), ("qc_variance", qc_variance)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(BaselineError::InvalidParameter(format!(
                    "{what} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            entries,
            sim_variance,
            qc_variance,
        })
    }

    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_TABLE.as_bytes()).expect("bundled table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BaselineError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, BaselineError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let entries = rdr
            .deserialize::<BaselineEntry>()
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries)
    }

    /// Writes the table as CSV. Numbers use the shortest representation that
    /// parses back to the same `f64`, so `load(save(t)) == t`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BaselineError> {
        self.to_writer(std::fs::File::create(path)?)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), BaselineError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "sim_latency_s", "qc_latency_s", "sim_required", "qc_required"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            w.write_record([
                e.name.clone(),
                e.sim_latency.to_string(),
                e.qc_latency.to_string(),
                opt(e.sim_required),
                opt(e.qc_required),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn variance(&self, backend: Backend) -> f64 {
        match backend {
            Backend::Simulator => self.sim_variance,
            Backend::Hardware => self.qc_variance,
        }
    }

    pub fn model(&self, index: usize, backend: Backend) -> TimingDistribution {
        TimingDistribution {
            mean: self.entries[index].latency(backend),
            variance: self.variance(backend),
        }
    }

    pub fn means(&self, backend: Backend) -> Vec<f64> {
        self.entries.iter().map(|e| e.latency(backend)).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    /// Looks a circuit up by exact name, then case-insensitively, then by a
    /// unique case-insensitive substring ("GHZ", "Hidden Shift").
    pub fn find(&self, name: &str) -> Result<usize, BaselineError> {
        if let Some(i) = self.entries.iter().position(|e| e.name == name) {
            return Ok(i);
        }
        let lower = name.to_lowercase();
        if let Some(i) = self
            .entries
            .iter()
            .position(|e| e.name.to_lowercase() == lower)
        {
            return Ok(i);
        }
        let hits: Vec<usize> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.name.to_lowercase().contains(&lower))
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => Ok(*i),
            [] => Err(BaselineError::UnknownEntry(name.to_string())),
            _ => Err(BaselineError::AmbiguousName(name.to_string())),
        }
    }
}
