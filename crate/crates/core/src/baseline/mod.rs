//! Benchmark latency database and the pairwise required-measurement matrices
//! derived from it.
//!
//! A [`BaselineTable`] holds one mean latency per circuit and per backend,
//! plus one common variance per backend. Every circuit on a backend is
//! modelled as `N(latency, variance)`.

mod grover;
mod matrix;
mod table;

pub use grover::{grover_catalog, GroverCalibration, GroverVariant};
pub use matrix::{
    nearest_neighbor_requirement, ovl_matrix, pair_requirement, pairwise_matrix, requirement_matrix,
    write_long_form, OvlMatrix, Requirement, RequirementMatrix,
};
pub use table::{BaselineEntry, BaselineTable, BUNDLED_TABLE};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("table has no rows")]
    Empty,
    #[error("duplicate circuit name {0:?}")]
    Duplicate(String),
    #[error("circuit {name:?}: {what} must be positive and finite, got {value}")]
    InvalidValue {
        name: String,
        what: &'static str,
        value: f64,
    },
    #[error("need at least 2 entries, got {0}")]
    TooFewEntries(usize),
    #[error("unknown circuit {0:?}")]
    UnknownEntry(String),
    #[error("circuit name {0:?} matches several entries")]
    AmbiguousName(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Which latency column of the table a trace is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[serde(alias = "sim")]
    Simulator,
    #[serde(alias = "qc", alias = "hw")]
    Hardware,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Simulator, Backend::Hardware];

    pub fn short(self) -> &'static str {
        match self {
            Backend::Simulator => "sim",
            Backend::Hardware => "qc",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Simulator => "simulator",
            Backend::Hardware => "hardware",
        })
    }
}

impl FromStr for Backend {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sim" | "simulator" => Ok(Backend::Simulator),
            "qc" | "hw" | "hardware" => Ok(Backend::Hardware),
            other => Err(BaselineError::InvalidParameter(format!(
                "unknown backend {other:?} (expected sim or qc)"
            ))),
        }
    }
}

/// Formats `x` with `digits` significant digits, trimming trailing zeros.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_parsing() {
        assert_eq!("sim".parse::<Backend>().unwrap(), Backend::Simulator);
        assert_eq!("QC".parse::<Backend>().unwrap(), Backend::Hardware);
        assert_eq!("hardware".parse::<Backend>().unwrap(), Backend::Hardware);
        assert!("gpu".parse::<Backend>().is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(2495.7730102, 9), "2495.77301");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(0.000356, 9), "0.000356");
        assert_eq!(format_sig(188580.99361, 9), "188580.994");
        assert_eq!(format_sig(1.5e20, 3), "1.50e20");
    }
}
