//! The five timing attacks as decision procedures over reconstructed traces.
//!
//! * UC: which benchmark circuit did the victim run (nearest table mean)?
//! * CO: which Grover oracle key and iteration count?
//! * CA / QM: can two parameter sets or qubit mappings be told apart? These
//!   are negative results; the test is the DoM null check.
//! * QP: which processor ran the job (DoM against each device's model)?
//!
//! Attacks work on the independent observations of a trace (one value per
//! probe interval), see [`crate::trace::Trace::samples`].

mod co;
mod harness;
mod null;
mod uc;

pub use co::{co_identify, CoIdentifier, CoOutcome};
pub use harness::{
    co_iteration_accuracy, null_false_positive_rate, qp_crossing_rate, uc_accuracy, SeedStream,
};
pub use null::{null_distinguishability, qp_fingerprint, NullOutcome, QpOutcome, TAIL_FRACTION};
pub use uc::{detect_backend, uc_classify, UcClassifier, AMBIGUITY_EPS};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{format_sig, BaselineError};
use crate::cloudsim::SimError;
use crate::stats::StatsError;
use crate::trace::TraceError;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("Grover catalog must have 24 variants, got {0}")]
    CatalogSize(usize),
    #[error("need at least 2 device profiles, got {0}")]
    TooFewDevices(usize),
    #[error("unknown attack {0:?} (expected uc, co, ca, qm or qp)")]
    UnknownAttack(String),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Uc,
    Co,
    Ca,
    Qm,
    Qp,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Uc => "UC",
            AttackKind::Co => "CO",
            AttackKind::Ca => "CA",
            AttackKind::Qm => "QM",
            AttackKind::Qp => "QP",
        })
    }
}

impl FromStr for AttackKind {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uc" => Ok(AttackKind::Uc),
            "co" => Ok(AttackKind::Co),
            "ca" => Ok(AttackKind::Ca),
            "qm" => Ok(AttackKind::Qm),
            "qp" => Ok(AttackKind::Qp),
            _ => Err(AttackError::UnknownAttack(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    /// The trace reached the planned size and one label won.
    Identified,
    /// A label won but the trace is shorter than the plan.
    UnderPowered,
    /// CO only: the iteration count is settled, the key is not.
    IterationOnly,
    /// Two candidates are equally close.
    Ambiguous,
    Distinguishable,
    Indistinguishable,
    /// QP only: every candidate device was rejected.
    NoMatch,
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictStatus::Identified => "identified",
            VerdictStatus::UnderPowered => "under-powered",
            VerdictStatus::IterationOnly => "iteration-only",
            VerdictStatus::Ambiguous => "ambiguous",
            VerdictStatus::Distinguishable => "distinguishable",
            VerdictStatus::Indistinguishable => "indistinguishable",
            VerdictStatus::NoMatch => "no-match",
        })
    }
}

pub const INDISTINGUISHABLE: &str = "indistinguishable";

/// Outcome of one attack run.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackVerdict {
    pub attack: AttackKind,
    pub label: String,
    pub status: VerdictStatus,
    pub measurements_used: usize,
    /// t-score against the chosen model, or the DoM crossing index.
    pub statistic: f64,
    /// Per-group n from power analysis, when the attack plans one.
    pub planned_n: Option<f64>,
    /// Achieved power (UC, CO, backend detection) or the band confidence
    /// (CA, QM, QP).
    pub confidence: f64,
}

impl AttackVerdict {
    pub const CSV_HEADER: [&'static str; 7] = [
        "attack",
        "label",
        "status",
        "measurements_used",
        "statistic",
        "planned_n",
        "confidence",
    ];

    pub fn csv_record(&self) -> [String; 7] {
        [
            self.attack.to_string(),
            self.label.clone(),
            self.status.to_string(),
            self.measurements_used.to_string(),
            format_sig(self.statistic, 9),
            self.planned_n.map(|n| format_sig(n, 9)).unwrap_or_default(),
            format_sig(self.confidence, 9),
        ]
    }
}

pub fn write_verdicts<W: Write>(writer: W, verdicts: &[AttackVerdict]) -> Result<(), AttackError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(AttackVerdict::CSV_HEADER)?;
    for v in verdicts {
        w.write_record(v.csv_record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub(crate) fn mean_of(samples: &[f64]) -> Result<f64, AttackError> {
    if samples.is_empty() {
        return Err(AttackError::EmptyTrace);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Indices of the smallest and second-smallest |mean − x|.
pub(crate) fn two_nearest(means: &[f64], x: f64) -> (usize, Option<usize>) {
    let mut best = 0;
    let mut second: Option<usize> = None;
    for i in 1..means.len() {
        let d = (means[i] - x).abs();
        if d < (means[best] - x).abs() {
            second = Some(best);
            best = i;
        } else if second.is_none_or(|s| d < (means[s] - x).abs()) {
            second = Some(i);
        }
    }
    (best, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_pair() {
        let m = [1.0, 5.0, 2.0, 4.0];
        assert_eq!(two_nearest(&m, 4.4), (3, Some(1)));
        assert_eq!(two_nearest(&m, 0.0), (0, Some(2)));
        assert_eq!(two_nearest(&[3.0], 0.0), (0, None));
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("QP".parse::<AttackKind>().unwrap(), AttackKind::Qp);
        assert!("xx".parse::<AttackKind>().is_err());
        assert_eq!(AttackKind::Ca.to_string(), "CA");
    }

    #[test]
    fn verdict_csv() {
        let v = AttackVerdict {
            attack: AttackKind::Uc,
            label: "GHZ".into(),
            status: VerdictStatus::Identified,
            measurements_used: 2496,
            statistic: 0.25,
            planned_n: Some(2495.773010),
            confidence: 0.8,
        };
        let mut buf = Vec::new();
        write_verdicts(&mut buf, &[v]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "attack,label,status,measurements_used,statistic,planned_n,confidence\n\
             UC,GHZ,identified,2496,0.25,2495.77301,0.8\n"
        );
    }
}
