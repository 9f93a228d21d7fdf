use super::{AttackError, AttackKind, AttackVerdict, VerdictStatus, INDISTINGUISHABLE};
use crate::cloudsim::DeviceProfile;
use crate::stats::{dom_series, dom_series_against_model, first_crossing, DomPoint};

/// Share of the DoM series, counted from the end, that must lie outside the
/// band for a persistent separation.
pub const TAIL_FRACTION: f64 = 0.10;

/// True when every point of the final `TAIL_FRACTION` of the series exceeds
/// its band.
fn tail_exceeds(series: &[DomPoint]) -> bool {
    if series.is_empty() {
        return false;
    }
    let tail = ((series.len() as f64 * TAIL_FRACTION).ceil() as usize).max(1);
    series[series.len() - tail..].iter().all(DomPoint::exceeds)
}

#[derive(Debug, Clone)]
pub struct NullOutcome {
    pub distinguishable: bool,
    pub series: Vec<DomPoint>,
    pub confidence: f64,
}

impl NullOutcome {
    /// Nominal false-positive level of the test.
    pub fn calibrated_level(&self) -> f64 {
        1.0 - self.confidence
    }

    pub fn to_verdict(&self, attack: AttackKind) -> AttackVerdict {
        let last = self.series.last().copied();
        let (label, status) = if self.distinguishable {
            ("distinguishable", VerdictStatus::Distinguishable)
        } else {
            (INDISTINGUISHABLE, VerdictStatus::Indistinguishable)
        };
        AttackVerdict {
            attack,
            label: label.into(),
            status,
            measurements_used: last.map_or(1, |p| p.n),
            statistic: last.map_or(0.0, |p| if p.band > 0.0 { p.dom.abs() / p.band } else { 0.0 }),
            planned_n: None,
            confidence: self.confidence,
        }
    }
}

/// DoM null check between two traces, truncated to the shorter one. The
/// pair is distinguishable only if the final 10% of the series stays
/// outside the confidence band.
pub fn null_distinguishability(
    trace_a: &[f64],
    trace_b: &[f64],
    confidence: f64,
) -> Result<NullOutcome, AttackError> {
    let len = trace_a.len().min(trace_b.len());
    if len < 2 {
        return Err(AttackError::TooShort { needed: 2, got: len });
    }
    let series = dom_series(&trace_a[..len], &trace_b[..len], confidence)?;
    Ok(NullOutcome {
        distinguishable: tail_exceeds(&series),
        series,
        confidence,
    })
}

#[derive(Debug, Clone)]
pub struct QpOutcome {
    pub verdict: AttackVerdict,
    /// Device name, DoM series against its model, first crossing, rejected.
    pub devices: Vec<(String, Vec<DomPoint>, Option<usize>, bool)>,
}

/// Processor fingerprinting: the trace is compared with each device's model
/// of `circuit`. A device is rejected when the final 10% of its DoM series
/// lies outside the band; the survivor, if unique, is the label.
///
/// `measurements_used` is the largest first-crossing index among rejected
/// devices, i.e. the trace length at which every wrong device had left the
/// band.
pub fn qp_fingerprint(
    samples: &[f64],
    devices: &[DeviceProfile],
    circuit: &str,
    confidence: f64,
) -> Result<QpOutcome, AttackError> {
    if devices.len() < 2 {
        return Err(AttackError::TooFewDevices(devices.len()));
    }
    if samples.len() < 2 {
        return Err(AttackError::TooShort {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut rows = Vec::with_capacity(devices.len());
    for device in devices {
        let model = device.timing(circuit)?;
        let series = dom_series_against_model(samples, model, confidence)?;
        let crossing = first_crossing(&series);
        let rejected = tail_exceeds(&series);
        rows.push((device.name.clone(), series, crossing, rejected));
    }
    let survivors: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].3).collect();
    let (label, status) = match survivors.as_slice() {
        [i] => (rows[*i].0.clone(), VerdictStatus::Identified),
        [] => (INDISTINGUISHABLE.to_string(), VerdictStatus::NoMatch),
        _ => (INDISTINGUISHABLE.to_string(), VerdictStatus::Ambiguous),
    };
    let crossing = rows
        .iter()
        .filter(|r| r.3)
        .filter_map(|r| r.2)
        .max();
    let verdict = AttackVerdict {
        attack: AttackKind::Qp,
        label,
        status,
        measurements_used: crossing.unwrap_or(samples.len()),
        statistic: crossing.map_or(0.0, |c| c as f64),
        planned_n: None,
        confidence,
    };
    Ok(QpOutcome {
        verdict,
        devices: rows,
    })
}
