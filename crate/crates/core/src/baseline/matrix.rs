use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use super::{format_sig, Backend, BaselineError, BaselineTable};
use crate::stats::{ovl, required_sample_size, PowerSpec, TimingDistribution};

/// Per-group measurements needed to tell two circuits apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Requirement {
    /// A circuit compared with itself.
    Undefined,
    /// Identical means: no finite sample separates them.
    Indistinguishable,
    Samples(f64),
}

impl Requirement {
    pub fn samples(self) -> Option<f64> {
        match self {
            Requirement::Samples(n) => Some(n),
            _ => None,
        }
    }

    /// Ordering key: undefined < finite n < indistinguishable.
    fn rank(self) -> f64 {
        match self {
            Requirement::Undefined => f64::NEG_INFINITY,
            Requirement::Samples(n) => n,
            Requirement::Indistinguishable => f64::INFINITY,
        }
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Undefined => Ok(()),
            Requirement::Indistinguishable => f.write_str("inf"),
            Requirement::Samples(n) => f.write_str(&format_sig(*n, 9)),
        }
    }
}

/// Required n for one pair; the common σ is the root mean of the two
/// variances, which is exact for a homoscedastic table.
pub fn pair_requirement(
    p: &TimingDistribution,
    q: &TimingDistribution,
    spec: &PowerSpec,
) -> Result<Requirement, BaselineError> {
    let delta = (p.mean - q.mean).abs();
    if delta == 0.0 {
        return Ok(Requirement::Indistinguishable);
    }
    let sigma = (0.5 * (p.variance + q.variance)).sqrt();
    Ok(Requirement::Samples(required_sample_size(delta / sigma, spec)?))
}

/// Symmetric matrix of pairwise required measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct RequirementMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<Requirement>>,
}

/// Symmetric matrix of pairwise overlapping coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OvlMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<f64>>,
}

fn check_models(labels: &[String], models: &[TimingDistribution]) -> Result<(), BaselineError> {
    if labels.len() != models.len() {
        return Err(BaselineError::InvalidParameter(format!(
            "{} labels for {} models",
            labels.len(),
            models.len()
        )));
    }
    if models.len() < 2 {
        return Err(BaselineError::TooFewEntries(models.len()));
    }
    for m in models {
        m.validate()?;
    }
    Ok(())
}

/// Pairwise required-n matrix over arbitrary timing models.
pub fn requirement_matrix(
    labels: &[String],
    models: &[TimingDistribution],
    spec: &PowerSpec,
) -> Result<RequirementMatrix, BaselineError> {
    check_models(labels, models)?;
    let k = models.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| pair_requirement(&models[i], &models[j], spec))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = vec![vec![Requirement::Undefined; k]; k];
    for (&(i, j), v) in pairs.iter().zip(values) {
        cells[i][j] = v;
        cells[j][i] = v;
    }
    Ok(RequirementMatrix {
        labels: labels.to_vec(),
        cells,
    })
}

/// Pairwise OVL matrix over arbitrary timing models; unit diagonal.
pub fn ovl_matrix(labels: &[String], models: &[TimingDistribution]) -> Result<OvlMatrix, BaselineError> {
    check_models(labels, models)?;
    let cells = models
        .iter()
        .map(|p| models.iter().map(|q| ovl(p, q)).collect())
        .collect();
    Ok(OvlMatrix {
        labels: labels.to_vec(),
        cells,
    })
}

/// Required-n matrix for every pair of table rows on one backend.
pub fn pairwise_matrix(
    table: &BaselineTable,
    backend: Backend,
    spec: &PowerSpec,
) -> Result<RequirementMatrix, BaselineError> {
    let models: Vec<_> = (0..table.len()).map(|i| table.model(i, backend)).collect();
    requirement_matrix(&table.names(), &models, spec)
}

/// The closest-mean other row and the n needed to separate it from `index`.
/// This is the largest entry of the row in the pairwise matrix.
pub fn nearest_neighbor_requirement(
    table: &BaselineTable,
    index: usize,
    backend: Backend,
    spec: &PowerSpec,
) -> Result<(usize, Requirement), BaselineError> {
    if table.len() < 2 {
        return Err(BaselineError::TooFewEntries(table.len()));
    }
    if index >= table.len() {
        return Err(BaselineError::UnknownEntry(format!("row {index}")));
    }
    let mean = table.entries[index].latency(backend);
    let neighbor = (0..table.len())
        .filter(|&j| j != index)
        .min_by(|&a, &b| {
            let da = (table.entries[a].latency(backend) - mean).abs();
            let db = (table.entries[b].latency(backend) - mean).abs();
            da.total_cmp(&db)
        })
        .expect("at least one other row");
    let req = pair_requirement(
        &table.model(index, backend),
        &table.model(neighbor, backend),
        spec,
    )?;
    Ok((neighbor, req))
}

impl RequirementMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Largest finite off-diagonal entry of row `i`.
    pub fn row_max(&self, i: usize) -> Requirement {
        self.cells[i]
            .iter()
            .copied()
            .max_by(|a, b| a.rank().total_cmp(&b.rank()))
            .unwrap_or(Requirement::Undefined)
    }

    /// CSV with a header row and a label column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BaselineError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.cells) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl OvlMatrix {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BaselineError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.cells) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| format_sig(*c, 9)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Long-form `i,j,ovl,required_n` export (1-based indices) for plotting.
pub fn write_long_form<W: Write>(
    writer: W,
    ovl: &OvlMatrix,
    req: &RequirementMatrix,
) -> Result<(), BaselineError> {
    if ovl.labels.len() != req.labels.len() {
        return Err(BaselineError::InvalidParameter(
            "OVL and requirement matrices differ in size".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "ovl", "required_n"])?;
    for i in 0..req.len() {
        for j in 0..req.len() {
            w.write_record([
                (i + 1).to_string(),
                (j + 1).to_string(),
                format_sig(ovl.cells[i][j], 9),
                req.cells[i][j].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
