//! Command-line front end. CSV goes to stdout, diagnostics to stderr.
//!
//! Exit codes: 0 success, 1 a reproduced value is out of tolerance, 2 usage
//! or input error.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::attacks::{
    co_identify, null_distinguishability, qp_fingerprint, uc_classify, write_verdicts, AttackError,
    AttackKind,
};
use crate::baseline::{
    format_sig, grover_catalog, nearest_neighbor_requirement, ovl_matrix, requirement_matrix,
    write_long_form, Backend, BaselineError, BaselineTable, GroverCalibration, Requirement,
};
use crate::cloudsim::{run_simulation, Scenario, SimError};
use crate::config::{ConfigError, ScenarioConfig};
use crate::mitigations::{evaluate, write_reports, EvalContext, MitigationError};
use crate::stats::{
    lehr_sample_size, mc_power_oracle, normal_approx_sample_size, required_sample_size, DomPoint,
    PowerSpec, StatsError, TimingDistribution,
};
use crate::trace::{AttackerView, Trace, TraceError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Mitigation(#[from] MitigationError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Stdout(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Parser)]
#[command(name = "qleak", version, about = "Timing side-channel analysis for cloud quantum workloads")]
pub struct Cli {
    /// Worker threads for seeded batch work (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct PowerArgs {
    /// Two-sided significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Target power.
    #[arg(long, default_value_t = 0.80)]
    pub power: f64,
}

impl PowerArgs {
    fn spec(self) -> Result<PowerSpec, CliError> {
        Ok(PowerSpec::new(self.alpha, self.power)?)
    }
}

#[derive(Debug, Args, Clone)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, env = "QLEAK_SEED")]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = ScenarioConfig::load(&self.scenario)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the cloud queue simulation and print the job log.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also write joblog.csv and trace.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Simulate the scenario, rebuild the victim trace and run one attack.
    Attack {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        attack: AttackKind,
        #[command(flatten)]
        power: PowerArgs,
        /// Also write the trace and the DoM / OVL data here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Recompute the required-measurement columns of a baseline table.
    ReproduceTable {
        /// Baseline CSV; the bundled table if absent.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Only this column (sim or qc); both if absent.
        #[arg(long)]
        backend: Option<Backend>,
        #[command(flatten)]
        power: PowerArgs,
    },
    /// Pairwise OVL and required-n matrices in long form.
    Matrix {
        #[arg(long, conflicts_with = "grover")]
        table: Option<PathBuf>,
        #[arg(long, default_value = "sim")]
        backend: Backend,
        /// Use the 24-variant Grover catalog instead of a table.
        #[arg(long)]
        grover: bool,
        /// Scenario whose [co] calibration defines the catalog.
        #[arg(long, requires = "grover")]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        power: PowerArgs,
        /// Also write square ovl.csv and required.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Per-group sample size for an effect size.
    Power {
        /// Effect size; alternatively give --mu1, --mu2 and --variance.
        #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["mu1", "mu2", "variance"])]
        d: Option<f64>,
        #[arg(long, requires_all = ["mu2", "variance"])]
        mu1: Option<f64>,
        #[arg(long)]
        mu2: Option<f64>,
        /// Common variance, seconds².
        #[arg(long)]
        variance: Option<f64>,
        #[command(flatten)]
        power: PowerArgs,
        /// Check the t-exact n by Monte-Carlo.
        #[arg(long)]
        mc_check: bool,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, env = "QLEAK_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Measure how much each mitigation in the scenario raises the attack cost.
    Mitigate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        attack: AttackKind,
        #[command(flatten)]
        power: PowerArgs,
        /// Monte-Carlo runs per accuracy estimate; the scenario value if absent.
        #[arg(long)]
        runs: Option<usize>,
    },
}

/// One row of a table reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproRow {
    pub name: String,
    pub backend: Backend,
    pub neighbor: String,
    pub printed: Option<f64>,
    pub recomputed: Requirement,
    pub rel_error: Option<f64>,
    pub within: bool,
}

/// Allowed relative error for a printed value: exact for the floor value 1,
/// 2% from 100 up, 15% below.
pub fn tolerance(printed: f64) -> f64 {
    if printed == 1.0 {
        0.0
    } else if printed >= 100.0 {
        0.02
    } else {
        0.15
    }
}

pub fn reproduce_table(
    table: &BaselineTable,
    backend: Backend,
    spec: &PowerSpec,
) -> Result<Vec<ReproRow>, CliError> {
    (0..table.len())
        .map(|i| {
            let (j, recomputed) = nearest_neighbor_requirement(table, i, backend, spec)?;
            let printed = table.entries[i].required(backend);
            let rel_error = match (printed, recomputed.samples()) {
                (Some(p), Some(r)) => Some((r - p).abs() / p),
                _ => None,
            };
            let within = match (printed, rel_error) {
                (None, _) => true,
                (Some(p), Some(e)) => e <= tolerance(p),
                (Some(_), None) => false,
            };
            Ok(ReproRow {
                name: table.entries[i].name.clone(),
                backend,
                neighbor: table.entries[j].name.clone(),
                printed,
                recomputed,
                rel_error,
                within,
            })
        })
        .collect()
}

fn out_file(dir: &Path, name: &str) -> Result<File, CliError> {
    let path = dir.join(name);
    File::create(&path).map_err(|source| CliError::Io { path, source })
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_dom<W: Write>(writer: W, series: &[DomPoint]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "dom", "band", "exceeds"])?;
    for p in series {
        w.write_record([
            p.n.to_string(),
            format_sig(p.dom, 9),
            format_sig(p.band, 9),
            p.exceeds().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn victim_trace(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<Trace, CliError> {
    let log = run_simulation(scenario)?;
    let view = AttackerView::from_log(&log)?;
    Ok(cfg.assemble(&view)?)
}

/// Runs one parsed command, writing CSV to `out`. Returns the exit code.
pub fn run<W: Write>(cli: Cli, out: &mut W, err: &mut dyn Write) -> Result<u8, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // A pool that is already set up (e.g. by an earlier call) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match cli.command {
        Command::Simulate { scenario, out_dir } => {
            let cfg = scenario.load()?;
            let sc = cfg.scenario();
            let log = run_simulation(&sc)?;
            log.write_csv(&mut *out)?;
            if log.truncated > 0 {
                writeln!(err, "{} durations were clamped to the floor", log.truncated)?;
            }
            if let Some(dir) = out_dir {
                make_dir(&dir)?;
                log.write_csv(out_file(&dir, "joblog.csv")?)?;
                let trace = cfg.assemble(&AttackerView::from_log(&log)?)?;
                trace.write_csv(out_file(&dir, "trace.csv")?)?;
            }
            Ok(0)
        }
        Command::Attack {
            scenario,
            attack,
            power,
            out_dir,
        } => {
            let spec = power.spec()?;
            let cfg = scenario.load()?;
            let sc = cfg.scenario();
            let trace = victim_trace(&cfg, &sc)?;
            if trace.is_empty() {
                return Err(AttackError::EmptyTrace.into());
            }
            if trace.dropped > 0 {
                writeln!(err, "{} intervals dropped after gap correction", trace.dropped)?;
            }
            if let Some(dir) = &out_dir {
                make_dir(dir)?;
                trace.write_csv(out_file(dir, "trace.csv")?)?;
            }
            let samples = trace.samples();
            let verdict = match attack {
                AttackKind::Uc => {
                    let uc = cfg.uc()?;
                    uc_classify(samples, &cfg.table()?, uc.backend, &spec)?
                }
                AttackKind::Co => {
                    let out = co_identify(samples, &cfg.catalog()?, &spec)?;
                    if let Some(dir) = &out_dir {
                        out.ovl.write_csv(out_file(dir, "co_ovl.csv")?)?;
                        out.required.write_csv(out_file(dir, "co_required.csv")?)?;
                        write_long_form(out_file(dir, "co_long.csv")?, &out.ovl, &out.required)?;
                    }
                    out.verdict
                }
                AttackKind::Ca | AttackKind::Qm => {
                    let null = cfg.null.clone().unwrap_or_default();
                    let mut other = sc.clone();
                    if let Some(c) = null.circuit_b {
                        other.victim_circuit = c;
                    }
                    other.seed = sc.seed.wrapping_add(1);
                    other.validate()?;
                    let trace_b = victim_trace(&cfg, &other)?;
                    let outcome = null_distinguishability(samples, trace_b.samples(), cfg.confidence)?;
                    if let Some(dir) = &out_dir {
                        write_dom(out_file(dir, "dom.csv")?, &outcome.series)?;
                    }
                    outcome.to_verdict(attack)
                }
                AttackKind::Qp => {
                    let devices = cfg.qp_devices()?;
                    let out = qp_fingerprint(samples, &devices, &cfg.victim_circuit, cfg.confidence)?;
                    if let Some(dir) = &out_dir {
                        for (name, series, _, _) in &out.devices {
                            let file = format!("dom_{}.csv", file_stem(name));
                            write_dom(out_file(dir, &file)?, series)?;
                        }
                    }
                    out.verdict
                }
            };
            write_verdicts(&mut *out, &[verdict])?;
            Ok(0)
        }
        Command::ReproduceTable {
            table,
            backend,
            power,
        } => {
            let spec = power.spec()?;
            let table = match table {
                Some(p) => BaselineTable::load(p)?,
                None => BaselineTable::bundled(),
            };
            let backends = match backend {
                Some(b) => vec![b],
                None => Backend::ALL.to_vec(),
            };
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record([
                "name",
                "backend",
                "nearest",
                "printed_n",
                "recomputed_n",
                "rel_error",
                "within_tolerance",
            ])?;
            let mut failures = 0;
            for b in backends {
                for row in reproduce_table(&table, b, &spec)? {
                    if !row.within {
                        failures += 1;
                    }
                    w.write_record([
                        row.name.clone(),
                        row.backend.short().to_string(),
                        row.neighbor.clone(),
                        row.printed.map(|p| p.to_string()).unwrap_or_default(),
                        row.recomputed.to_string(),
                        row.rel_error.map(|e| format_sig(e, 6)).unwrap_or_default(),
                        row.within.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            if failures > 0 {
                writeln!(err, "{failures} rows outside tolerance")?;
                return Ok(1);
            }
            Ok(0)
        }
        Command::Matrix {
            table,
            backend,
            grover,
            scenario,
            power,
            out_dir,
        } => {
            let spec = power.spec()?;
            let (labels, models): (Vec<String>, Vec<TimingDistribution>) = if grover {
                let cal = match scenario {
                    Some(p) => ScenarioConfig::load(p)?
                        .co
                        .map(|c| c.calibration)
                        .unwrap_or_default(),
                    None => GroverCalibration::default(),
                };
                grover_catalog(&cal)?
                    .into_iter()
                    .map(|v| (v.to_string(), v.timing))
                    .unzip()
            } else {
                let t = match table {
                    Some(p) => BaselineTable::load(p)?,
                    None => BaselineTable::bundled(),
                };
                (t.names(), (0..t.len()).map(|i| t.model(i, backend)).collect())
            };
            let ovl = ovl_matrix(&labels, &models)?;
            let req = requirement_matrix(&labels, &models, &spec)?;
            write_long_form(&mut *out, &ovl, &req)?;
            if let Some(dir) = out_dir {
                make_dir(&dir)?;
                ovl.write_csv(out_file(&dir, "ovl.csv")?)?;
                req.write_csv(out_file(&dir, "required.csv")?)?;
            }
            Ok(0)
        }
        Command::Power {
            d,
            mu1,
            mu2,
            variance,
            power,
            mc_check,
            trials,
            seed,
        } => {
            let spec = power.spec()?;
            let d = match (d, mu1, mu2, variance) {
                (Some(d), ..) => d,
                (None, Some(a), Some(b), Some(v)) => {
                    if !(v > 0.0) {
                        return Err(CliError::Usage(format!("variance must be positive, got {v}")));
                    }
                    (a - b).abs() / v.sqrt()
                }
                _ => return Err(CliError::Usage("give --d or all of --mu1, --mu2, --variance".into())),
            };
            let exact = required_sample_size(d, &spec)?;
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(["method", "value"])?;
            w.write_record(["effect-size", &format_sig(d, 9)])?;
            w.write_record(["t-exact", &format_sig(exact, 9)])?;
            w.write_record(["normal-approx", &format_sig(normal_approx_sample_size(d, &spec)?, 9)])?;
            w.write_record(["lehr", &format_sig(lehr_sample_size(d)?, 9)])?;
            if mc_check {
                let n = (exact.ceil() as usize).max(2);
                let p = TimingDistribution::new(0.0, 1.0)?;
                let q = TimingDistribution::new(d, 1.0)?;
                let emp = mc_power_oracle(&p, &q, n, &spec, trials, seed)?;
                w.write_record(["mc-power", &format_sig(emp, 9)])?;
            }
            w.flush()?;
            Ok(0)
        }
        Command::Mitigate {
            scenario,
            attack,
            power,
            runs,
        } => {
            let spec = power.spec()?;
            let cfg = scenario.load()?;
            if cfg.mitigations.is_empty() {
                return Err(CliError::Usage("scenario lists no [[mitigations]]".into()));
            }
            let ctx = EvalContext {
                scenario: cfg.scenario(),
                table: cfg.uc.as_ref().map(|_| cfg.table()).transpose()?,
                backend: cfg.uc.as_ref().map_or(Backend::Simulator, |u| u.backend),
                devices: if cfg.qp.is_some() { cfg.qp_devices()? } else { vec![] },
                catalog: if cfg.co.is_some() { cfg.catalog()? } else { vec![] },
                victim_variant: cfg.co.as_ref().map_or(0, |c| c.variant),
                avg_victim: cfg.avg_victim()?,
                runs_per_interval: cfg.runs_per_interval,
                runs: runs.unwrap_or(cfg.runs),
                confidence: cfg.confidence,
            };
            let reports = cfg
                .mitigations
                .iter()
                .map(|m| evaluate(m, &ctx, attack, &spec))
                .collect::<Result<Vec<_>, _>>()?;
            write_reports(&mut *out, &reports)?;
            Ok(0)
        }
    }
}

/// Parses `args`, runs the command and maps errors to exit code 2.
pub fn main_with<I, T>(args: I, out: &mut impl Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(err, "{}", e.render());
            if !e.use_stderr() {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    match run(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}
