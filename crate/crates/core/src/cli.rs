//! Batch front end: parameter sweeps written as CSV or JSON, and the
//! verification suite. The `pbt` binary only forwards its arguments here.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::closedform::{
    beigi_konig_bound, f_ih, fidelity_noiseless_povm, helstrom_bound_n2, kim_fidelity,
    knill_barnum_bound, spin_block_spectrum, teleport_fidelity,
};
use crate::ensemble::{DephasingParams, SignalEnsemble};
use crate::fidelity::{
    ent_fidelity, helstrom_optimal_n2, mixed_term, pgm_fidelity,
};
use crate::linops::{eigenvalues, state_fidelity, trace_norm, HermitianOp, DEFAULT_RANK_TOL};
use crate::povm::{noiseless_povm, pgm, pgm_taylor, random_povm, Povm};
use crate::spinboson::{chi, decoherence_factor, phase, SpinBosonParams};

/// Default ceiling on `N` for anything that builds dense operators.
pub const DEFAULT_MAX_N: usize = 12;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Compute(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Compute(crate::Error::Domain(_)) => 1,
            CliError::Compute(crate::Error::Numerical { .. }) => 3,
        }
    }
}

fn config<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

/// Inclusive linear grid `min, min + h, ..., max` with `count` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn single(x: f64) -> Self {
        Self {
            min: x,
            max: x,
            count: 1,
        }
    }

    pub fn new(min: f64, max: f64, count: usize) -> Result<Self, CliError> {
        if count == 0 {
            return config("grid count must be at least 1");
        }
        if !(min.is_finite() && max.is_finite()) || min > max {
            return config(format!("grid bounds {min}, {max} are invalid"));
        }
        if count == 1 && min != max {
            return config("a one-point grid needs min == max");
        }
        Ok(Self { min, max, count })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + h * i as f64
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = CliError;

    /// `x` or `min,max,count`; `pi` is accepted as a number.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let num = |t: &str| -> Result<f64, CliError> {
            let t = t.trim();
            match t {
                "pi" => Ok(std::f64::consts::PI),
                "2pi" => Ok(std::f64::consts::TAU),
                _ => t
                    .parse()
                    .map_err(|_| CliError::Config(format!("'{t}' is not a number"))),
            }
        };
        let parts: Vec<&str> = s.split(',').collect();
        match parts.as_slice() {
            [x] => Ok(Grid::single(num(x)?)),
            [a, b, c] => {
                let count = c
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("'{c}' is not a count")))?;
                Grid::new(num(a)?, num(b)?, count)
            }
            _ => config(format!("'{s}' is neither a value nor min,max,count")),
        }
    }
}

/// `9`, `2,5,9`, or the inclusive range `1-20`.
pub fn parse_ports(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Config(format!("'{s}' is not a port count, list or range"));
    let out: Vec<usize> = if let Some((a, b)) = s.split_once('-') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("'{t}' is not a number")))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PovmMode {
    Noiseless,
    #[value(name = "noise_adapted", alias = "noise-adapted")]
    NoiseAdapted,
    Taylor,
}

impl PovmMode {
    fn name(self) -> &'static str {
        match self {
            PovmMode::Noiseless => "noiseless",
            PovmMode::NoiseAdapted => "noise_adapted",
            PovmMode::Taylor => "taylor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Surface,
    VsN,
    Compare,
    Spinboson,
    Verify,
}

#[derive(Parser, Debug)]
#[command(name = "pbt", version, about = "Port-based teleportation under pure dephasing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Command {
    /// Fidelity of the ideal measurement over a (|Gamma|, theta) grid.
    Surface,
    /// Fidelity against the number of ports.
    VsN,
    /// Ideal versus noise-adapted measurement at theta = 0, with bounds.
    Compare,
    /// Time-dependent fidelity for the spin-boson decoherence factor.
    Spinboson,
    /// Run the invariant suites and emit a JSON report.
    Verify,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Port count: `9`, `2,5,9` or `1-20`.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// |Gamma| grid: `x` or `min,max,count`.
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    /// theta grid in radians: `x` or `min,max,count` (`pi` allowed).
    #[arg(long, global = true)]
    pub theta: Option<String>,
    /// Dimensionless time grid.
    #[arg(long, global = true)]
    pub tau: Option<String>,
    /// Ohmicity exponents, comma separated.
    #[arg(long, global = true)]
    pub s: Option<String>,
    /// Temperature over cutoff, comma separated.
    #[arg(long = "temp-ratio", global = true)]
    pub temp_ratio: Option<String>,
    /// Dimensionless pair separation.
    #[arg(long, global = true)]
    pub ell: Option<f64>,
    /// Measurements to evaluate numerically.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub povm: Option<Vec<PovmMode>>,
    /// Truncation order of the series inverse square root.
    #[arg(long, global = true, default_value_t = 4000)]
    pub order: usize,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Omit the `# generated_unix=` line.
    #[arg(long = "no-timestamp", global = true)]
    pub no_timestamp: bool,
    /// Raise the port ceiling for dense computations.
    #[arg(long = "max-n-override", global = true)]
    pub max_n_override: Option<usize>,
    /// Seed for randomized control checks.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Corrupt one POVM inside `verify` so that it must fail.
    #[arg(long = "inject-fault", global = true, hide = true)]
    pub inject_fault: bool,
}

/// Fully resolved sweep settings, echoed into every JSON output.
#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    pub command: CommandKind,
    pub n_ports: Vec<usize>,
    pub gamma_grid: Grid,
    pub theta_grid: Grid,
    pub tau_grid: Grid,
    pub ohmicity: Vec<f64>,
    pub temperature_ratio: Vec<f64>,
    pub separation: f64,
    pub povm_modes: Vec<PovmMode>,
    pub taylor_order: usize,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
    pub threads: Option<usize>,
    pub timestamp: bool,
    pub max_n: usize,
    #[serde(skip)]
    pub inject_fault: bool,
}

impl SweepConfig {
    /// Applies per-command defaults and validates everything up front.
    pub fn resolve(command: Command, o: &Options) -> Result<Self, CliError> {
        let kind = match command {
            Command::Surface => CommandKind::Surface,
            Command::VsN => CommandKind::VsN,
            Command::Compare => CommandKind::Compare,
            Command::Spinboson => CommandKind::Spinboson,
            Command::Verify => CommandKind::Verify,
        };
        let grid = |v: &Option<String>, default: &str| -> Result<Grid, CliError> {
            v.as_deref().unwrap_or(default).parse()
        };
        let (n_default, gamma_default, theta_default, modes_default): (_, _, _, &[PovmMode]) =
            match kind {
                CommandKind::Surface => ("9", "0,1,101", "0,pi,101", &[]),
                CommandKind::VsN => ("1-20", "1", "0", &[]),
                CommandKind::Compare => ("2,5,9", "0,1,51", "0", &[PovmMode::Noiseless, PovmMode::NoiseAdapted]),
                CommandKind::Spinboson => ("9", "1", "0", &[PovmMode::Noiseless]),
                CommandKind::Verify => ("2-4", "0,1,3", "0,pi,3", &[]),
            };
        let cfg = Self {
            command: kind,
            n_ports: parse_ports(o.n.as_deref().unwrap_or(n_default))?,
            gamma_grid: grid(&o.gamma, gamma_default)?,
            theta_grid: grid(&o.theta, theta_default)?,
            tau_grid: grid(&o.tau, "0,8,81")?,
            ohmicity: parse_list(o.s.as_deref().unwrap_or("2"))?,
            temperature_ratio: parse_list(o.temp_ratio.as_deref().unwrap_or("0.1,0.9"))?,
            separation: o.ell.unwrap_or(3.0),
            povm_modes: o.povm.clone().unwrap_or_else(|| modes_default.to_vec()),
            taylor_order: o.order,
            output_path: o.out.clone(),
            format: o.format,
            seed: o.seed,
            threads: o.threads,
            timestamp: !o.no_timestamp,
            max_n: o.max_n_override.unwrap_or(DEFAULT_MAX_N),
            inject_fault: o.inject_fault,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn needs_dense(&self) -> bool {
        match self.command {
            CommandKind::Surface | CommandKind::VsN => !self.povm_modes.is_empty(),
            CommandKind::Spinboson => self.povm_modes.iter().any(|m| *m != PovmMode::Noiseless),
            CommandKind::Compare | CommandKind::Verify => true,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let g = self.gamma_grid;
        if g.min < 0.0 || g.max > 1.0 {
            return config("|Gamma| grid must lie in [0, 1]");
        }
        if self.tau_grid.min < 0.0 {
            return config("tau grid must be non-negative");
        }
        if self.threads == Some(0) {
            return config("--threads must be positive");
        }
        if self.needs_dense() {
            if let Some(&n) = self.n_ports.iter().find(|&&n| n > self.max_n) {
                return config(format!(
                    "N = {n} exceeds the dense-operator cap {}; pass --max-n-override to raise it",
                    self.max_n
                ));
            }
        }
        match self.command {
            CommandKind::Surface if self.n_ports.len() != 1 => {
                config("surface takes a single port count")
            }
            CommandKind::Compare if self.theta_grid != Grid::single(0.0) => {
                config("compare is defined at theta = 0 only")
            }
            CommandKind::Spinboson => {
                if self.ohmicity.iter().any(|&s| !(s > 1.0)) {
                    return config("ohmicity must exceed 1");
                }
                if self.temperature_ratio.iter().any(|&t| !(t >= 0.0)) {
                    return config("temperature ratio must be non-negative");
                }
                if !(self.separation >= 0.0) {
                    return config("separation must be non-negative");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A rectangular result set; empty cells are `None`.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Header plus one line per row, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                if let Some(v) = cell {
                    let _ = write!(out, "{v:.16e}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn dp(g: f64, t: f64) -> Result<DephasingParams, CliError> {
    Ok(DephasingParams::new(g, t)?)
}

fn measured(mode: PovmMode, n: usize, params: DephasingParams, order: usize) -> Result<f64, CliError> {
    let noisy = SignalEnsemble::noisy(n, params)?;
    Ok(match mode {
        PovmMode::Noiseless => {
            pgm_fidelity(&SignalEnsemble::noiseless(n)?, &noisy, DEFAULT_RANK_TOL)?.ent_fidelity
        }
        PovmMode::NoiseAdapted => pgm_fidelity(&noisy, &noisy, DEFAULT_RANK_TOL)?.ent_fidelity,
        PovmMode::Taylor => ent_fidelity(&pgm_taylor(&noisy, order)?, &noisy)?.ent_fidelity,
    })
}

pub fn cmd_surface(cfg: &SweepConfig) -> Result<Table, CliError> {
    let n = cfg.n_ports[0];
    let mut cols = vec!["gamma_abs", "theta", "ent_fidelity", "teleport_fidelity"];
    let extra: Vec<String> = cfg.povm_modes.iter().map(|m| format!("{}_ent_fidelity", m.name())).collect();
    cols.extend(extra.iter().map(String::as_str));
    let mut table = Table::new(&cols);
    let points: Vec<(f64, f64)> = cfg
        .gamma_grid
        .values()
        .into_iter()
        .flat_map(|g| cfg.theta_grid.values().into_iter().map(move |t| (g, t)))
        .collect();
    table.rows = points
        .par_iter()
        .map(|&(g, t)| {
            let f = fidelity_noiseless_povm(n, dp(g, t)?);
            let mut row = vec![Some(g), Some(t), Some(f), Some(teleport_fidelity(f)?)];
            for &m in &cfg.povm_modes {
                row.push(Some(measured(m, n, dp(g, t)?, cfg.taylor_order)?));
            }
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(table)
}

pub fn cmd_vs_n(cfg: &SweepConfig) -> Result<Table, CliError> {
    let mut cols = vec![
        "n",
        "gamma_abs",
        "theta",
        "ent_fidelity",
        "teleport_fidelity",
        "noiseless_teleport_fidelity",
    ];
    let extra: Vec<String> = cfg.povm_modes.iter().map(|m| format!("{}_ent_fidelity", m.name())).collect();
    cols.extend(extra.iter().map(String::as_str));
    let mut table = Table::new(&cols);
    let mut points = Vec::new();
    for &n in &cfg.n_ports {
        for g in cfg.gamma_grid.values() {
            for t in cfg.theta_grid.values() {
                points.push((n, g, t));
            }
        }
    }
    table.rows = points
        .par_iter()
        .map(|&(n, g, t)| {
            let f = fidelity_noiseless_povm(n, dp(g, t)?);
            let mut row = vec![
                Some(n as f64),
                Some(g),
                Some(t),
                Some(f),
                Some(teleport_fidelity(f)?),
                Some(teleport_fidelity(f_ih(n))?),
            ];
            for &m in &cfg.povm_modes {
                row.push(Some(measured(m, n, dp(g, t)?, cfg.taylor_order)?));
            }
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(table)
}

pub fn cmd_compare(cfg: &SweepConfig) -> Result<Table, CliError> {
    let mut cols = vec!["n", "gamma_abs"];
    let names: Vec<&str> = cfg.povm_modes.iter().map(|m| m.name()).collect();
    cols.extend(names.iter().copied());
    cols.extend(["beigi_konig", "helstrom"]);
    let mut table = Table::new(&cols);
    let mut points = Vec::new();
    for &n in &cfg.n_ports {
        for g in cfg.gamma_grid.values() {
            points.push((n, g));
        }
    }
    table.rows = points
        .par_iter()
        .map(|&(n, g)| {
            let mut row = vec![Some(n as f64), Some(g)];
            for &m in &cfg.povm_modes {
                row.push(Some(measured(m, n, dp(g, 0.0)?, cfg.taylor_order)?));
            }
            row.push(Some(beigi_konig_bound(n, g)));
            row.push((n == 2).then(|| helstrom_bound_n2(g)));
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(table)
}

pub fn cmd_spinboson(cfg: &SweepConfig) -> Result<Table, CliError> {
    let mut cols = vec![
        "n",
        "ohmicity",
        "temperature_ratio",
        "separation",
        "tau",
        "chi",
        "phase",
        "gamma_abs",
    ];
    let names: Vec<String> = cfg
        .povm_modes
        .iter()
        .map(|m| format!("{}_teleport_fidelity", m.name()))
        .collect();
    cols.extend(names.iter().map(String::as_str));
    let mut table = Table::new(&cols);
    let mut points = Vec::new();
    for &n in &cfg.n_ports {
        for &s in &cfg.ohmicity {
            for &t in &cfg.temperature_ratio {
                let p = SpinBosonParams::new(s, t, cfg.separation)?;
                for tau in cfg.tau_grid.values() {
                    points.push((n, p, tau));
                }
            }
        }
    }
    table.rows = points
        .par_iter()
        .map(|&(n, p, tau)| {
            let d = decoherence_factor(tau, &p)?;
            let mut row = vec![
                Some(n as f64),
                Some(p.ohmicity()),
                Some(p.temperature_ratio()),
                Some(p.separation()),
                Some(tau),
                Some(d.chi),
                Some(d.phase),
                Some(d.gamma_abs),
            ];
            for &m in &cfg.povm_modes {
                let ent = match m {
                    PovmMode::Noiseless => fidelity_noiseless_povm(n, d.as_params),
                    other => measured(other, n, d.as_params, cfg.taylor_order)?,
                };
                row.push(Some(teleport_fidelity(ent)?));
            }
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(table)
}

/// One invariant evaluated by `verify`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation (or the quantity itself for one-sided checks).
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    fn upper(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: worst <= tolerance,
            worst,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub config: SweepConfig,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn worst<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

/// Runs every invariant suite for the configured port counts and grid.
pub fn cmd_verify(cfg: &SweepConfig) -> Result<VerifyReport, CliError> {
    let ns = &cfg.n_ports;
    let grid: Vec<(f64, f64)> = cfg
        .gamma_grid
        .values()
        .into_iter()
        .flat_map(|g| cfg.theta_grid.values().into_iter().map(move |t| (g, t)))
        .collect();
    let mut checks = Vec::new();

    let mut povms: Vec<(usize, Povm)> = Vec::new();
    for &n in ns {
        let mut p = noiseless_povm(n)?;
        if cfg.inject_fault && povms.is_empty() {
            let mut elements = p.elements().to_vec();
            let mut m = elements[0].matrix().to_owned();
            m[(0, 0)] += faer::c64::new(0.1, 0.0);
            elements[0] = HermitianOp::new(m)?;
            p = Povm::from_parts(elements, p.defect().clone(), p.rank_tol(), p.source())?;
        }
        povms.push((n, p));
    }

    let mut dev = Vec::new();
    let mut spread = Vec::new();
    for (n, povm) in &povms {
        for &(g, t) in &grid {
            let ens = SignalEnsemble::noisy(*n, dp(g, t)?)?;
            let r = ent_fidelity(povm, &ens)?;
            dev.push((r.ent_fidelity - fidelity_noiseless_povm(*n, dp(g, t)?)).abs());
            spread.push(r.port_spread());
        }
    }
    checks.push(Check::upper("closed_form_vs_direct_trace", worst(dev), 1e-9));
    checks.push(Check::upper("per_port_symmetry", worst(spread), 1e-9));

    let reports: Vec<_> = povms
        .iter()
        .map(|(n, p)| Ok(p.validate_against(&SignalEnsemble::noiseless(*n)?)))
        .collect::<Result<_, CliError>>()?;
    checks.push(Check::upper(
        "noiseless_povm_completeness",
        worst(reports.iter().map(|r| r.completeness_residual)),
        crate::povm::COMPLETENESS_TOL,
    ));
    checks.push(Check::upper(
        "noiseless_povm_positivity",
        worst(reports.iter().flat_map(|r| r.element_min_eigenvalues.iter().map(|m| -m))),
        crate::povm::PSD_TOL,
    ));

    let mut adapted_completeness = Vec::new();
    let mut adapted_overlap = Vec::new();
    let mut bk = Vec::new();
    for &n in ns {
        for &(g, t) in &grid {
            let ens = SignalEnsemble::noisy(n, dp(g, t)?)?;
            let p = pgm(&ens, DEFAULT_RANK_TOL)?;
            let rep = p.validate_against(&ens);
            adapted_completeness.push(rep.completeness_residual);
            adapted_overlap.push(rep.defect_overlap);
            let f = ent_fidelity(&p, &ens)?.ent_fidelity;
            bk.push(beigi_konig_bound(n, g) - f);
        }
    }
    checks.push(Check::upper("adapted_povm_completeness", worst(adapted_completeness), crate::povm::COMPLETENESS_TOL));
    checks.push(Check::upper("adapted_defect_overlap", worst(adapted_overlap), crate::povm::DEFECT_OVERLAP_TOL));
    checks.push(Check::upper("beigi_konig_below_pgm", worst(bk), 0.0));

    let mut pair = Vec::new();
    for &n in ns.iter().filter(|&&n| n >= 2) {
        for &(g, t) in &grid {
            let ens = SignalEnsemble::noisy(n, dp(g, t)?)?;
            pair.push((state_fidelity(&ens.states()[0], &ens.states()[1])? - 0.5).abs());
        }
    }
    checks.push(Check::upper("pairwise_fidelity_half", worst(pair), 1e-9));

    let mut tn = Vec::new();
    let mut helstrom = Vec::new();
    let mut kb = Vec::new();
    for &(g, t) in &grid {
        let ens = SignalEnsemble::noisy(2, dp(g, t)?)?;
        let d = ens.states()[0].sub(&ens.states()[1])?;
        tn.push((trace_norm(&d)? - (1.0 + 2.0 * g * g).sqrt()).abs());
        helstrom.push((helstrom_optimal_n2(&ens)? - helstrom_bound_n2(g)).abs());
        let p = pgm(&ens, DEFAULT_RANK_TOL)?;
        let success = 4.0 / 2.0 * ent_fidelity(&p, &ens)?.ent_fidelity;
        kb.push(knill_barnum_bound(2) - success);
    }
    checks.push(Check::upper("trace_norm_formula", worst(tn), 1e-10));
    checks.push(Check::upper("helstrom_formula", worst(helstrom), 1e-10));
    checks.push(Check::upper("knill_barnum_below_pgm", worst(kb), 1e-9));

    let mut spec_dev = Vec::new();
    for &n in ns {
        let dense = eigenvalues(SignalEnsemble::noiseless(n)?.average_unnormalized())?;
        let formula = spin_block_spectrum(n)?.eigenvalues();
        spec_dev.push(worst(dense.iter().zip(&formula).map(|(a, b)| (a - b).abs())));
    }
    checks.push(Check::upper("spin_block_spectrum", worst(spec_dev), 1e-10));

    let mut mixed = Vec::new();
    for (n, p) in &povms {
        for i in 1..=*n {
            mixed.push(mixed_term(p, i, *n)?);
        }
    }
    checks.push(Check::upper("mixed_term_vanishes", worst(mixed), 1e-10));
    let n0 = ns[0].max(2);
    let control = random_povm(n0, n0 + 1, cfg.seed)?;
    let c = mixed_term(&control, 1, n0)?;
    checks.push(Check {
        name: "mixed_term_control_nonzero".into(),
        passed: c > 1e-6,
        worst: c,
        tolerance: 1e-6,
    });

    let ens = SignalEnsemble::noisy(2, dp(0.5, 0.0)?)?;
    let exact = ent_fidelity(&pgm(&ens, DEFAULT_RANK_TOL)?, &ens)?.ent_fidelity;
    let series = ent_fidelity(&pgm_taylor(&ens, cfg.taylor_order)?, &ens)?.ent_fidelity;
    checks.push(Check::upper("taylor_vs_eigensolver", (exact - series).abs(), 1e-6));

    let mut kim = Vec::new();
    for &n in ns.iter().filter(|&&n| n >= 2) {
        for g in cfg.gamma_grid.values() {
            kim.push(fidelity_noiseless_povm(n, dp(g, 0.0)?) - kim_fidelity(n, g));
        }
    }
    checks.push(Check::upper("kim_above_noiseless", worst(kim), 1e-12));

    let mut quad = Vec::new();
    for s in [2.0, 3.0] {
        let base = SpinBosonParams::new(s, 0.1, 3.0)?;
        let mut q = base.quadrature();
        q.upper_cutoff *= 2.0;
        let wide = SpinBosonParams::with_quadrature(s, 0.1, 3.0, q)?;
        let mut q = base.quadrature();
        q.rel_tol *= 0.5;
        let fine = SpinBosonParams::with_quadrature(s, 0.1, 3.0, q)?;
        for tau in [1.0, 3.0, 8.0] {
            for other in [&wide, &fine] {
                quad.push((chi(tau, &base)? - chi(tau, other)?).abs());
                quad.push((phase(tau, &base)? - phase(tau, other)?).abs());
            }
        }
    }
    checks.push(Check::upper("quadrature_robustness", worst(quad), 1e-8));

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        config: cfg.clone(),
        checks,
        passed,
    })
}

fn timestamp_line() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated_unix={secs}\n")
}

fn emit(cfg: &SweepConfig, body: &str) -> Result<(), CliError> {
    match &cfg.output_path {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, body)?;
        }
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes a table in the configured format, plus a JSON sidecar next to
/// CSV files.
pub fn write_table(cfg: &SweepConfig, table: &Table) -> Result<(), CliError> {
    let generated = cfg.timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    match cfg.format {
        OutputFormat::Csv => {
            let mut body = String::new();
            if cfg.timestamp {
                body.push_str(&timestamp_line());
            }
            body.push_str(&table.to_csv());
            emit(cfg, &body)?;
            if let Some(path) = &cfg.output_path {
                let side = json!({
                    "config": cfg,
                    "columns": table.columns,
                    "row_count": table.rows.len(),
                    "generated_unix": generated,
                });
                std::fs::write(sidecar_path(path), to_pretty(&side)?)?;
            }
        }
        OutputFormat::Json => {
            let doc = json!({
                "config": cfg,
                "columns": table.columns,
                "rows": table.rows,
                "generated_unix": generated,
            });
            emit(cfg, &to_pretty(&doc)?)?;
        }
    }
    Ok(())
}

fn to_pretty(v: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.into()))?;
    s.push('\n');
    Ok(s)
}

/// Executes a resolved configuration.
pub fn run(cfg: &SweepConfig) -> Result<(), CliError> {
    let work = || -> Result<(), CliError> {
        let table = match cfg.command {
            CommandKind::Surface => cmd_surface(cfg)?,
            CommandKind::VsN => cmd_vs_n(cfg)?,
            CommandKind::Compare => cmd_compare(cfg)?,
            CommandKind::Spinboson => cmd_spinboson(cfg)?,
            CommandKind::Verify => {
                let report = cmd_verify(cfg)?;
                let v = serde_json::to_value(&report).map_err(|e| CliError::Io(e.into()))?;
                emit(cfg, &to_pretty(&v)?)?;
                if !report.passed {
                    return Err(CliError::Verification(report.failures().join(", ")));
                }
                return Ok(());
            }
        };
        write_table(cfg, &table)
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Parses arguments, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = SweepConfig::resolve(cli.command, &cli.options).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pbt: {e}");
            e.exit_code()
        }
    }
}
