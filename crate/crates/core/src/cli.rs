//! Command-line front end: configuration, subcommand dispatch and persistence.
//!
//! Configuration is TOML whose sections mirror the library's configuration
//! types; dotted keys work as usual (`model.chi = 10.0`) and unknown keys are
//! rejected. `--set key=value` overrides any entry after the file is read, and
//! sweep axes use the same dotted paths.
//!
//! Every output embeds the SHA-256 of the resolved configuration. Wall-clock
//! timestamps only ever go to `meta.json`, so everything else is reproducible
//! byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exponents::{
    check_condition_c, corollary1_parameters, corollary2_parameters, feasible_region_samples, write_region_csv,
    AdmissibilityReport, EnergyIndices, ExponentError, ModelParams,
};
use crate::odi::{
    default_epsilon, lower_bound_integral, odi_coefficients, optimize_bound, BoundResult, OdiCoefficients, OdiError,
    OptimizerConfig, QuadratureConfig,
};
use crate::pde::{self, PdeError, Profile, RadialGrid, SimulationConfig, SolverConfig, Trajectory};
use crate::verify::{
    check_embed_inequality, concurrence_diagnostic, equivalence_bruteforce, estimate_gn_constant, odi_monitor,
    ConcurrenceReport, ConcurrenceThresholds, GnExponents, InequalityReport, MonitorConfig, SamplerConfig,
    VerifyError,
};

/// Environment variable naming the default output root.
pub const OUTPUT_DIR_ENV: &str = "CHEMOBOUND_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "chemobound-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("not admissible: {0}")]
    Inadmissible(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Inadmissible(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ExponentError> for CliError {
    fn from(e: ExponentError) -> Self {
        match e {
            ExponentError::PBelowHalfDimension { .. } => CliError::Inadmissible(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OdiError> for CliError {
    fn from(e: OdiError) -> Self {
        match e {
            OdiError::Exponent(inner) => inner.into(),
            OdiError::NotAdmissible(_) | OdiError::Degenerate { .. } | OdiError::Infeasible(_) => {
                CliError::Inadmissible(e.to_string())
            }
            OdiError::EpsilonOutOfRange { .. } | OdiError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::NonFinite { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndicesConfig {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub epsilon: Option<f64>,
    /// 1: `q = 2p, s1 = p + 1, s2 = (p + 1)/2`;
    /// 2: `p = n − 1, q = 2(n − 1), s1 = n, s2 = n/2`.
    pub corollary: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    pub e0: Option<f64>,
    /// Gagliardo-Nirenberg constant; estimated on the grid when absent.
    pub c_gn: Option<f64>,
    /// Factor applied to the estimated constant.
    pub gn_safety: f64,
    /// Search `(s1, s2, epsilon)` instead of using the configured indices.
    pub optimize: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            e0: None,
            c_gn: None,
            gn_safety: 2.0,
            optimize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub cells: usize,
    /// Also run at twice the resolution and compare detection times.
    pub refinement_check: bool,
    pub stability_tolerance: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cells: 400,
            refinement_check: false,
            stability_tolerance: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    /// Defaults to `1.1`, `n/(n − 1)` and `1 + 1/n`.
    pub etas: Option<Vec<f64>>,
    pub epsilon: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            etas: None,
            epsilon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceConfig {
    pub trials: usize,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self { trials: 100_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    /// Defaults to `n/2 + k/2` for `k = 1..=3n`.
    pub p_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Worker threads; does not affect results.
    #[serde(skip_serializing)]
    pub jobs: usize,
    /// Dotted key to list of values; runs cover the cartesian product.
    pub axes: BTreeMap<String, Vec<toml::Value>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            jobs: 1,
            axes: BTreeMap::new(),
        }
    }
}

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Drives every randomised check.
    pub seed: u64,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub model: ModelParams,
    pub indices: IndicesConfig,
    pub bound: BoundConfig,
    pub grid: GridConfig,
    pub profile: Profile,
    pub solver: SolverConfig,
    pub quadrature: QuadratureConfig,
    pub optimizer: OptimizerConfig,
    pub gn: SamplerConfig,
    pub embed: EmbedConfig,
    pub equivalence: EquivalenceConfig,
    pub monitor: MonitorConfig,
    pub concurrence: ConcurrenceThresholds,
    pub region: RegionConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            model: ModelParams::default(),
            indices: IndicesConfig::default(),
            bound: BoundConfig::default(),
            grid: GridConfig::default(),
            profile: Profile::default(),
            solver: SolverConfig::default(),
            quadrature: QuadratureConfig::default(),
            optimizer: OptimizerConfig::default(),
            gn: SamplerConfig::default(),
            embed: EmbedConfig::default(),
            equivalence: EquivalenceConfig::default(),
            monitor: MonitorConfig::default(),
            concurrence: ConcurrenceThresholds::default(),
            region: RegionConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    /// Hex SHA-256 of the JSON form; output paths and thread counts excluded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configuration serializes");
        format!("{:x}", Sha256::digest(bytes))
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("configuration: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.model.dim < 3 {
            return Err(ExponentError::Dimension(self.model.dim).into());
        }
        if !(self.bound.gn_safety >= 1.0) {
            return Err(CliError::Usage(format!("bound.gn_safety = {} below 1", self.bound.gn_safety)));
        }
        if self.sweep.jobs == 0 {
            return Err(CliError::Usage("sweep.jobs must be at least 1".into()));
        }
        Ok(())
    }

    fn output_root(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

/// Reads a configuration file into a table; `None` gives an empty table.
pub fn load_table(path: Option<&Path>) -> Result<toml::Table> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Usage(format!("{}: {}", p.display(), e.message())))
        }
    }
}

/// Sets `key` (dotted) to `value`, creating intermediate tables.
pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed key '{key}'")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for part in parents {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("'{part}' in '{key}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses `value` as a TOML value, falling back to a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies one `key=value` override.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{assignment}' is not key=value")))?;
    set_path(table, key.trim(), parse_value(raw.trim()))
}

#[derive(Debug, Parser)]
#[command(name = "chemobound", version, about = "Blow-up time lower bounds for attraction-repulsion chemotaxis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the admissibility conditions for (p, q, s1, s2).
    CheckParams(CommonArgs),
    /// Lower bound on the blow-up time for fixed indices.
    Bound(CommonArgs),
    /// Lower bound maximised over (s1, s2, epsilon) at fixed (p, q).
    OptimizeBound(CommonArgs),
    /// Run the radial solver; writes trajectory.csv and report.json.
    Simulate(CommonArgs),
    /// Estimate the Gagliardo-Nirenberg constant on the grid.
    VerifyGn(CommonArgs),
    /// Sample the interpolation inequality.
    VerifyEmbed(CommonArgs),
    /// Randomised exact check of the clause / exponent-range equivalence.
    VerifyEquivalence(CommonArgs),
    /// Check the differential inequality along a simulated trajectory.
    VerifyOdi(CommonArgs),
    /// Admissible (p, q) region as CSV.
    Region(CommonArgs),
    /// Cartesian sweep of simulations and bounds.
    Sweep(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::CheckParams(a)
            | Command::Bound(a)
            | Command::OptimizeBound(a)
            | Command::Simulate(a)
            | Command::VerifyGn(a)
            | Command::VerifyEmbed(a)
            | Command::VerifyEquivalence(a)
            | Command::VerifyOdi(a)
            | Command::Region(a)
            | Command::Sweep(a) => a,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::CheckParams(_) => "check-params",
            Command::Bound(_) => "bound",
            Command::OptimizeBound(_) => "optimize-bound",
            Command::Simulate(_) => "simulate",
            Command::VerifyGn(_) => "verify-gn",
            Command::VerifyEmbed(_) => "verify-embed",
            Command::VerifyEquivalence(_) => "verify-equivalence",
            Command::VerifyOdi(_) => "verify-odi",
            Command::Region(_) => "region",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set model.chi=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Spatial dimension.
    #[arg(short = 'n', long = "dim")]
    pub dim: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Named index selection (1 or 2).
    #[arg(long)]
    pub corollary: Option<u8>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub s1: Option<f64>,
    #[arg(long)]
    pub s2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Initial energy E(0).
    #[arg(long)]
    pub e0: Option<f64>,
    #[arg(long)]
    pub c_gn: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    /// Worker threads for `sweep`.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl CommonArgs {
    /// Configuration table after the file, `--set` overrides and flags.
    pub fn table(&self) -> Result<toml::Table> {
        let mut t = load_table(self.config.as_deref())?;
        for s in &self.sets {
            apply_override(&mut t, s)?;
        }
        let float = |x: f64| toml::Value::Float(x);
        let flags: [(&str, Option<toml::Value>); 13] = [
            ("model.dim", self.dim.map(|v| toml::Value::Integer(v as i64))),
            ("seed", self.seed.map(|v| toml::Value::Integer(v as i64))),
            ("output_dir", self.output_dir.as_ref().map(|p| toml::Value::String(p.display().to_string()))),
            ("indices.corollary", self.corollary.map(|v| toml::Value::Integer(v as i64))),
            ("indices.p", self.p.map(float)),
            ("indices.q", self.q.map(float)),
            ("indices.s1", self.s1.map(float)),
            ("indices.s2", self.s2.map(float)),
            ("indices.epsilon", self.epsilon.map(float)),
            ("bound.e0", self.e0.map(float)),
            ("bound.c_gn", self.c_gn.map(float)),
            ("grid.cells", self.cells.map(|v| toml::Value::Integer(v as i64))),
            ("sweep.jobs", self.jobs.map(|v| toml::Value::Integer(v as i64))),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                set_path(&mut t, key, v)?;
            }
        }
        Ok(t)
    }
}

/// Whether a successful command reported a positive or negative finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Positive,
    Negative,
}

/// Runs a parsed command, writing its primary result to `out`.
pub fn execute(command: &Command, out: &mut dyn Write) -> Result<Outcome> {
    let table = command.args().table()?;
    let cfg = RunConfig::from_table(table.clone())?;
    match command {
        Command::CheckParams(_) => cmd_check_params(&cfg, out),
        Command::Bound(_) => cmd_bound(&cfg, out, cfg.bound.optimize),
        Command::OptimizeBound(_) => cmd_bound(&cfg, out, true),
        Command::Simulate(_) => cmd_simulate(&cfg, out, command.name()),
        Command::VerifyGn(_) => cmd_verify_gn(&cfg, out),
        Command::VerifyEmbed(_) => cmd_verify_embed(&cfg, out),
        Command::VerifyEquivalence(_) => cmd_verify_equivalence(&cfg, out),
        Command::VerifyOdi(_) => cmd_verify_odi(&cfg, out),
        Command::Region(_) => cmd_region(&cfg, out),
        Command::Sweep(_) => cmd_sweep(&cfg, table, out),
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> u8 {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli.command, &mut lock) {
        Ok(Outcome::Positive) => 0,
        Ok(Outcome::Negative) => 1,
        Err(e) => {
            eprintln!("chemobound {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn write_json<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_json(&mut f, value)
}

fn write_meta(dir: &Path, command: &str, hash: &str) -> Result<()> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_json_file(
        &dir.join("meta.json"),
        &serde_json::json!({
            "created_unix": created,
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": hash,
        }),
    )
}

/// `(p, q, s1, s2)` from a named selection or explicit values.
pub fn resolve_indices(cfg: &RunConfig) -> Result<(f64, f64, f64, f64)> {
    let ix = &cfg.indices;
    let n = cfg.model.dim;
    match ix.corollary {
        Some(1) => {
            let p = ix.p.ok_or_else(|| CliError::Usage("corollary 1 needs indices.p".into()))?;
            let (q, s1, s2) = corollary1_parameters(p, n)?;
            Ok((p, q, s1, s2))
        }
        Some(2) => Ok(corollary2_parameters(n)?),
        Some(k) => Err(CliError::Usage(format!("unknown corollary selection {k}"))),
        None => match (ix.p, ix.q, ix.s1, ix.s2) {
            (Some(p), Some(q), Some(s1), Some(s2)) => Ok((p, q, s1, s2)),
            _ => Err(CliError::Usage(
                "indices need p, q, s1, s2 or a corollary selection".into(),
            )),
        },
    }
}

/// `(p, q)` for the optimizer and the energy of simulations.
fn resolve_pq(cfg: &RunConfig) -> Result<(f64, f64)> {
    let ix = &cfg.indices;
    match (ix.corollary, ix.p, ix.q) {
        (None, Some(p), Some(q)) => Ok((p, q)),
        (None, Some(p), None) => Ok((p, 2.0 * p)),
        (None, None, _) => {
            let (p, q, _, _) = corollary2_parameters(cfg.model.dim)?;
            Ok((p, q))
        }
        _ => resolve_indices(cfg).map(|(p, q, _, _)| (p, q)),
    }
}

fn default_etas(n: u32) -> Vec<f64> {
    let nf = n as f64;
    vec![1.1, nf / (nf - 1.0), 1.0 + 1.0 / nf]
}

/// Seed for constant estimation, kept apart from the checking seed so an
/// inequality is never tested on the very functions that calibrated it.
fn estimation_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnEstimateRecord {
    pub eta: f64,
    pub estimate: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// Per-eta estimates on the configured grid; the constant used downstream is
/// `safety · max`.
pub fn estimate_gn_for_etas(cfg: &RunConfig, etas: &[f64]) -> Result<(f64, Vec<GnEstimateRecord>)> {
    let grid = RadialGrid::new(cfg.model.dim, cfg.model.domain.radius, cfg.grid.cells)?;
    let sampler = SamplerConfig {
        seed: estimation_seed(cfg.seed),
        ..cfg.gn.clone()
    };
    let records = etas
        .iter()
        .map(|&eta| {
            let est = estimate_gn_constant(&grid, &GnExponents::for_eta(eta), &sampler)?;
            Ok(GnEstimateRecord {
                eta,
                estimate: est.estimate,
                samples: est.samples,
                skipped: est.skipped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = records.iter().fold(0.0f64, |m, r| m.max(r.estimate));
    Ok((cfg.bound.gn_safety * best, records))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundOutput {
    pub config_hash: String,
    #[serde(flatten)]
    pub result: BoundResult,
    pub c_gn_source: String,
    pub optimizer_evaluations: Option<usize>,
    pub config: RunConfig,
}

/// The bound together with the coefficients it was computed from.
pub struct ComputedBound {
    pub result: BoundResult,
    pub coeffs: OdiCoefficients,
    pub c_gn_source: String,
    pub optimizer_evaluations: Option<usize>,
}

/// Lower bound for initial energy `e0` following the configuration: fixed or
/// optimized indices, configured or estimated `C_GN`.
pub fn compute_bound(cfg: &RunConfig, e0: f64, optimize: bool) -> Result<ComputedBound> {
    let params = &cfg.model;
    let n = params.dim;
    let given = cfg.bound.c_gn;
    let source = |records: &[GnEstimateRecord]| match given {
        Some(_) => "configured".to_string(),
        None => format!(
            "estimated: safety {} x max over eta {:?}",
            cfg.bound.gn_safety,
            records.iter().map(|r| r.eta).collect::<Vec<_>>()
        ),
    };
    let (indices, epsilon, c_gn, c_gn_source, evaluations) = if optimize || cfg.bound.optimize {
        let (p, q) = resolve_pq(cfg)?;
        let (provisional, records) = match given {
            Some(c) => (c, Vec::new()),
            None => estimate_gn_for_etas(cfg, &default_etas(n))?,
        };
        let opt_cfg = OptimizerConfig {
            quadrature: cfg.quadrature,
            ..cfg.optimizer.clone()
        };
        let opt = optimize_bound(params, p, q, e0, provisional, &opt_cfg)?;
        let indices = EnergyIndices::new(p, q, opt.s1, opt.s2)?;
        // re-estimate at the exponents actually used, never lowering the constant
        let (c_gn, records) = match given {
            Some(c) => (c, records),
            None => {
                let (c, mut at_opt) = estimate_gn_for_etas(cfg, &indices.eta)?;
                at_opt.extend(records);
                (c.max(provisional), at_opt)
            }
        };
        (indices, opt.epsilon, c_gn, source(&records), Some(opt.evaluations))
    } else {
        let (p, q, s1, s2) = resolve_indices(cfg)?;
        let indices = EnergyIndices::new(p, q, s1, s2)?;
        let (c_gn, records) = match given {
            Some(c) => (c, Vec::new()),
            None => estimate_gn_for_etas(cfg, &indices.eta)?,
        };
        let epsilon = match cfg.indices.epsilon {
            Some(e) => e,
            None => default_epsilon(params, &indices)?,
        };
        (indices, epsilon, c_gn, source(&records), None)
    };
    let coeffs = odi_coefficients(params, &indices, epsilon, c_gn)?;
    let result = lower_bound_integral(&coeffs, e0, &cfg.quadrature)?;
    Ok(ComputedBound {
        result,
        coeffs,
        c_gn_source,
        optimizer_evaluations: evaluations,
    })
}

fn cmd_check_params(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let (p, q, s1, s2) = resolve_indices(cfg)?;
    let report: AdmissibilityReport = check_condition_c(cfg.model.dim, p, q, s1, s2)?;
    write_json(
        out,
        &serde_json::json!({
            "config_hash": cfg.hash(),
            "n": cfg.model.dim,
            "indices": { "p": p, "q": q, "s1": s1, "s2": s2 },
            "report": report,
        }),
    )?;
    Ok(if report.admissible {
        Outcome::Positive
    } else {
        Outcome::Negative
    })
}

fn cmd_bound(cfg: &RunConfig, out: &mut dyn Write, optimize: bool) -> Result<Outcome> {
    let e0 = cfg
        .bound
        .e0
        .ok_or_else(|| CliError::Usage("initial energy missing: set bound.e0 or pass --e0".into()))?;
    let computed = compute_bound(cfg, e0, optimize)?;
    write_json(
        out,
        &BoundOutput {
            config_hash: cfg.hash(),
            result: computed.result,
            c_gn_source: computed.c_gn_source,
            optimizer_evaluations: computed.optimizer_evaluations,
            config: cfg.clone(),
        },
    )?;
    Ok(Outcome::Positive)
}

/// Simulation settings implied by the configuration.
pub fn simulation_config(cfg: &RunConfig) -> Result<SimulationConfig> {
    let (p, q) = resolve_pq(cfg)?;
    Ok(SimulationConfig {
        params: cfg.model.clone(),
        cells: cfg.grid.cells,
        profile: cfg.profile.clone(),
        p,
        q,
        solver: cfg.solver.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRecord {
    pub cells: usize,
    pub blew_up: bool,
    pub t_detect: Option<f64>,
    pub relative_change: Option<f64>,
    pub within_tolerance: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOutput {
    pub config_hash: String,
    #[serde(flatten)]
    pub report: pde::BlowupReport,
    pub initial_energy: f64,
    pub refinement: Option<RefinementRecord>,
    pub config: RunConfig,
}

fn refinement(cfg: &RunConfig, sim: &SimulationConfig, coarse: &Trajectory) -> Result<Option<RefinementRecord>> {
    if !cfg.grid.refinement_check {
        return Ok(None);
    }
    if matches!(sim.profile, Profile::Table { .. }) {
        return Err(CliError::Usage("refinement check needs an analytic profile".into()));
    }
    let (traj, _) = pde::run(&SimulationConfig {
        cells: 2 * sim.cells,
        ..sim.clone()
    })?;
    let rel = coarse
        .report
        .t_detect
        .zip(traj.report.t_detect)
        .map(|(a, b)| (b - a).abs() / a);
    Ok(Some(RefinementRecord {
        cells: 2 * sim.cells,
        blew_up: traj.report.blew_up,
        t_detect: traj.report.t_detect,
        relative_change: rel,
        within_tolerance: rel.map(|r| r <= cfg.grid.stability_tolerance),
    }))
}

/// Runs the solver and writes `trajectory.csv` and `report.json` into `dir`.
pub fn simulate_into(cfg: &RunConfig, dir: &Path) -> Result<(Trajectory, SimulationOutput)> {
    let sim = simulation_config(cfg)?;
    let (traj, _) = pde::run(&sim)?;
    let hash = cfg.hash();
    fs::create_dir_all(dir)?;
    traj.write_csv(fs::File::create(dir.join("trajectory.csv"))?, Some(&hash))?;
    let output = SimulationOutput {
        config_hash: hash,
        report: traj.report.clone(),
        initial_energy: traj.initial_energy(),
        refinement: refinement(cfg, &sim, &traj)?,
        config: cfg.clone(),
    };
    write_json_file(&dir.join("report.json"), &output)?;
    Ok((traj, output))
}

fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write, name: &str) -> Result<Outcome> {
    let dir = cfg.output_root();
    let (_, output) = simulate_into(cfg, &dir)?;
    write_meta(&dir, name, &output.config_hash)?;
    write_json(out, &output)?;
    Ok(Outcome::Positive)
}

fn embed_etas(cfg: &RunConfig) -> Vec<f64> {
    cfg.embed.etas.clone().unwrap_or_else(|| default_etas(cfg.model.dim))
}

fn cmd_verify_gn(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let etas = embed_etas(cfg);
    let (c_gn, records) = estimate_gn_for_etas(cfg, &etas)?;
    write_json(
        out,
        &serde_json::json!({
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "safety": cfg.bound.gn_safety,
            "estimates": records,
            "C_GN": c_gn,
        }),
    )?;
    Ok(Outcome::Positive)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbedRecord {
    pub eta: f64,
    #[serde(flatten)]
    pub report: InequalityReport,
}

fn cmd_verify_embed(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let etas = embed_etas(cfg);
    let (c_gn, estimates) = match cfg.bound.c_gn {
        Some(c) => (c, Vec::new()),
        None => estimate_gn_for_etas(cfg, &etas)?,
    };
    let grid = RadialGrid::new(cfg.model.dim, cfg.model.domain.radius, cfg.grid.cells)?;
    let sampler = SamplerConfig {
        seed: cfg.seed,
        ..cfg.gn.clone()
    };
    let reports = etas
        .iter()
        .map(|&eta| {
            Ok(EmbedRecord {
                eta,
                report: check_embed_inequality(&grid, eta, cfg.embed.epsilon, c_gn, &sampler)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clean = reports.iter().all(|r| r.report.passed());
    write_json(
        out,
        &serde_json::json!({
            "config_hash": cfg.hash(),
            "C_GN": c_gn,
            "gn_estimates": estimates,
            "epsilon": cfg.embed.epsilon,
            "reports": reports,
        }),
    )?;
    Ok(if clean { Outcome::Positive } else { Outcome::Negative })
}

fn cmd_verify_equivalence(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let report = equivalence_bruteforce(cfg.model.dim, cfg.equivalence.trials, cfg.seed)?;
    let clean = report.passed();
    write_json(
        out,
        &serde_json::json!({ "config_hash": cfg.hash(), "report": report }),
    )?;
    Ok(if clean { Outcome::Positive } else { Outcome::Negative })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdiCheckOutput {
    pub config_hash: String,
    pub blew_up: bool,
    pub t_detect: Option<f64>,
    pub t_lower: f64,
    pub initial_energy: f64,
    pub report: InequalityReport,
    pub concurrence: ConcurrenceReport,
}

/// Simulates, bounds, and monitors the differential inequality.
pub fn odi_check(cfg: &RunConfig) -> Result<(Trajectory, ComputedBound, OdiCheckOutput)> {
    let (traj, _) = pde::run(&simulation_config(cfg)?)?;
    let e0 = traj.initial_energy();
    let bound = compute_bound(cfg, e0, cfg.bound.optimize)?;
    let report = odi_monitor(&traj, &bound.coeffs, &cfg.monitor);
    let output = OdiCheckOutput {
        config_hash: cfg.hash(),
        blew_up: traj.report.blew_up,
        t_detect: traj.report.t_detect,
        t_lower: bound.result.t_lower,
        initial_energy: e0,
        report,
        concurrence: concurrence_diagnostic(&traj, &cfg.concurrence),
    };
    Ok((traj, bound, output))
}

fn cmd_verify_odi(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let (_, _, output) = odi_check(cfg)?;
    write_json(out, &output)?;
    Ok(if output.report.passed() {
        Outcome::Positive
    } else {
        Outcome::Negative
    })
}

fn cmd_region(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let n = cfg.model.dim;
    let p_values = cfg.region.p_values.clone().unwrap_or_else(|| {
        (1..=3 * n)
            .map(|k| n as f64 / 2.0 + k as f64 / 2.0)
            .collect()
    });
    let rows = feasible_region_samples(n, &p_values)?;
    writeln!(out, "# config_hash={}", cfg.hash())?;
    write_region_csv(&rows, &mut *out)?;
    Ok(Outcome::Positive)
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub run_id: String,
    pub blew_up: Option<bool>,
    pub t_detect: Option<f64>,
    pub t_lower: Option<f64>,
    pub margin: Option<f64>,
    pub error: Option<String>,
}

/// Every combination of axis values, last axis varying fastest.
pub fn sweep_cells(axes: &BTreeMap<String, Vec<toml::Value>>) -> Vec<Vec<(String, toml::Value)>> {
    let mut cells: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
    for (key, values) in axes {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

fn sweep_run(cfg: &RunConfig, dir: &Path) -> Result<SweepRow> {
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (traj, sim) = simulate_into(cfg, dir)?;
    let hash = sim.config_hash.clone();
    let mut row = SweepRow {
        run_id: id,
        blew_up: Some(traj.report.blew_up),
        t_detect: traj.report.t_detect,
        t_lower: None,
        margin: None,
        error: None,
    };
    let concurrence = concurrence_diagnostic(&traj, &cfg.concurrence);
    write_json_file(
        &dir.join("concurrence.json"),
        &serde_json::json!({ "config_hash": hash, "report": concurrence }),
    )?;
    let bound = compute_bound(cfg, traj.initial_energy(), cfg.bound.optimize)?;
    write_json_file(
        &dir.join("bound.json"),
        &BoundOutput {
            config_hash: hash.clone(),
            result: bound.result.clone(),
            c_gn_source: bound.c_gn_source.clone(),
            optimizer_evaluations: bound.optimizer_evaluations,
            config: cfg.clone(),
        },
    )?;
    let monitor = odi_monitor(&traj, &bound.coeffs, &cfg.monitor);
    write_json_file(
        &dir.join("monitor.json"),
        &serde_json::json!({ "config_hash": hash, "report": monitor }),
    )?;
    row.t_lower = Some(bound.result.t_lower);
    row.margin = row.t_detect.map(|t| t - bound.result.t_lower);
    Ok(row)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// Writes `summary.csv` with a leading `# config_hash=` line.
pub fn write_summary<W: Write>(rows: &[SweepRow], hash: &str, out: W) -> std::io::Result<()> {
    let mut out = out;
    writeln!(out, "# config_hash={hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "blew_up", "t_detect", "t_lower", "margin"])?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.blew_up.map(|b| b.to_string()).unwrap_or_default(),
            fmt_opt(r.t_detect),
            fmt_opt(r.t_lower),
            fmt_opt(r.margin),
        ])?;
    }
    w.flush()
}

/// Runs every sweep cell into `root/run_XXXX`, continuing past failures, and
/// writes `summary.csv`. Rows are in cell order regardless of `jobs`.
pub fn run_sweep(cfg: &RunConfig, base: &toml::Table, root: &Path) -> Result<Vec<SweepRow>> {
    let cells = sweep_cells(&cfg.sweep.axes);
    fs::create_dir_all(root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| {
                let dir = root.join(format!("run_{i:04}"));
                let attempt = (|| {
                    let mut table = base.clone();
                    table.remove("sweep");
                    table.remove("output_dir");
                    for (key, value) in cell {
                        set_path(&mut table, key, value.clone())?;
                    }
                    let run_cfg = RunConfig::from_table(table)?;
                    sweep_run(&run_cfg, &dir)
                })();
                attempt.unwrap_or_else(|e| {
                    let _ = fs::create_dir_all(&dir);
                    let _ = fs::write(dir.join("error.txt"), format!("{e}\n"));
                    SweepRow {
                        run_id: format!("run_{i:04}"),
                        blew_up: None,
                        t_detect: None,
                        t_lower: None,
                        margin: None,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });
    write_summary(&rows, &cfg.hash(), fs::File::create(root.join("summary.csv"))?)?;
    Ok(rows)
}

fn cmd_sweep(cfg: &RunConfig, table: toml::Table, out: &mut dyn Write) -> Result<Outcome> {
    let root = cfg.output_root();
    let rows = run_sweep(cfg, &table, &root)?;
    write_meta(&root, "sweep", &cfg.hash())?;
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let margins: Vec<f64> = rows.iter().filter_map(|r| r.margin).collect();
    write_json(
        out,
        &serde_json::json!({
            "config_hash": cfg.hash(),
            "runs": rows.len(),
            "failures": failures,
            "blow_ups": rows.iter().filter(|r| r.blew_up == Some(true)).count(),
            "min_margin": margins.iter().copied().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x)))),
            "rows": rows,
        }),
    )?;
    if failures == rows.len() && !rows.is_empty() {
        return Err(CliError::Runtime("every sweep run failed".into()));
    }
    Ok(Outcome::Positive)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_overrides_build_nested_tables() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "model.chi=10").unwrap();
        apply_override(&mut t, "model.domain.radius = 2.5").unwrap();
        apply_override(&mut t, "profile.kind=constant").unwrap();
        assert_eq!(t["model"]["chi"].as_integer(), Some(10));
        assert_eq!(t["model"]["domain"]["radius"].as_float(), Some(2.5));
        assert_eq!(t["profile"]["kind"].as_str(), Some("constant"));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "model..chi=1").is_err());
    }

    #[test]
    fn integer_values_coerce_to_floats() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "model.chi=10").unwrap();
        let cfg = RunConfig::from_table(t).unwrap();
        assert_eq!(cfg.model.chi, 10.0);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "model.chii=10").unwrap();
        assert!(matches!(RunConfig::from_table(t), Err(CliError::Usage(_))));
        let mut t = toml::Table::new();
        apply_override(&mut t, "bogus=1").unwrap();
        assert!(matches!(RunConfig::from_table(t), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_ignores_output_dir_and_jobs() {
        let a = RunConfig::default();
        let b = RunConfig {
            output_dir: Some("elsewhere".into()),
            sweep: SweepConfig {
                jobs: 8,
                ..SweepConfig::default()
            },
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn sweep_cells_are_cartesian() {
        let mut axes = BTreeMap::new();
        axes.insert("model.chi".to_string(), vec![5.0.into(), 10.0.into(), 20.0.into()]);
        axes.insert("model.xi".to_string(), vec![0.1.into(), 0.2.into()]);
        let cells = sweep_cells(&axes);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1][0].0, "model.chi");
        assert_eq!(cells[1][1].1.as_float(), Some(0.2));
        assert_eq!(sweep_cells(&BTreeMap::new()).len(), 1);
    }

    #[test]
    fn index_resolution() {
        let mut cfg = RunConfig::default();
        assert!(matches!(resolve_indices(&cfg), Err(CliError::Usage(_))));
        cfg.indices.corollary = Some(2);
        assert_eq!(resolve_indices(&cfg).unwrap(), (2.0, 4.0, 3.0, 1.5));
        cfg.indices.corollary = Some(1);
        assert!(resolve_indices(&cfg).is_err());
        cfg.indices.p = Some(3.0);
        assert_eq!(resolve_indices(&cfg).unwrap(), (3.0, 6.0, 4.0, 2.0));
        cfg.indices.p = Some(1.0);
        assert!(matches!(resolve_indices(&cfg), Err(CliError::Inadmissible(_))));
        assert_eq!(resolve_pq(&RunConfig::default()).unwrap(), (2.0, 4.0));
    }

    #[test]
    fn summary_format() {
        let rows = vec![
            SweepRow {
                run_id: "run_0000".into(),
                blew_up: Some(true),
                t_detect: Some(0.5),
                t_lower: Some(0.25),
                margin: Some(0.25),
                error: None,
            },
            SweepRow {
                run_id: "run_0001".into(),
                blew_up: None,
                t_detect: None,
                t_lower: None,
                margin: None,
                error: Some("x".into()),
            },
        ];
        let mut buf = Vec::new();
        write_summary(&rows, "h", &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# config_hash=h\nrun_id,blew_up,t_detect,t_lower,margin\nrun_0000,true,5e-1,2.5e-1,2.5e-1\nrun_0001,,,,\n"
        );
    }
}
