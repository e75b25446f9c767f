//! Experiment orchestration behind the `cubic-nls` binary.
//!
//! Every subcommand reads an optional JSON [`ExperimentConfig`], writes its
//! artifacts into the output directory together with a `manifest.json`
//! holding the resolved config, and maps failures to exit codes: 0 success,
//! 2 invalid input, 3 numerical failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    check_nonvanishing, fit_decay_rate, make_vanishing_data, ExpectedRange, FitReport,
};
use crate::coeffs::{Coefficients, Regime};
use crate::error::{Error, Result};
use crate::evolve::{
    log_spaced, solve_cauchy, solve_final_state, solve_profile_frame, FieldPair, Mode, SolverConfig,
    Trajectory, DEFAULT_LEAK_TOL, DEFAULT_STEPS_PER_DECADE,
};
use crate::odesys::{integrate_final_data, CubicSystem, Preset};
use crate::profiles::{eval_f1, eval_f2, Diagonalizer, FinalData, GaussianSpec};
use crate::spectral::{io as field_io, Field, Grid, Space, Spectral};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cubic-nls", version, about = "Pseudospectral lab for a coupled cubic NLS system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Run once per value of a dotted config key, e.g. coefficients.lambda6=1.2,1.5.
    #[arg(long, global = true)]
    pub sweep: Option<String>,

    /// Seed for randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Regime classification table over a (λ1, λ6) grid.
    Regimes,
    /// Closed-form profiles against the RK4 limit-ODE integration.
    OdeCheck {
        /// coupled (default), new1, new2 or decoupled_source.
        #[arg(long)]
        ode_system: Option<String>,
    },
    /// Operator identities: factorization, M-conjugation decay, J, diagonalizer.
    IdentityCheck,
    /// Forward Cauchy run or profile-frame run.
    Simulate,
    /// Backward final-state run with profile errors.
    FinalState,
    /// Power-law fits over a trajectory CSV.
    Rates {
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Columns to fit (default: linf_u1, linf_u2).
        #[arg(long, value_delimiter = ',')]
        column: Vec<String>,
        /// Fit window `lo,hi`.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Regimes => "regimes",
            Command::OdeCheck { .. } => "ode-check",
            Command::IdentityCheck => "identity-check",
            Command::Simulate => "simulate",
            Command::FinalState => "final-state",
            Command::Rates { .. } => "rates",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub lambda1: f64,
    pub lambda6: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Defaults to the balanced length `√(2πn)`.
    #[serde(default)]
    pub length: Option<f64>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self.length {
            Some(l) => Grid::new(self.n, l),
            None => Grid::balanced(self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FinalDataSource {
    Gaussians {
        w1: GaussianSpec,
        w2: GaussianSpec,
        /// Replace `W2` by the vanishing-case data with amplitude `|w2|`.
        #[serde(default)]
        vanishing: bool,
    },
    File {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSource {
    /// Gaussians in `x`.
    Gaussians { u1: GaussianSpec, u2: GaussianSpec },
    /// Binary field snapshots.
    Files { u1_file: PathBuf, u2_file: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    #[serde(default)]
    pub final_data: Option<FinalDataSource>,
    #[serde(default)]
    pub initial: Option<InitialSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RunSpec {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_t1")]
    pub t1: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_spd")]
    pub steps_per_decade: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Adds this many log-spaced output times over the run.
    #[serde(default)]
    pub log_snapshots: Option<usize>,
    #[serde(default)]
    pub T: Option<f64>,
    #[serde(default)]
    pub T_max: Option<f64>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_leak")]
    pub leak_tol: f64,
    #[serde(default)]
    pub store_snapshots: bool,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    #[serde(default = "default_ode_times")]
    pub ode_times: Vec<f64>,
    #[serde(default = "default_ode_steps")]
    pub ode_steps: usize,
}

fn default_mode() -> Mode {
    Mode::Physical
}
fn default_t1() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    0.05
}
fn default_spd() -> usize {
    DEFAULT_STEPS_PER_DECADE
}
fn default_nu() -> f64 {
    0.7
}
fn default_delta() -> f64 {
    0.1
}
fn default_leak() -> f64 {
    DEFAULT_LEAK_TOL
}
fn default_ode_times() -> Vec<f64> {
    vec![2.0, 10.0, 100.0]
}
fn default_ode_steps() -> usize {
    4096
}

impl Default for RunSpec {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("all run fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeGrid {
    pub lambda1: Vec<f64>,
    pub lambda6: Vec<f64>,
}

impl Default for RegimeGrid {
    fn default() -> Self {
        Self {
            lambda1: vec![1.0],
            lambda6: (0..=40).map(|k| 0.1 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_coeffs")]
    pub coefficients: CoefficientSpec,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub ode_system: Option<String>,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub regimes: RegimeGrid,
}

fn default_coeffs() -> CoefficientSpec {
    CoefficientSpec {
        lambda1: 1.0,
        lambda6: 1.5,
    }
}

fn default_grid() -> GridSpec {
    GridSpec { n: 4096, length: None }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("all config fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Value> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn coefficients(&self) -> Result<Coefficients> {
        Coefficients::derive(self.coefficients.lambda1, self.coefficients.lambda6)
    }

    /// Schema-level checks shared by every subcommand.
    pub fn validate(&self) -> Result<()> {
        self.coefficients()?;
        self.grid.build()?;
        let r = &self.run;
        if !(r.nu > 0.5 && r.nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (1/2, 1), got {}", r.nu)));
        }
        if !(r.delta > 0.0 && r.delta < r.nu - 0.5) {
            return Err(Error::Config(format!(
                "delta must lie in (0, nu - 1/2) = (0, {}), got {}",
                r.nu - 0.5,
                r.delta
            )));
        }
        if let Some((lo, hi)) = r.fit_window {
            if !(lo < hi) {
                return Err(Error::Config(format!("fit_window ({lo}, {hi}) is empty")));
            }
        }
        for path in self.referenced_files() {
            if !path.exists() {
                return Err(Error::Config(format!("referenced file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    fn referenced_files(&self) -> Vec<&Path> {
        let mut out = Vec::new();
        if let Some(FinalDataSource::File { file }) = &self.data.final_data {
            out.push(file.as_path());
        }
        if let Some(InitialSource::Files { u1_file, u2_file }) = &self.data.initial {
            out.push(u1_file.as_path());
            out.push(u2_file.as_path());
        }
        out
    }

    pub fn final_data(&self, coeffs: &Coefficients) -> Result<FinalData> {
        match &self.data.final_data {
            None => Err(Error::Config("data.final_data is required".into())),
            Some(FinalDataSource::File { file }) => FinalData::read_csv(File::open(file)?),
            Some(FinalDataSource::Gaussians { w1, w2, vanishing: false }) => {
                FinalData::from_gaussians(self.grid.build()?, w1, w2)
            }
            Some(FinalDataSource::Gaussians { w1, w2, vanishing: true }) => {
                if w1.phase != 0.0 {
                    return Err(Error::Config("vanishing data needs a real W1 (phase 0)".into()));
                }
                w1.validate()?;
                w2.validate()?;
                let grid = self.grid.build()?;
                let xi = grid.xi_nodes();
                let a: Vec<f64> = xi.iter().map(|&x| w1.eval(x).re).collect();
                let r: Vec<f64> = xi.iter().map(|&x| w2.eval(x).norm()).collect();
                make_vanishing_data(grid, &a, &r, coeffs)
            }
        }
    }

    pub fn initial_pair(&self, t: f64) -> Result<FieldPair> {
        match &self.data.initial {
            None => Err(Error::Config("data.initial is required".into())),
            Some(InitialSource::Gaussians { u1, u2 }) => {
                u1.validate()?;
                u2.validate()?;
                let grid = self.grid.build()?;
                FieldPair::new(
                    Field::from_fn(grid, Space::Physical, |x| u1.eval(x)),
                    Field::from_fn(grid, Space::Physical, |x| u2.eval(x)),
                    t,
                )
            }
            Some(InitialSource::Files { u1_file, u2_file }) => {
                let (a, _) = field_io::load_binary(u1_file)?;
                let (b, _) = field_io::load_binary(u2_file)?;
                FieldPair::new(a, b, t)
            }
        }
    }

    fn output_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut times = self.run.snapshot_times.clone();
        if let Some(n) = self.run.log_snapshots {
            let lo = t0.max(1.0).min(t1);
            if n > 0 && t1 > lo {
                times.extend(log_spaced(lo, t1, n));
            }
        }
        times
    }

    fn solver_config(&self, mode: Mode, t0: f64, t1: f64) -> SolverConfig {
        SolverConfig {
            mode,
            dt: self.run.dt,
            steps_per_decade: self.run.steps_per_decade,
            t0,
            t1,
            snapshot_times: self.output_times(t0.min(t1), t0.max(t1)),
            leak_tol: self.run.leak_tol,
            store_snapshots: self.run.store_snapshots,
            nonlinear: true,
        }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

pub fn diagnostic(err: &Error) -> Value {
    json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    })
}

/// Sets `value` at a dotted path, creating objects along the way.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            return Err(Error::Config(format!("sweep key {key:?} crosses a non-object")));
        }
        let obj = cur.as_object_mut().expect("checked above");
        if i + 1 == parts.len() {
            obj.insert((*part).to_owned(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_owned()).or_insert_with(|| json!({}));
    }
    Err(Error::Config("empty sweep key".into()))
}

/// Recursively overlays `top` on `base`; non-object values replace.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `KEY=v1,v2,...`; values parse as JSON when possible, else as strings.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<Value>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep must look like KEY=v1,v2, got {spec:?}")))?;
    if key.is_empty() || values.is_empty() {
        return Err(Error::Config(format!("sweep must look like KEY=v1,v2, got {spec:?}")));
    }
    let values = values
        .split(',')
        .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned())))
        .collect();
    Ok((key.to_owned(), values))
}

/// Outcome of one run, before the manifest is written.
struct Outcome {
    outputs: Vec<String>,
    summary: Value,
}

struct Ctx<'a> {
    out: &'a Path,
    formats: &'a [Format],
    seed: u64,
    outputs: Vec<String>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_owned());
        self.out.join(name)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let file = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(file, value)?;
        Ok(())
    }

    fn write_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        traj.write_csv(BufWriter::new(File::create(self.path("trajectory.csv"))?))?;
        if self.formats.contains(&Format::Binary) {
            for (k, snap) in traj.snapshots.iter().enumerate() {
                for (j, f) in [(1, &snap.u1), (2, &snap.u2)] {
                    let name = format!("snapshot_{k:04}_u{j}.bin");
                    field_io::save_binary(f, snap.t, &self.path(&name))?;
                }
            }
        }
        Ok(())
    }
}

fn regimes(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<Value> {
    let mut w = csv::Writer::from_path(ctx.path("regimes.csv"))?;
    w.write_record(["lambda1", "lambda6", "eta", "mu", "regime"])?;
    let mut counts = json!({"deceleration": 0, "threshold": 0, "oscillatory": 0, "skipped": 0});
    for &l1 in &cfg.regimes.lambda1 {
        for &l6 in &cfg.regimes.lambda6 {
            let Ok(c) = Coefficients::derive(l1, l6) else {
                counts["skipped"] = json!(counts["skipped"].as_u64().unwrap_or(0) + 1);
                continue;
            };
            let name = match c.regime() {
                Regime::Deceleration => "deceleration",
                Regime::Threshold => "threshold",
                Regime::Oscillatory => "oscillatory",
            };
            counts[name] = json!(counts[name].as_u64().unwrap_or(0) + 1);
            w.write_record(&[
                l1.to_string(),
                l6.to_string(),
                c.eta().to_string(),
                c.mu().map(|m| m.to_string()).unwrap_or_default(),
                name.to_owned(),
            ])?;
        }
    }
    w.flush()?;
    Ok(counts)
}

fn ode_check(cfg: &ExperimentConfig, preset: Option<&str>, ctx: &mut Ctx) -> Result<Value> {
    let name = preset.or(cfg.ode_system.as_deref()).unwrap_or("coupled");
    let preset: Preset = name.parse()?;
    let c = cfg.coefficients;
    let system = CubicSystem::from_preset(preset, c.lambda1, c.lambda6);
    let coeffs = cfg.coefficients()?;
    let data = match preset {
        Preset::Coupled => {
            coeffs.require_deceleration()?;
            cfg.final_data(&coeffs)?
        }
        _ => cfg.final_data(&coeffs).or_else(|_| {
            FinalData::from_gaussians(cfg.grid.build()?, &GaussianSpec::new(0.1, 1.0), &GaussianSpec::new(0.1, 1.0))
        })?,
    };
    let steps = cfg.run.ode_steps;
    let mut rows = Vec::new();
    let mut max_dev: f64 = 0.0;
    let mut max_amp: f64 = 0.0;
    for &t in &cfg.run.ode_times {
        let (a1, a2) = integrate_final_data(&data, t, steps, &system)?;
        let amp = a1.iter().chain(&a2).map(|v| v.norm()).fold(0.0, f64::max);
        max_amp = max_amp.max(amp);
        let deviation = if preset == Preset::Coupled {
            let f1 = eval_f1(t, &data, &coeffs);
            let f2 = eval_f2(t, &data, &coeffs)?;
            let d = a1
                .iter()
                .zip(&f1)
                .chain(a2.iter().zip(&f2))
                .map(|(p, q)| (p - q).norm())
                .fold(0.0, f64::max);
            max_dev = max_dev.max(d);
            Some(d)
        } else {
            None
        };
        rows.push(json!({"t": t, "max_deviation": deviation, "max_amplitude": amp}));
    }
    let report = if preset == Preset::Coupled {
        json!({"system": name, "steps": steps, "times": rows, "max_deviation": max_dev, "tolerance": 1e-7, "pass": max_dev < 1e-7})
    } else {
        json!({"system": name, "steps": steps, "times": rows, "max_amplitude": max_amp, "bounded": max_amp.is_finite()})
    };
    ctx.write_json("ode_check.json", &report)?;
    Ok(report)
}

fn identity_check(ctx: &mut Ctx) -> Result<Value> {
    let grid = Grid::new(8192, 160.0)?;
    let s = Spectral::new(grid);
    let gauss = Field::from_fn(grid, Space::Physical, |x| Complex64::new((-x * x / 2.0).exp(), 0.0));
    let mut factorization = Vec::new();
    for t in [1.0, 2.0, 10.0] {
        let r = s.factorization_residual(&gauss, t)?;
        factorization.push(json!({"t": t, "residual": r.value, "pass": r.value < 1e-6}));
    }

    let fgrid = Grid::balanced(4096)?;
    let fs = Spectral::new(fgrid);
    let g = Field::from_fn(fgrid, Space::Frequency, |xi| Complex64::new((-xi * xi).exp(), 0.0));
    let times = log_spaced(1e2, 1e4, 16);
    let residuals = times
        .iter()
        .map(|&t| fs.conjugation_residual(&g, t))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_decay_rate(&times, &residuals, (1e2, 1e4))?;
    let m_conjugation = FitReport::new("m_conjugation_residual", &fit, Some(ExpectedRange::at_most(-0.2)));

    let jgrid = Grid::new(4096, 200.0)?;
    let js = Spectral::new(jgrid);
    let f = Field::from_fn(jgrid, Space::Physical, |x| Complex64::new((-x * x / 2.0).exp(), 0.3 * (-x * x).exp()));
    let t = 1.5;
    let lhs = js.apply_j(&js.free_propagate(&f, t)?, t)?;
    let rhs = js.free_propagate(&f.map_nodes(|x, v| v * x), t)?;
    let j_residual = lhs.sub(&rhs)?.l2_norm();

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let (mut inv_err, mut diag_err) = (0.0f64, 0.0f64);
    let draws = 1000;
    for _ in 0..draws {
        let l1: f64 = rng.random_range(0.1..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let l6 = l1 * (1.0 + 2.0 * rng.random_range(0.01..0.99));
        let theta: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let c = Coefficients::derive(l1, l6)?;
        let mu = c.require_deceleration()?;
        let d = Diagonalizer::new(theta, 1.0, &c)?;
        let id = d.p * d.p_inv;
        inv_err = inv_err.max((id - nalgebra::Matrix2::identity()).iter().map(|v| v.norm()).fold(0.0, f64::max));
        let m = d.p_inv * d.system_matrix(&c) * d.p;
        let target = [Complex64::new(0.0, mu), Complex64::new(0.0, -mu)];
        let off = m[(0, 1)].norm().max(m[(1, 0)].norm());
        let on = (m[(0, 0)] - target[0]).norm().max((m[(1, 1)] - target[1]).norm());
        diag_err = diag_err.max(off.max(on) / l6.abs().max(1.0));
    }

    let pass = factorization.iter().all(|r| r["pass"] == json!(true))
        && m_conjugation.pass == Some(true)
        && j_residual < 1e-10
        && inv_err < 1e-10
        && diag_err < 1e-10;
    let report = json!({
        "factorization": factorization,
        "m_conjugation": m_conjugation,
        "j_commutation_residual": j_residual,
        "diagonalizer": {"draws": draws, "seed": ctx.seed, "max_inverse_error": inv_err, "max_diagonal_error": diag_err},
        "pass": pass,
    });
    ctx.write_json("identity_check.json", &report)?;
    Ok(report)
}

fn fit_reports(traj: &Trajectory, window: Option<(f64, f64)>, columns: &[&str]) -> Vec<FitReport> {
    let times = traj.times();
    let window = window.unwrap_or_else(|| {
        let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    columns
        .iter()
        .filter_map(|col| {
            let values = traj.column(col).ok()?;
            match fit_decay_rate(&times, &values, window) {
                Ok(fit) => Some(FitReport::new(col, &fit, None)),
                Err(e) => {
                    log::warn!("no fit for {col}: {e}");
                    None
                }
            }
        })
        .collect()
}

fn simulate(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<Value> {
    let coeffs = cfg.coefficients()?;
    let r = &cfg.run;
    let traj = match r.mode {
        Mode::Physical => {
            let init = cfg.initial_pair(r.t0)?;
            solve_cauchy(&init, &cfg.solver_config(Mode::Physical, r.t0, r.t1), &coeffs)?
        }
        Mode::ProfileFrame => {
            let t0 = r.t0.max(1.0);
            let v = match (&cfg.data.final_data, &cfg.data.initial) {
                (Some(_), _) => {
                    // Seed on the asymptotic profile at t0.
                    let data = cfg.final_data(&coeffs)?;
                    let grid = *data.grid();
                    FieldPair::new(
                        Field::new(grid, Space::Frequency, eval_f1(t0, &data, &coeffs))?,
                        Field::new(grid, Space::Frequency, eval_f2(t0, &data, &coeffs)?)?,
                        t0,
                    )?
                }
                (None, Some(_)) => {
                    let u = cfg.initial_pair(t0)?;
                    let s = Spectral::new(*u.grid());
                    let to_v = |f: &Field| s.cft(&s.free_propagate(f, -t0)?);
                    FieldPair::new(to_v(&u.u1)?, to_v(&u.u2)?, t0)?
                }
                (None, None) => return Err(Error::Config("profile frame needs data.final_data or data.initial".into())),
            };
            solve_profile_frame(&v, &cfg.solver_config(Mode::ProfileFrame, t0, r.t1), &coeffs)?
        }
    };
    ctx.write_trajectory(&traj)?;
    let fits = fit_reports(&traj, r.fit_window, &["linf_u1", "linf_u2"]);
    ctx.write_json("fits.json", &fits)?;
    Ok(json!({"samples": traj.observables.len(), "fits": fits}))
}

fn final_state(cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<Value> {
    let coeffs = cfg.coefficients()?;
    coeffs.require_deceleration()?;
    let r = &cfg.run;
    let (t_final, t_max) = match (r.T, r.T_max) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Config("final-state runs need run.T and run.T_max".into())),
    };
    let data = cfg.final_data(&coeffs)?;
    let mut solver = cfg.solver_config(Mode::Physical, t_max, t_final);
    if solver.snapshot_times.is_empty() {
        solver.snapshot_times = log_spaced(t_final, t_max, 32);
    }
    let traj = solve_final_state(&data, &coeffs, t_final, t_max, &solver)?;
    ctx.write_trajectory(&traj)?;

    let times = traj.times();
    let bounded = |col: &str, exponent: f64| -> Result<Value> {
        let e = traj.column(col)?;
        let scaled: Vec<f64> = e.iter().zip(&times).map(|(v, t)| v * t.powf(exponent)).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(json!({"quantity": col, "weight_exponent": exponent, "max_over_min": max / min}))
    };
    let mask = check_nonvanishing(&data, &coeffs)?;
    let window = r.fit_window.unwrap_or((t_final, t_max));
    let fits = fit_reports(&traj, Some(window), &["linf_u2", "errlinf_1", "errlinf_2"]);
    let report = json!({
        "T": t_final,
        "T_max": t_max,
        "nu": r.nu,
        "delta": r.delta,
        "nonvanishing_fraction": mask.iter().filter(|m| **m).count() as f64 / mask.len() as f64,
        "error_ratios": [bounded("errlinf_1", r.nu + 0.25)?, bounded("errlinf_2", r.nu + 0.25 - r.delta)?],
        "fits": fits,
    });
    ctx.write_json("final_state.json", &report)?;
    Ok(report)
}

fn rates(
    cfg: &ExperimentConfig,
    trajectory: Option<&Path>,
    columns: &[String],
    window: Option<&[f64]>,
    ctx: &mut Ctx,
) -> Result<Value> {
    let path = trajectory.ok_or_else(|| Error::Config("rates needs --trajectory PATH".into()))?;
    let traj = Trajectory::read_csv(File::open(path)?)?;
    let window = match window {
        Some([lo, hi]) => Some((*lo, *hi)),
        Some(_) => return Err(Error::Config("--window takes lo,hi".into())),
        None => cfg.run.fit_window,
    };
    let default_cols = ["linf_u1".to_owned(), "linf_u2".to_owned()];
    let cols = if columns.is_empty() { &default_cols[..] } else { columns };
    let times = traj.times();
    let window = window.unwrap_or_else(|| {
        (
            times.iter().copied().fold(f64::INFINITY, f64::min),
            times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    });
    let reports = cols
        .iter()
        .map(|col| Ok(FitReport::new(col, &fit_decay_rate(&times, &traj.column(col)?, window)?, None)))
        .collect::<Result<Vec<_>>>()?;
    ctx.write_json("rates.json", &reports)?;
    Ok(serde_json::to_value(&reports)?)
}

fn dispatch(command: &Command, cfg: &ExperimentConfig, ctx: &mut Ctx) -> Result<Value> {
    match command {
        Command::Regimes => regimes(cfg, ctx),
        Command::OdeCheck { ode_system } => ode_check(cfg, ode_system.as_deref(), ctx),
        Command::IdentityCheck => identity_check(ctx),
        Command::Simulate => simulate(cfg, ctx),
        Command::FinalState => final_state(cfg, ctx),
        Command::Rates {
            trajectory,
            column,
            window,
        } => rates(cfg, trajectory.as_deref(), column, window.as_deref(), ctx),
    }
}

/// One resolved run in `out`. Always leaves a manifest behind.
fn run_one(command: &Command, raw: Value, out: &Path, seed: u64) -> (i32, Value) {
    let resolved = ExperimentConfig::from_value(raw.clone());
    let resolved_value = resolved
        .as_ref()
        .ok()
        .and_then(|c| serde_json::to_value(c).ok())
        .unwrap_or(raw);
    let result = fs::create_dir_all(out).map_err(Error::from).and_then(|_| {
        let cfg = resolved?;
        cfg.validate()?;
        let mut ctx = Ctx {
            out,
            formats: &cfg.output.formats,
            seed,
            outputs: Vec::new(),
        };
        let summary = dispatch(command, &cfg, &mut ctx)?;
        Ok(Outcome {
            outputs: ctx.outputs,
            summary,
        })
    });
    let (code, status, outputs, summary) = match result {
        Ok(o) => (EXIT_OK, json!("ok"), o.outputs, o.summary),
        Err(e) => {
            let d = diagnostic(&e);
            eprintln!("{d}");
            (exit_code(&e), d, Vec::new(), Value::Null)
        }
    };
    let manifest = json!({
        "tool": "cubic-nls",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": command.name(),
        "seed": seed,
        "config": resolved_value,
        "status": status,
        "exit_code": code,
        "outputs": outputs,
        "summary": summary,
    });
    if fs::create_dir_all(out).is_ok() {
        if let Ok(file) = File::create(out.join("manifest.json")) {
            if let Err(e) = serde_json::to_writer_pretty(BufWriter::new(file), &manifest) {
                eprintln!("{}", json!({"error": "Io", "message": format!("manifest: {e}")}));
            }
        }
    }
    (code, manifest)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let user = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("{}", diagnostic(&e));
                return exit_code(&e);
            }
        },
        None => json!({}),
    };
    if !user.is_object() {
        let e = Error::Config("config must be a JSON object".into());
        eprintln!("{}", diagnostic(&e));
        return exit_code(&e);
    }
    let mut raw = serde_json::to_value(ExperimentConfig::default()).expect("default config serializes");
    merge(&mut raw, user);
    let base_out = cli
        .out
        .clone()
        .or_else(|| raw.pointer("/output/directory").and_then(Value::as_str).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.unwrap_or(0);

    let Some(sweep) = &cli.sweep else {
        return run_one(&cli.command, raw, &base_out, seed).0;
    };
    let (key, values) = match parse_sweep(sweep) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            return exit_code(&e);
        }
    };
    let jobs: Vec<(Value, PathBuf)> = match values
        .iter()
        .map(|v| {
            let mut cfg = raw.clone();
            set_path(&mut cfg, &key, v.clone())?;
            let label = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            Ok((cfg, base_out.join(format!("{key}={label}"))))
        })
        .collect::<Result<_>>()
    {
        Ok(j) => j,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            return exit_code(&e);
        }
    };
    let results: Vec<(i32, Value)> = jobs
        .into_par_iter()
        .map(|(cfg, dir)| run_one(&cli.command, cfg, &dir, seed))
        .collect();
    let index = json!({
        "sweep": {"key": key, "values": values},
        "runs": results.iter().map(|(code, m)| json!({"exit_code": code, "status": m["status"]})).collect::<Vec<_>>(),
        "config": raw,
    });
    let _ = fs::create_dir_all(&base_out).and_then(|_| {
        fs::write(base_out.join("manifest.json"), serde_json::to_string_pretty(&index).unwrap_or_default())
    });
    results.iter().map(|r| r.0).max().unwrap_or(EXIT_OK)
}
