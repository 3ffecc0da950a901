//! Command-line front end: a flat TOML configuration with flag overrides,
//! the family pipelines, diagnostics on field CSVs, and artifact export.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
//! 3 solver non-convergence, 4 failed diagnostic check.

use std::ffi::OsString;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analytic::{grim_reaper, tilt_slope, translator_residual, Tilt, TiltedReaperParams};
use crate::diagnostics::{
    asymptote_fit, curvature_signs, gauss_image_violation, morse_count_check, total_curvature,
    total_curvature_midpoint, AsymptoteFit, AsymptoteModel, DiagnosticsError, Side, SurfacePatch,
};
use crate::families::{
    center_value, estimate_scherk, inverse_w_integral, pitchfork_alpha, solve_helicoid_like, solve_pitchfork,
    solve_scherk_cell, solve_scherkenoid, FamilyError, GridDims, ScherkResult, ShootingConfig,
};
use crate::geometry::{Grid, PlanarDomain, ScalarField};
use crate::solver::{SolveError, SolveReport, SolverConfig};
use crate::surface::{
    assemble_periodic, complete_by_half_turn, graph_to_mesh, obj_bytes, ply_bytes, write_atomic, Family,
    MeshFormat, SurfaceError, SurfaceMesh,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Nodes per unit length when `--grid auto`.
pub const AUTO_DENSITY: f64 = 12.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    CheckFailed(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }
}

impl From<FamilyError> for CliError {
    fn from(e: FamilyError) -> Self {
        let msg = e.to_string();
        match e {
            FamilyError::InvalidParameter(_) | FamilyError::Geometry(_) | FamilyError::Analytic(_) => {
                CliError::Usage(msg)
            }
            FamilyError::Solve(SolveError::IllPosed(_))
            | FamilyError::Solve(SolveError::InvalidConfig(_))
            | FamilyError::Solve(SolveError::Geometry(_)) => CliError::Usage(msg),
            FamilyError::Solve(SolveError::NonConvergence(_))
            | FamilyError::Bracket { .. }
            | FamilyError::NotMonotone { .. }
            | FamilyError::FixedPointDivergence { .. }
            | FamilyError::ReaperProfile { .. } => CliError::NonConvergence(msg),
        }
    }
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        match e {
            SurfaceError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

// ---------------------------------------------------------------------------
// argument types

/// Parses reals, including multiples of π such as `pi/2`, `2pi`, `3*pi/4`
/// or `-π`, and `inf`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase().replace('π', "pi");
    if let Ok(v) = t.parse::<f64>() {
        return if v.is_nan() { Err(format!("'{s}' is not a number")) } else { Ok(v) };
    }
    let bad = || format!("cannot parse '{s}' as a real (examples: 1.5, pi/2, 2pi, 3*pi/4)");
    let (pre, post) = t.split_once("pi").ok_or_else(bad)?;
    let pre = pre.trim().trim_end_matches('*').trim();
    let factor = match pre {
        "" | "+" => 1.0,
        "-" => -1.0,
        p => p.parse::<f64>().map_err(|_| bad())?,
    };
    let post = post.trim();
    let divisor = if post.is_empty() {
        1.0
    } else {
        let d = post.strip_prefix('/').ok_or_else(bad)?;
        d.trim().parse::<f64>().map_err(|_| bad())?
    };
    let v = factor * PI / divisor;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Comma-separated reals.
#[derive(Clone, Debug, PartialEq)]
pub struct RealList(pub Vec<f64>);

pub fn parse_list(s: &str) -> Result<RealList, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_real)
        .collect::<Result<Vec<_>, _>>()
        .map(RealList)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridSpec {
    /// [`AUTO_DENSITY`] nodes per unit length.
    Auto,
    Dims(usize, usize),
}

pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let t = s.trim().to_ascii_lowercase();
    if t == "auto" {
        return Ok(GridSpec::Auto);
    }
    let (a, b) = t
        .split_once('x')
        .ok_or_else(|| format!("grid '{s}' must look like NxM (e.g. 65x33) or 'auto'"))?;
    let n = a.trim().parse::<usize>().map_err(|_| format!("bad node count in grid '{s}'"))?;
    let m = b.trim().parse::<usize>().map_err(|_| format!("bad node count in grid '{s}'"))?;
    if n < 3 || m < 3 {
        return Err(format!("grid '{s}' needs at least 3 nodes per direction"));
    }
    Ok(GridSpec::Dims(n, m))
}

impl GridSpec {
    fn dims(self, length: f64, height: f64) -> GridDims {
        match self {
            GridSpec::Dims(n, m) => (n, m),
            GridSpec::Auto => {
                let n = ((length * AUTO_DENSITY) as usize + 1).max(3);
                let m = (((height * AUTO_DENSITY) as usize) | 1).max(3);
                (n, m)
            }
        }
    }
}

pub fn parse_copies(s: &str) -> Result<(usize, usize), String> {
    let t = s.trim().to_ascii_lowercase();
    let (a, b) = t.split_once('x').unwrap_or((t.as_str(), "1"));
    let n1 = a.trim().parse::<usize>().map_err(|_| format!("bad copies '{s}' (expected N or NxM)"))?;
    let n2 = b.trim().parse::<usize>().map_err(|_| format!("bad copies '{s}' (expected N or NxM)"))?;
    if n1 == 0 || n2 == 0 {
        return Err(format!("copies '{s}' must be positive"));
    }
    Ok((n1, n2))
}

fn parse_format(s: &str) -> Result<MeshFormat, String> {
    s.parse()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExactSurface {
    GrimReaper,
    TiltedReaper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    ResidualRefinement,
    CurvatureSign,
    TotalCurvature,
    GaussImage,
    Morse,
    Asymptote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    Scherk,
    Scherkenoid,
    HelicoidLike,
    Pitchfork,
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "translators", version, about = "Scherk-like translators for mean curvature flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the grim reaper or a tilted grim reaper.
    Exact(Flags),
    /// Scherk translator: L(α, w) by shooting over an h schedule.
    Scherk(Flags),
    /// Scherkenoid over a truncated parallelogram.
    Scherkenoid(Flags),
    /// Helicoid-like translator with self-consistent axis.
    Helicoid(Flags),
    /// Pitchfork (near-π scherkenoid piece).
    Pitchfork(Flags),
    /// Run checks on a field CSV.
    Diagnose(Flags),
    /// Assemble a mesh from a field CSV.
    Mesh(Flags),
}

/// All commands share one flat flag set mirroring the configuration file;
/// each command rejects flags it does not use.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// Corner angle in (0, π); accepts forms like pi/2.
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Strip width.
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    pub w: Option<f64>,
    /// Cell length (Scherk) or sampled x-extent (exact).
    #[arg(long = "L", value_parser = parse_real, allow_negative_numbers = true)]
    pub l: Option<f64>,
    /// Boundary height.
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Increasing h schedule, comma separated.
    #[arg(long = "h-list", value_parser = parse_list)]
    pub h_list: Option<RealList>,
    /// Widths for a Scherk sweep, comma separated.
    #[arg(long = "w-list", value_parser = parse_list)]
    pub w_list: Option<RealList>,
    /// Grid nodes NxM, or auto.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    /// Truncation length (c for scherkenoids, half-length a otherwise).
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    pub trunc: Option<f64>,
    /// Surrogate magnitude for infinite boundary values.
    #[arg(long = "H", value_parser = parse_real, allow_negative_numbers = true)]
    pub big_h: Option<f64>,
    /// Newton residual tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Mesh format: obj or ply.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<MeshFormat>,
    /// Concurrent sweep entries.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Flat TOML file; flags win over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub surface: Option<ExactSurface>,
    /// Nodes per direction for exact samples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Tilt sign of a tilted grim reaper, 1 or -1.
    #[arg(long, allow_negative_numbers = true)]
    pub sign: Option<i32>,
    /// Append exact gradient columns u_x,u_y to exact samples.
    #[arg(long)]
    pub gradient: bool,
    /// Repeated blocks N or NxM in the assembled mesh.
    #[arg(long, value_parser = parse_copies)]
    pub copies: Option<(usize, usize)>,
    /// Field CSV to read.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Checks to run, comma separated or repeated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub check: Vec<CheckKind>,
    /// Sublevel for the Morse check (inf for the whole patch).
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    pub level: Option<f64>,
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyKind>,
    /// Axis offset of a helicoid-like piece.
    #[arg(long = "x-hat", value_parser = parse_real, allow_negative_numbers = true)]
    pub x_hat: Option<f64>,
}

impl Flags {
    fn set_names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut add = |name, set: bool| {
            if set {
                v.push(name)
            }
        };
        add("alpha", self.alpha.is_some());
        add("w", self.w.is_some());
        add("L", self.l.is_some());
        add("h", self.h.is_some());
        add("h-list", self.h_list.is_some());
        add("w-list", self.w_list.is_some());
        add("grid", self.grid.is_some());
        add("trunc", self.trunc.is_some());
        add("H", self.big_h.is_some());
        add("tol", self.tol.is_some());
        add("out", self.out.is_some());
        add("format", self.format.is_some());
        add("jobs", self.jobs.is_some());
        add("config", self.config.is_some());
        add("surface", self.surface.is_some());
        add("n", self.n.is_some());
        add("sign", self.sign.is_some());
        add("gradient", self.gradient);
        add("copies", self.copies.is_some());
        add("field", self.field.is_some());
        add("check", !self.check.is_empty());
        add("level", self.level.is_some());
        add("side", self.side.is_some());
        add("family", self.family.is_some());
        add("x-hat", self.x_hat.is_some());
        v
    }

    fn reject_unused(&self, command: &str, allowed: &[&str]) -> Result<(), CliError> {
        for name in self.set_names() {
            if name != "config" && !allowed.contains(&name) {
                return Err(usage(format!("--{name} does not apply to `{command}`")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// configuration file

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RealValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RealValue {
    fn get(&self, key: &str) -> Result<f64, CliError> {
        match self {
            RealValue::Int(i) => Ok(*i as f64),
            RealValue::Float(f) => Ok(*f),
            RealValue::Text(s) => parse_real(s).map_err(|e| usage(format!("config key {key}: {e}"))),
        }
    }
}

/// Keys of the flat configuration file; names follow the long flags, with
/// `-` written as `_`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    alpha: Option<RealValue>,
    w: Option<RealValue>,
    #[serde(rename = "L")]
    l: Option<RealValue>,
    h: Option<RealValue>,
    h_list: Option<Vec<RealValue>>,
    w_list: Option<Vec<RealValue>>,
    grid: Option<String>,
    trunc: Option<RealValue>,
    #[serde(rename = "H")]
    big_h: Option<RealValue>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    format: Option<String>,
    jobs: Option<usize>,
    surface: Option<String>,
    n: Option<usize>,
    sign: Option<i32>,
    gradient: Option<bool>,
    copies: Option<String>,
    field: Option<PathBuf>,
    check: Option<Vec<String>>,
    level: Option<RealValue>,
    side: Option<String>,
    family: Option<String>,
    x_hat: Option<RealValue>,
}

fn value_enum<T: ValueEnum>(key: &str, s: &str) -> Result<T, CliError> {
    T::from_str(s, true).map_err(|e| usage(format!("config key {key}: {e}")))
}

/// Fills every flag left unset from the configuration file, if any.
pub fn resolve(mut f: Flags) -> Result<Flags, CliError> {
    let Some(path) = f.config.clone() else {
        return Ok(f);
    };
    let text = fs::read_to_string(&path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let c: ConfigFile = toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let real = |key: &str, v: &Option<RealValue>| v.as_ref().map(|r| r.get(key)).transpose();
    let list = |key: &str, v: &Option<Vec<RealValue>>| {
        v.as_ref()
            .map(|l| l.iter().map(|r| r.get(key)).collect::<Result<Vec<_>, _>>().map(RealList))
            .transpose()
    };
    let wrap = |key: &str, e: String| usage(format!("config key {key}: {e}"));
    if f.alpha.is_none() {
        f.alpha = real("alpha", &c.alpha)?;
    }
    if f.w.is_none() {
        f.w = real("w", &c.w)?;
    }
    if f.l.is_none() {
        f.l = real("L", &c.l)?;
    }
    if f.h.is_none() {
        f.h = real("h", &c.h)?;
    }
    if f.h_list.is_none() {
        f.h_list = list("h_list", &c.h_list)?;
    }
    if f.w_list.is_none() {
        f.w_list = list("w_list", &c.w_list)?;
    }
    if f.grid.is_none() {
        f.grid = c.grid.as_deref().map(parse_grid).transpose().map_err(|e| wrap("grid", e))?;
    }
    if f.trunc.is_none() {
        f.trunc = real("trunc", &c.trunc)?;
    }
    if f.big_h.is_none() {
        f.big_h = real("H", &c.big_h)?;
    }
    f.tol = f.tol.or(c.tol);
    if f.out.is_none() {
        // relative to the config file, so a config describes a run wherever it is invoked
        f.out = c.out.map(|o| match path.parent() {
            Some(dir) if o.is_relative() => dir.join(o),
            _ => o,
        });
    }
    if f.format.is_none() {
        f.format = c.format.as_deref().map(parse_format).transpose().map_err(|e| wrap("format", e))?;
    }
    f.jobs = f.jobs.or(c.jobs);
    if f.surface.is_none() {
        f.surface = c.surface.as_deref().map(|s| value_enum("surface", s)).transpose()?;
    }
    f.n = f.n.or(c.n);
    f.sign = f.sign.or(c.sign);
    f.gradient = f.gradient || c.gradient.unwrap_or(false);
    if f.copies.is_none() {
        f.copies = c.copies.as_deref().map(parse_copies).transpose().map_err(|e| wrap("copies", e))?;
    }
    if f.field.is_none() {
        f.field = c.field.map(|o| match path.parent() {
            Some(dir) if o.is_relative() => dir.join(o),
            _ => o,
        });
    }
    if f.check.is_empty() {
        if let Some(list) = &c.check {
            f.check = list.iter().map(|s| value_enum("check", s)).collect::<Result<_, _>>()?;
        }
    }
    if f.level.is_none() {
        f.level = real("level", &c.level)?;
    }
    if f.side.is_none() {
        f.side = c.side.as_deref().map(|s| value_enum("side", s)).transpose()?;
    }
    if f.family.is_none() {
        f.family = c.family.as_deref().map(|s| value_enum("family", s)).transpose()?;
    }
    if f.x_hat.is_none() {
        f.x_hat = real("x_hat", &c.x_hat)?;
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// validation helpers

fn need<T>(name: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("--{name} is required")))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn angle(v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v < PI {
        Ok(v)
    } else {
        Err(usage(format!("--alpha must lie in (0, π), got {v}")))
    }
}

fn width_at_least_pi(w: f64) -> Result<f64, CliError> {
    if w.is_finite() && w >= PI {
        Ok(w)
    } else {
        Err(usage(format!("--w must satisfy w >= π (tilted grim reapers need width w >= π), got {w}")))
    }
}

fn width_below_pi(w: f64) -> Result<f64, CliError> {
    if w.is_finite() && w > 0.0 && w < PI {
        Ok(w)
    } else {
        Err(usage(format!("--w must satisfy 0 < w < π, got {w}")))
    }
}

fn solver_config(tol: Option<f64>) -> Result<SolverConfig, CliError> {
    let cfg = SolverConfig {
        tolerance: tol.unwrap_or(SolverConfig::default().tolerance),
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn out_dir(f: &Flags) -> Result<PathBuf, CliError> {
    let dir = need("out", f.out.clone())?;
    if dir.is_file() {
        return Err(usage(format!("--out {} is a file; this command writes a directory", dir.display())));
    }
    Ok(dir)
}

// ---------------------------------------------------------------------------
// artifacts

/// Files produced by a command, written only after every computation
/// succeeded.
#[derive(Default)]
struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn write(self) -> Result<(), CliError> {
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            write_atomic(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("reports serialize");
    b.push(b'\n');
    b
}

/// Field CSV: header `x,y,u`, one row per node, `i` fastest.
pub fn field_csv(u: &ScalarField) -> Vec<u8> {
    let g = u.grid;
    let mut s = String::from("x,y,u\n");
    for j in 0..g.n_t {
        for i in 0..g.n_s {
            let [x, y] = g.node_xy(i, j);
            let _ = writeln!(s, "{x},{y},{}", u.get(i, j));
        }
    }
    s.into_bytes()
}

fn mesh_bytes(mesh: &SurfaceMesh, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::Obj => obj_bytes(mesh),
        MeshFormat::Ply => ply_bytes(mesh),
    }
}

fn mesh_name(format: MeshFormat) -> &'static str {
    match format {
        MeshFormat::Obj => "mesh.obj",
        MeshFormat::Ply => "mesh.ply",
    }
}

/// Reads a field CSV back onto its grid. Rows must be the nodes of a
/// parallelogram grid with horizontal bottom edge, row-major.
pub fn read_field_csv(path: &Path) -> Result<ScalarField, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read field {}: {e}", path.display())))?;
    let bad = |msg: String| usage(format!("field {}: {msg}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[..3] != ["x", "y", "u"] {
        return Err(bad(format!("header must start with x,y,u, got '{header}'")));
    }
    let mut pts: Vec<[f64; 3]> = Vec::new();
    for (k, line) in lines {
        let vals: Vec<&str> = line.split(',').map(str::trim).collect();
        if vals.len() != cols.len() {
            return Err(bad(format!("line {} has {} columns, header has {}", k + 1, vals.len(), cols.len())));
        }
        let mut p = [0.0; 3];
        for (c, v) in p.iter_mut().zip(&vals) {
            *c = v
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("line {}: '{v}' is not a finite number", k + 1)))?;
        }
        pts.push(p);
    }
    if pts.len() < 9 {
        return Err(bad(format!("need at least 3x3 nodes, got {} rows", pts.len())));
    }
    let scale = pts.iter().fold(1.0_f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    let tol = 1e-9 * scale;
    let y0 = pts[0][1];
    let n_s = pts.iter().take_while(|p| (p[1] - y0).abs() <= tol).count();
    if n_s < 3 || pts.len() % n_s != 0 {
        return Err(bad(format!("{} rows do not form a grid with {n_s} nodes per row", pts.len())));
    }
    let n_t = pts.len() / n_s;
    if n_t < 3 {
        return Err(bad(format!("need at least 3 grid rows, got {n_t}")));
    }
    let o = pts[0];
    let length = pts[n_s - 1][0] - o[0];
    let top = pts[(n_t - 1) * n_s];
    let w = top[1] - o[1];
    if !(length > 0.0 && w > 0.0) {
        return Err(bad("rows must run in increasing x, then increasing y".into()));
    }
    let alpha = 1.0_f64.atan2((top[0] - o[0]) / w);
    let domain = PlanarDomain::parallelogram(alpha, w, length)
        .map_err(|e| bad(e.to_string()))?
        .translated(o[0], o[1]);
    let grid = Grid::new(domain, n_s, n_t).map_err(|e| bad(e.to_string()))?;
    let node_tol = 1e-7 * scale;
    for (k, p) in pts.iter().enumerate() {
        let (i, j) = grid.ij(k);
        let [x, y] = grid.node_xy(i, j);
        if (x - p[0]).abs() > node_tol || (y - p[1]).abs() > node_tol {
            return Err(bad(format!(
                "row {} at ({}, {}) is off the regular grid (expected ({x}, {y}))",
                k + 2,
                p[0],
                p[1]
            )));
        }
    }
    ScalarField::new(grid, pts.iter().map(|p| p[2]).collect()).map_err(|e| bad(e.to_string()))
}

// ---------------------------------------------------------------------------
// shared report pieces

fn solver_json(r: &SolveReport) -> Value {
    json!({
        "converged": r.converged,
        "iterations": r.iterations,
        "final_residual": r.final_residual,
        "damping_events": r.damping_events,
        "continuation_stages": r.continuation_stages,
    })
}

fn curvature_json(u: &ScalarField) -> Value {
    let s = curvature_signs(u);
    json!({
        "interior_nodes": s.negative + s.zero_or_positive,
        "negative": s.negative,
        "zero_or_positive": s.zero_or_positive,
        "negative_fraction": s.negative_fraction(),
        "max_curvature": s.max_curvature,
    })
}

fn fit_json(fit: Result<AsymptoteFit, DiagnosticsError>) -> Value {
    match fit {
        Ok(f) => serde_json::to_value(f).expect("fit serializes"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn grid_json(u: &ScalarField) -> Value {
    json!([u.grid.n_s, u.grid.n_t])
}

/// Largest `∂u/∂x` over interior nodes where `keep(x, y)` holds.
fn max_slope_x(u: &ScalarField, keep: impl Fn(f64, f64) -> bool) -> Option<f64> {
    let g = u.grid;
    let mut best: Option<f64> = None;
    for j in 1..g.n_t - 1 {
        for i in 1..g.n_s - 1 {
            let [x, y] = g.node_xy(i, j);
            if keep(x, y) {
                let ux = u.gradient(i, j)[0];
                best = Some(best.map_or(ux, |b: f64| b.max(ux)));
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// commands

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{}", String::from_utf8_lossy(&json_bytes(&report)));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command. Returns the report printed on success; a failed
/// check still writes its report before returning [`CliError::CheckFailed`].
pub fn run(cli: Cli) -> Result<Value, CliError> {
    match cli.command {
        Command::Exact(f) => cmd_exact(f),
        Command::Scherk(f) => cmd_scherk(f),
        Command::Scherkenoid(f) => cmd_scherkenoid(f),
        Command::Helicoid(f) => cmd_helicoid(f),
        Command::Pitchfork(f) => cmd_pitchfork(f),
        Command::Diagnose(f) => cmd_diagnose(f),
        Command::Mesh(f) => cmd_mesh(f),
    }
}

/// Samples at `n_s` closed nodes in `x ∈ [-L/2, L/2]` and `n_t`
/// cell-centered rows in `y ∈ (0, w)`, so every node lies inside the strip.
pub fn cmd_exact(f: Flags) -> Result<Value, CliError> {
    f.reject_unused("exact", &["surface", "w", "sign", "n", "grid", "L", "out", "format", "gradient"])?;
    let f = resolve(f)?;
    let surface = need("surface", f.surface)?;
    let (w, tilt) = match surface {
        ExactSurface::GrimReaper => {
            if let Some(w) = f.w.filter(|w| (w - PI).abs() > 1e-12) {
                return Err(usage(format!("the grim reaper has width π; got --w {w}")));
            }
            if f.sign.is_some() {
                return Err(usage("--sign applies to the tilted reaper only"));
            }
            (PI, Tilt::Down)
        }
        ExactSurface::TiltedReaper => {
            let w = width_at_least_pi(need("w", f.w)?)?;
            let sign = f.sign.unwrap_or(-1);
            let tilt = Tilt::from_sign(sign).ok_or_else(|| usage(format!("--sign must be 1 or -1, got {sign}")))?;
            (w, tilt)
        }
    };
    let (n_s, n_t) = match (f.grid, f.n) {
        (Some(_), Some(_)) => return Err(usage("give either --n or --grid, not both")),
        (Some(GridSpec::Dims(a, b)), None) => (a, b),
        (Some(GridSpec::Auto), None) => return Err(usage("exact samples need --n or --grid NxM")),
        (None, n) => {
            let n = n.unwrap_or(64);
            if n < 3 {
                return Err(usage(format!("--n must be at least 3, got {n}")));
            }
            (n, n)
        }
    };
    let l = positive("L", f.l.unwrap_or(w))?;
    let out = need("out", f.out.clone())?;
    if out.is_dir() {
        return Err(usage(format!("--out {} is a directory; exact writes a CSV file", out.display())));
    }

    let dy = w / n_t as f64;
    let domain = PlanarDomain::rectangle(-0.5 * l, 0.5 * l, 0.5 * dy, w - 0.5 * dy).map_err(|e| usage(e.to_string()))?;
    let grid = Grid::new(domain, n_s, n_t).map_err(|e| usage(e.to_string()))?;
    let params = TiltedReaperParams::new(w, tilt).map_err(|e| usage(e.to_string()))?;
    let eval = |x: f64, y: f64| -> Result<(f64, f64, f64), CliError> {
        match surface {
            ExactSurface::GrimReaper => {
                let z = grim_reaper(x, y).map_err(|e| usage(e.to_string()))?;
                Ok((z, 0.0, y.cos() / y.sin()))
            }
            ExactSurface::TiltedReaper => params.eval(x, y).map_err(|e| usage(e.to_string())),
        }
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut csv = String::from(if f.gradient { "x,y,u,u_x,u_y\n" } else { "x,y,u\n" });
    for j in 0..n_t {
        for i in 0..n_s {
            let [x, y] = grid.node_xy(i, j);
            let (z, zx, zy) = eval(x, y)?;
            values.push(z);
            if f.gradient {
                let _ = writeln!(csv, "{x},{y},{z},{zx},{zy}");
            } else {
                let _ = writeln!(csv, "{x},{y},{z}");
            }
        }
    }
    let field = ScalarField::new(grid, values).map_err(|e| usage(e.to_string()))?;
    let mut art = Artifacts::default();
    art.add(out.clone(), csv.into_bytes());
    let mut mesh_path = Value::Null;
    if let Some(format) = f.format {
        let p = out.with_extension(match format {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        });
        mesh_path = json!(p.display().to_string());
        art.add(p, mesh_bytes(&graph_to_mesh(&field), format));
    }
    art.write()?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "exact",
        "surface": match surface { ExactSurface::GrimReaper => "grim-reaper", ExactSurface::TiltedReaper => "tilted-reaper" },
        "w": w,
        "slope_x": tilt.sign() * tilt_slope(w),
        "grid": grid_json(&field),
        "rows": grid.len(),
        "csv": out.display().to_string(),
        "mesh": mesh_path,
    }))
}

fn scherk_entry(r: &ScherkResult) -> Value {
    json!({
        "alpha": r.alpha,
        "w": r.w,
        "h_schedule": r.h_schedule,
        "L_per_h": r.l_per_h,
        "L_estimate": r.l_estimate,
        "flux_lhs": r.identity.flux_lhs,
        "flux_rhs": r.identity.flux_rhs,
        "mismatch": r.identity.mismatch,
        "mismatch_per_h": r.identity_per_h.iter().map(|i| i.mismatch).collect::<Vec<_>>(),
    })
}

pub fn cmd_scherk(f: Flags) -> Result<Value, CliError> {
    f.reject_unused(
        "scherk",
        &["alpha", "w", "w-list", "L", "h", "h-list", "grid", "tol", "out", "format", "jobs", "copies"],
    )?;
    let f = resolve(f)?;
    let alpha = angle(f.alpha.unwrap_or(FRAC_PI_2))?;
    let cfg = solver_config(f.tol)?;
    let grid = f.grid.unwrap_or(GridSpec::Dims(65, 33));
    let dims = match grid {
        GridSpec::Dims(a, b) => (a, b),
        GridSpec::Auto => (65, 33),
    };
    let dir = out_dir(&f)?;
    let format = f.format.unwrap_or(MeshFormat::Obj);
    let copies = f.copies.unwrap_or((1, 1));

    if let Some(RealList(ws)) = &f.w_list {
        if f.w.is_some() || f.l.is_some() || f.h.is_some() || f.copies.is_some() || f.format.is_some() {
            return Err(usage("--w-list sweeps take only --alpha, --h-list, --grid, --tol, --jobs and --out"));
        }
        if ws.is_empty() {
            return Err(usage("--w-list is empty"));
        }
        for &w in ws {
            width_below_pi(positive("w", w)?)?;
        }
        let hs = f.h_list.clone().map(|l| l.0).unwrap_or_else(|| vec![4.0, 6.0, 8.0]);
        check_schedule(&hs)?;
        let jobs = f.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?;
        let shoot = ShootingConfig::default();
        let results: Vec<Result<ScherkResult, FamilyError>> =
            pool.install(|| ws.par_iter().map(|&w| estimate_scherk(alpha, w, &hs, dims, &cfg, &shoot)).collect());
        let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let mut csv = String::from("w,L_estimate\n");
        for r in &results {
            let _ = writeln!(csv, "{},{}", r.w, r.l_estimate);
        }
        let increasing = results.windows(2).all(|p| p[1].w <= p[0].w || p[1].l_estimate > p[0].l_estimate);
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "scherk",
            "sweep": "w",
            "alpha": alpha,
            "grid": [dims.0, dims.1],
            "tol": cfg.tolerance,
            "entries": results.iter().map(scherk_entry).collect::<Vec<_>>(),
            "monotone_increasing": increasing,
        });
        let mut art = Artifacts::default();
        art.add(dir.join("sweep.csv"), csv.into_bytes());
        art.add(dir.join("report.json"), json_bytes(&report));
        art.write()?;
        return Ok(report);
    }

    let w = width_below_pi(positive("w", need("w", f.w)?)?)?;
    if f.jobs.is_some() {
        return Err(usage("--jobs applies to --w-list sweeps"));
    }
    let (field, mut report) = if let Some(l) = f.l {
        if f.h_list.is_some() {
            return Err(usage("give --h with --L; --h-list drives the L search"));
        }
        let l = positive("L", l)?;
        let h = positive("h", need("h", f.h)?)?;
        let (u, rep) = solve_scherk_cell(alpha, w, l, h, dims, &cfg)?;
        let identity = crate::families::IdentityReport::evaluate(&u)?;
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "command": "scherk",
            "alpha": alpha,
            "w": w,
            "L": l,
            "h": h,
            "center_value": center_value(&u)?,
            "flux_lhs": identity.flux_lhs,
            "flux_rhs": identity.flux_rhs,
            "mismatch": identity.mismatch,
            "solver": solver_json(&rep),
        });
        (u, report)
    } else {
        if f.h.is_some() {
            return Err(usage("--h needs --L; use --h-list for the L search"));
        }
        let hs = f.h_list.clone().map(|l| l.0).unwrap_or_else(|| vec![4.0, 6.0, 8.0]);
        check_schedule(&hs)?;
        let r = estimate_scherk(alpha, w, &hs, dims, &cfg, &ShootingConfig::default())?;
        let mut report = scherk_entry(&r);
        report["schema_version"] = json!(SCHEMA_VERSION);
        report["command"] = json!("scherk");
        (r.field, report)
    };
    report["grid"] = grid_json(&field);
    report["tol"] = json!(cfg.tolerance);
    report["curvature"] = curvature_json(&field);
    let corners = field.grid.domain.corners();
    let mesh = assemble_periodic(&graph_to_mesh(&field), Family::Scherk { corners }, copies)?;
    report["mesh"] = json!({ "copies": [copies.0, copies.1], "vertices": mesh.vertex_count(), "periods": mesh.periods });
    let mut art = Artifacts::default();
    art.add(dir.join("field.csv"), field_csv(&field));
    art.add(dir.join("report.json"), json_bytes(&report));
    art.add(dir.join(mesh_name(format)), mesh_bytes(&mesh, format));
    art.write()?;
    Ok(report)
}

fn check_schedule(hs: &[f64]) -> Result<(), CliError> {
    if hs.len() < 3 {
        return Err(usage(format!("--h-list needs at least 3 entries, got {}", hs.len())));
    }
    for &h in hs {
        positive("h-list", h)?;
    }
    if hs.windows(2).any(|p| p[1] <= p[0]) {
        return Err(usage("--h-list must be strictly increasing"));
    }
    Ok(())
}

/// Curvature, total curvature and Gauss-image fields shared by the
/// scherkenoid and pitchfork reports.
fn tilted_family_json(u: &ScalarField, w: f64) -> Result<Value, CliError> {
    let domain = u.grid.domain;
    let tc = total_curvature(u, &domain).map_err(|e| usage(e.to_string()))?;
    let target = 2.0 * (PI / w).asin();
    Ok(json!({
        "curvature": curvature_json(u),
        "total_curvature": tc,
        "total_curvature_midpoint": total_curvature_midpoint(u, &domain).map_err(|e| usage(e.to_string()))?,
        "total_curvature_target": target,
        "total_curvature_relative_gap": (tc - target).abs() / target,
        "gauss_image_violation": gauss_image_violation(u, w),
    }))
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

pub fn cmd_scherkenoid(f: Flags) -> Result<Value, CliError> {
    f.reject_unused("scherkenoid", &["alpha", "w", "trunc", "h", "grid", "tol", "out", "format", "copies"])?;
    let f = resolve(f)?;
    let alpha = angle(f.alpha.unwrap_or(FRAC_PI_2))?;
    let w = width_at_least_pi(need("w", f.w)?)?;
    let c = positive("trunc", need("trunc", f.trunc)?)?;
    if c < w {
        return Err(usage(format!("--trunc must be at least the width w = {w}, got {c}")));
    }
    let h = positive("h", f.h.unwrap_or(20.0))?;
    let cfg = solver_config(f.tol)?;
    let dims = f.grid.unwrap_or(GridSpec::Auto).dims(c, w);
    let dir = out_dir(&f)?;
    let format = f.format.unwrap_or(MeshFormat::Obj);
    let copies = f.copies.unwrap_or((2, 1));
    if copies.1 != 1 {
        return Err(usage("scherkenoids are singly periodic: --copies takes N or Nx1"));
    }

    let (u, rep) = solve_scherkenoid(alpha, w, c, h, dims, &cfg)?;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "scherkenoid",
        "alpha": alpha,
        "w": w,
        "trunc": c,
        "h": h,
        "grid": grid_json(&u),
        "tol": cfg.tolerance,
        "solver": solver_json(&rep),
        "max_slope_x_beyond_1": max_slope_x(&u, |x, _| x > 1.0),
        "slope_limit": -tilt_slope(w),
        "asymptote_fits": { "right": fit_json(asymptote_fit(&u, Side::Right, AsymptoteModel::TiltedReaper { w })) },
    });
    merge(&mut report, tilted_family_json(&u, w)?);
    let nominal = PlanarDomain::parallelogram(alpha, w, c).map_err(|e| usage(e.to_string()))?;
    let piece = graph_to_mesh(&u).with_outline(nominal.corners().to_vec());
    let mesh = assemble_periodic(&piece, Family::Scherkenoid { alpha, w }, copies)?;
    report["mesh"] = json!({ "copies": copies.0, "vertices": mesh.vertex_count(), "periods": mesh.periods });
    let mut art = Artifacts::default();
    art.add(dir.join("field.csv"), field_csv(&u));
    art.add(dir.join("report.json"), json_bytes(&report));
    art.add(dir.join(mesh_name(format)), mesh_bytes(&mesh, format));
    art.write()?;
    Ok(report)
}

pub fn cmd_helicoid(f: Flags) -> Result<Value, CliError> {
    f.reject_unused("helicoid", &["w", "trunc", "H", "grid", "tol", "out", "format", "copies"])?;
    let f = resolve(f)?;
    let w = width_below_pi(need("w", f.w)?)?;
    let a = positive("trunc", need("trunc", f.trunc)?)?;
    let big_h = positive("H", f.big_h.unwrap_or(16.0))?;
    let cfg = solver_config(f.tol)?;
    let dims = f.grid.unwrap_or(GridSpec::Auto).dims(2.0 * a, w);
    let dir = out_dir(&f)?;
    let format = f.format.unwrap_or(MeshFormat::Obj);
    let copies = f.copies.unwrap_or((2, 1));
    if copies.1 != 1 {
        return Err(usage("helicoid-like translators are singly periodic: --copies takes N or Nx1"));
    }

    let r = solve_helicoid_like(w, a, big_h, dims, &cfg)?;
    let u = &r.field;
    let domain = u.grid.domain;
    let reevaluated = 0.5 * inverse_w_integral(u, &domain)?;
    let tc = total_curvature(u, &domain).map_err(|e| usage(e.to_string()))?;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "helicoid",
        "w": w,
        "trunc": a,
        "H": big_h,
        "grid": grid_json(u),
        "tol": cfg.tolerance,
        "solver": solver_json(&r.report),
        "x_hat": r.x_hat,
        "x_hat_iterates": r.iterates,
        "sweeps": r.iterates.len() - 1,
        "x_hat_reevaluated": reevaluated,
        "grid_spacing": u.grid.spacing(),
        "curvature": curvature_json(u),
        "total_curvature": tc,
        "asymptote_fits": {
            "left": fit_json(asymptote_fit(u, Side::Left, AsymptoteModel::Plane)),
            "right": fit_json(asymptote_fit(u, Side::Right, AsymptoteModel::Plane)),
        },
    });
    let piece = graph_to_mesh(u);
    let mesh = assemble_periodic(&piece, Family::HelicoidLike { x_hat: r.x_hat, w }, copies)?;
    report["mesh"] = json!({ "copies": copies.0, "vertices": mesh.vertex_count(), "periods": mesh.periods });
    let mut art = Artifacts::default();
    art.add(dir.join("field.csv"), field_csv(u));
    art.add(dir.join("report.json"), json_bytes(&report));
    art.add(dir.join(mesh_name(format)), mesh_bytes(&mesh, format));
    art.write()?;
    Ok(report)
}

pub fn cmd_pitchfork(f: Flags) -> Result<Value, CliError> {
    f.reject_unused("pitchfork", &["w", "trunc", "H", "grid", "tol", "out", "format"])?;
    let f = resolve(f)?;
    let w = width_at_least_pi(need("w", f.w)?)?;
    let a = positive("trunc", need("trunc", f.trunc)?)?;
    if 2.0 * a < w {
        return Err(usage(format!("--trunc (half-length) must be at least w/2 = {}, got {a}", 0.5 * w)));
    }
    let big_h = positive("H", f.big_h.unwrap_or(20.0))?;
    let cfg = solver_config(f.tol)?;
    let dims = f.grid.unwrap_or(GridSpec::Auto).dims(2.0 * a, w);
    let dir = out_dir(&f)?;
    let format = f.format.unwrap_or(MeshFormat::Obj);

    let (u, rep) = solve_pitchfork(w, a, big_h, dims, &cfg)?;
    let band = (PI + 0.2, w - 0.2);
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "pitchfork",
        "w": w,
        "trunc": a,
        "H": big_h,
        "alpha": pitchfork_alpha(w, a),
        "grid": grid_json(&u),
        "tol": cfg.tolerance,
        "solver": solver_json(&rep),
        "slope_band": [band.0, band.1],
        "max_slope_x_in_band": max_slope_x(&u, |_, y| y > band.0 && y < band.1),
    });
    merge(&mut report, tilted_family_json(&u, w)?);
    let nominal = PlanarDomain::parallelogram(pitchfork_alpha(w, a), w, 2.0 * a).map_err(|e| usage(e.to_string()))?;
    let piece = graph_to_mesh(&u).with_outline(nominal.corners().to_vec());
    let mesh = complete_by_half_turn(&piece, [0.0, 0.0])?;
    report["mesh"] = json!({ "vertices": mesh.vertex_count() });
    let mut art = Artifacts::default();
    art.add(dir.join("field.csv"), field_csv(&u));
    art.add(dir.join("report.json"), json_bytes(&report));
    art.add(dir.join(mesh_name(format)), mesh_bytes(&mesh, format));
    art.write()?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// diagnose

/// Pass threshold of the residual-refinement check: fine/coarse residual.
pub const REFINEMENT_FACTOR: f64 = 0.30;
/// Relative tolerance of the total-curvature check against `2 asin(π/w)`.
pub const TOTAL_CURVATURE_RTOL: f64 = 0.15;
/// Largest admissible Gauss-image violation.
pub const GAUSS_IMAGE_TOL: f64 = 1e-6;
/// Largest admissible sup deviation of an asymptote fit.
pub const ASYMPTOTE_TOL: f64 = 0.05;

/// Drops a last row/column if needed so that node counts are odd, keeping
/// the grid spacing.
fn nested_restriction(u: &ScalarField) -> Result<ScalarField, CliError> {
    let g = u.grid;
    let n_s = if g.n_s % 2 == 1 { g.n_s } else { g.n_s - 1 };
    let n_t = if g.n_t % 2 == 1 { g.n_t } else { g.n_t - 1 };
    if n_s < 5 || n_t < 5 {
        return Err(usage("residual-refinement needs at least 5 nodes per direction"));
    }
    let d = PlanarDomain {
        length: (n_s - 1) as f64 * g.ds(),
        w: (n_t - 1) as f64 * g.dt(),
        ..g.domain
    };
    let sub = Grid::new(d, n_s, n_t).map_err(|e| usage(e.to_string()))?;
    let mut values = Vec::with_capacity(sub.len());
    for j in 0..n_t {
        for i in 0..n_s {
            values.push(u.get(i, j));
        }
    }
    ScalarField::new(sub, values).map_err(|e| usage(e.to_string()))
}

/// Sup of the discrete residual over nodes in the middle half of the chart.
fn middle_residual(u: &ScalarField) -> f64 {
    let r = translator_residual(u);
    let g = u.grid;
    let mut m = 0.0_f64;
    for j in 1..g.n_t - 1 {
        for i in 1..g.n_s - 1 {
            let (a, b) = (i as f64 / (g.n_s - 1) as f64, j as f64 / (g.n_t - 1) as f64);
            if (0.25..=0.75).contains(&a) && (0.25..=0.75).contains(&b) {
                m = m.max(r.get(i, j).abs());
            }
        }
    }
    m
}

fn run_check(kind: CheckKind, u: &ScalarField, f: &Flags) -> Result<Value, CliError> {
    let domain = u.grid.domain;
    let diag = |e: DiagnosticsError| e.to_string();
    Ok(match kind {
        CheckKind::ResidualRefinement => {
            let fine = nested_restriction(u)?;
            let coarse = fine.subsample(2).map_err(|e| usage(e.to_string()))?;
            let (rf, rc) = (middle_residual(&fine), middle_residual(&coarse));
            let ratio = if rc > 0.0 { rf / rc } else { 0.0 };
            let pass = rf <= 1e-10 || (rc > 0.0 && ratio <= REFINEMENT_FACTOR);
            json!({ "check": "residual-refinement", "pass": pass, "fine_residual": rf, "coarse_residual": rc, "ratio": ratio, "limit": REFINEMENT_FACTOR })
        }
        CheckKind::CurvatureSign => {
            let s = curvature_signs(u);
            json!({ "check": "curvature-sign", "pass": s.zero_or_positive == 0 && s.negative > 0, "negative": s.negative, "zero_or_positive": s.zero_or_positive, "negative_fraction": s.negative_fraction(), "max_curvature": s.max_curvature })
        }
        CheckKind::TotalCurvature => {
            let w = f.w.expect("validated");
            let target = 2.0 * (PI / w).asin();
            match total_curvature(u, &domain) {
                Ok(tc) => {
                    let gap = (tc - target).abs() / target;
                    json!({ "check": "total-curvature", "pass": gap <= TOTAL_CURVATURE_RTOL, "total_curvature": tc, "target": target, "relative_gap": gap, "limit": TOTAL_CURVATURE_RTOL })
                }
                Err(e) => json!({ "check": "total-curvature", "pass": false, "error": diag(e) }),
            }
        }
        CheckKind::GaussImage => {
            let v = gauss_image_violation(u, f.w.expect("validated"));
            json!({ "check": "gauss-image", "pass": v <= GAUSS_IMAGE_TOL, "violation": v, "limit": GAUSS_IMAGE_TOL })
        }
        CheckKind::Morse => {
            let level = f.level.unwrap_or(f64::INFINITY);
            match morse_count_check(&SurfacePatch::full(u.clone()), level) {
                Ok(m) => json!({
                    "check": "morse",
                    "pass": m.identity_holds,
                    "level": if level.is_finite() { json!(level) } else { json!("inf") },
                    "N": m.n, "extrema": m.extrema, "c0": m.c0, "c1": m.c1, "chi": m.chi,
                }),
                Err(e) => json!({ "check": "morse", "pass": false, "error": diag(e) }),
            }
        }
        CheckKind::Asymptote => {
            let side = match f.side.unwrap_or(SideArg::Right) {
                SideArg::Left => Side::Left,
                SideArg::Right => Side::Right,
            };
            let model = match f.w {
                Some(w) => AsymptoteModel::TiltedReaper { w },
                None => AsymptoteModel::Plane,
            };
            match asymptote_fit(u, side, model) {
                Ok(fit) => {
                    let mut v = json!({ "check": "asymptote", "pass": fit.sup_deviation <= ASYMPTOTE_TOL, "limit": ASYMPTOTE_TOL });
                    merge(&mut v, fit_json(Ok(fit)));
                    v
                }
                Err(e) => json!({ "check": "asymptote", "pass": false, "error": diag(e) }),
            }
        }
    })
}

pub fn cmd_diagnose(f: Flags) -> Result<Value, CliError> {
    f.reject_unused("diagnose", &["field", "check", "w", "level", "side", "out"])?;
    let f = resolve(f)?;
    let path = need("field", f.field.clone())?;
    if f.check.is_empty() {
        return Err(usage("--check is required (residual-refinement, curvature-sign, total-curvature, gauss-image, morse, asymptote)"));
    }
    for k in &f.check {
        if matches!(k, CheckKind::GaussImage | CheckKind::TotalCurvature) {
            width_at_least_pi(need("w", f.w)?)?;
        }
    }
    if let Some(w) = f.w {
        positive("w", w)?;
    }
    if f.level.is_some() && !f.check.contains(&CheckKind::Morse) {
        return Err(usage("--level applies to the morse check"));
    }
    if let Some(out) = &f.out {
        if out.is_dir() {
            return Err(usage(format!("--out {} is a directory; diagnose writes a JSON file", out.display())));
        }
    }
    let u = read_field_csv(&path)?;
    let mut checks = Vec::new();
    for &k in &f.check {
        checks.push(run_check(k, &u, &f)?);
    }
    let all = checks.iter().all(|c| c["pass"] == json!(true));
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "diagnose",
        "field": path.display().to_string(),
        "grid": grid_json(&u),
        "checks": checks,
        "pass": all,
    });
    if let Some(out) = &f.out {
        let mut art = Artifacts::default();
        art.add(out.clone(), json_bytes(&report));
        art.write()?;
    }
    if all {
        Ok(report)
    } else {
        print!("{}", String::from_utf8_lossy(&json_bytes(&report)));
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| c["pass"] != json!(true))
            .filter_map(|c| c["check"].as_str())
            .collect();
        Err(CliError::CheckFailed(format!("checks failed: {}", failed.join(", "))))
    }
}

// ---------------------------------------------------------------------------
// mesh

pub fn cmd_mesh(f: Flags) -> Result<Value, CliError> {
    f.reject_unused("mesh", &["field", "family", "w", "x-hat", "copies", "format", "out"])?;
    let f = resolve(f)?;
    let path = need("field", f.field.clone())?;
    let family = need("family", f.family)?;
    let out = need("out", f.out.clone())?;
    if out.is_dir() {
        return Err(usage(format!("--out {} is a directory; mesh writes a file", out.display())));
    }
    let format = match f.format {
        Some(fmt) => fmt,
        None => match out.extension().and_then(|e| e.to_str()) {
            Some(ext) => ext.parse::<MeshFormat>().map_err(usage)?,
            None => MeshFormat::Obj,
        },
    };
    let copies = f.copies.unwrap_or((1, 1));
    match family {
        FamilyKind::Scherk => {}
        FamilyKind::Scherkenoid | FamilyKind::HelicoidLike | FamilyKind::Pitchfork => {
            if copies.1 != 1 {
                return Err(usage("this family is singly periodic: --copies takes N or Nx1"));
            }
        }
    }
    if matches!(family, FamilyKind::Pitchfork) && f.copies.is_some() {
        return Err(usage("pitchforks are not periodic; --copies does not apply"));
    }
    if matches!(family, FamilyKind::Scherkenoid | FamilyKind::Pitchfork) {
        width_at_least_pi(need("w", f.w)?)?;
    }
    if matches!(family, FamilyKind::HelicoidLike) {
        need("x-hat", f.x_hat)?;
    }

    let u = read_field_csv(&path)?;
    let d = u.grid.domain;
    let piece = graph_to_mesh(&u);
    let mesh = match family {
        FamilyKind::Scherk => assemble_periodic(&piece, Family::Scherk { corners: d.corners() }, copies)?,
        FamilyKind::Scherkenoid => {
            let w = f.w.expect("validated");
            let nominal = PlanarDomain::parallelogram(d.alpha, w, d.length).map_err(|e| usage(e.to_string()))?;
            let piece = piece.with_outline(nominal.corners().to_vec());
            assemble_periodic(&piece, Family::Scherkenoid { alpha: d.alpha, w }, copies)?
        }
        FamilyKind::HelicoidLike => {
            let x_hat = f.x_hat.expect("validated");
            assemble_periodic(&piece, Family::HelicoidLike { x_hat, w: f.w.unwrap_or(d.w) }, copies)?
        }
        FamilyKind::Pitchfork => {
            let w = f.w.expect("validated");
            let nominal = PlanarDomain::parallelogram(d.alpha, w, d.length).map_err(|e| usage(e.to_string()))?;
            complete_by_half_turn(&piece.with_outline(nominal.corners().to_vec()), [0.0, 0.0])?
        }
    };
    let mut art = Artifacts::default();
    art.add(out.clone(), mesh_bytes(&mesh, format));
    art.write()?;
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "mesh",
        "field": path.display().to_string(),
        "out": out.display().to_string(),
        "vertices": mesh.vertex_count(),
        "triangles": mesh.triangles.len(),
        "copies": mesh.copies.len(),
        "periods": mesh.periods,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_accept_multiples_of_pi() {
        assert_eq!(parse_real("1.5").unwrap(), 1.5);
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("pi/2").unwrap(), FRAC_PI_2);
        assert_eq!(parse_real("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("3*pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_real("-π").unwrap(), -PI);
        assert_eq!(parse_real("inf").unwrap(), f64::INFINITY);
        assert!(parse_real("pie").is_err());
        assert!(parse_real("nan").is_err());
    }

    #[test]
    fn grids_and_copies() {
        assert_eq!(parse_grid("65x33").unwrap(), GridSpec::Dims(65, 33));
        assert_eq!(parse_grid("auto").unwrap(), GridSpec::Auto);
        assert!(parse_grid("2x9").is_err());
        assert!(parse_grid("65").is_err());
        assert_eq!(parse_copies("3").unwrap(), (3, 1));
        assert_eq!(parse_copies("3x2").unwrap(), (3, 2));
        assert!(parse_copies("0x1").is_err());
        assert_eq!(GridSpec::Auto.dims(8.0, 2.0 * PI), (97, 75));
    }

    #[test]
    fn csv_round_trip_recovers_sheared_grid() {
        let d = PlanarDomain::parallelogram(1.1, 0.7, 2.3).unwrap().translated(-0.4, 0.25);
        let g = Grid::new(d, 7, 5).unwrap();
        let u = ScalarField::from_fn(g, |x, y| x * y - 0.3 * x).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        fs::write(&p, field_csv(&u)).unwrap();
        let v = read_field_csv(&p).unwrap();
        assert_eq!((v.grid.n_s, v.grid.n_t), (7, 5));
        assert_eq!(v.values(), u.values());
        assert!((v.grid.domain.alpha - 1.1).abs() < 1e-12);
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            let (a, b) = (g.node_xy(i, j), v.grid.node_xy(i, j));
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_schema_errors_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        fs::write(&p, "a,b,c\n0,0,0\n").unwrap();
        assert_eq!(read_field_csv(&p).unwrap_err().exit_code(), 2);
        let rows: String = (0..9).map(|k| format!("{},{},0\n", k % 3, (k / 3) as f64 + if k == 4 { 0.1 } else { 0.0 })).collect();
        fs::write(&p, format!("x,y,u\n{rows}")).unwrap();
        assert_eq!(read_field_csv(&p).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn flags_outside_a_command_are_rejected() {
        let f = Flags {
            big_h: Some(3.0),
            ..Flags::default()
        };
        assert!(f.reject_unused("scherk", &["w"]).is_err());
        assert!(f.reject_unused("helicoid", &["H"]).is_ok());
    }

    #[test]
    fn config_fills_unset_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, "w = \"pi/2\"\nalpha = 1\nh_list = [4, 6.5, \"3pi\"]\ngrid = \"33x17\"\nout = \"res\"\n").unwrap();
        let f = resolve(Flags {
            config: Some(p),
            alpha: Some(0.5),
            ..Flags::default()
        })
        .unwrap();
        assert_eq!(f.alpha, Some(0.5));
        assert_eq!(f.w, Some(FRAC_PI_2));
        assert_eq!(f.h_list, Some(RealList(vec![4.0, 6.5, 3.0 * PI])));
        assert_eq!(f.grid, Some(GridSpec::Dims(33, 17)));
        assert_eq!(f.out, Some(dir.path().join("res")));
        let bad = dir.path().join("bad.toml");
        fs::write(&bad, "omega = 3\n").unwrap();
        let e = resolve(Flags { config: Some(bad), ..Flags::default() }).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
