//! Plain-text run configuration, CSV outputs and PPM heatmaps.
//!
//! Floats are written either with Rust's shortest round-trip formatting
//! (configuration) or as `{:.16e}` (17 significant digits, data files), so
//! every value reads back bit-exactly. Line endings are always `\n`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::classifier::{OutcomeRecord, ScanResult, Thresholds};
use crate::evolve::{Boundary, EvolveConfig, Trajectory};
use crate::lattice::{charge_density, energy_density, DiagnosticsSample, FieldState, Grid};
use crate::model::ModelParams;
use crate::static_solver::{PolishOptions, RelaxationSchedule, SeedKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{at}: expected `key=value`, found `{text}`")]
    Syntax { at: String, text: String },
    #[error("{at}: unknown key `{key}`")]
    UnknownKey { at: String, key: String },
    #[error("{at}: key `{key}` given more than once")]
    Duplicate { at: String, key: String },
    #[error("{at}: `{key}` expects {expected}, found `{value}`")]
    Type {
        at: String,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{at}: {message}")]
    Invariant { at: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxKind {
    Seed(SeedKind),
    Molecule,
    /// Every seed kind plus the molecule.
    All,
}

impl RelaxKind {
    pub fn name(&self) -> &'static str {
        match self {
            RelaxKind::Seed(k) => k.name(),
            RelaxKind::Molecule => "molecule",
            RelaxKind::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "molecule" => Some(RelaxKind::Molecule),
            "all" => Some(RelaxKind::All),
            _ => SeedKind::from_name(s).map(RelaxKind::Seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapQuantity {
    ChargeDensity,
    EnergyDensity,
}

impl HeatmapQuantity {
    pub fn name(&self) -> &'static str {
        match self {
            HeatmapQuantity::ChargeDensity => "charge_density",
            HeatmapQuantity::EnergyDensity => "energy_density",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "charge_density" => Some(HeatmapQuantity::ChargeDensity),
            "energy_density" => Some(HeatmapQuantity::EnergyDensity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapSpec {
    pub quantity: HeatmapQuantity,
    /// Symmetric colour limit; `None` uses the largest `|value|` drawn.
    pub limit: Option<f64>,
    pub x_stride: usize,
    pub t_stride: usize,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self {
            quantity: HeatmapQuantity::ChargeDensity,
            limit: None,
            x_stride: 10,
            t_stride: 1,
        }
    }
}

/// Every parameter of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelParams,
    /// Evolution grid.
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    /// Grid used to relax static profiles (same `dx`).
    pub relax_x_min: f64,
    pub relax_x_max: f64,
    pub evolve: EvolveConfig,
    pub schedule: RelaxationSchedule,
    pub polish: PolishOptions,
    /// Residual tolerance for polishing the molecule, which has no exact
    /// static bound state to converge to.
    pub molecule_tol: f64,
    pub relax_kind: RelaxKind,
    pub left_kind: SeedKind,
    pub right_kind: SeedKind,
    pub x_left: f64,
    pub x_right: f64,
    pub v_left: f64,
    pub v_right: f64,
    /// Explicit scan velocities; `None` uses `v_min..=v_max` in `v_step`s.
    pub v_list: Option<Vec<f64>>,
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    pub thresholds: Thresholds,
    pub heatmap: HeatmapSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelParams::new(1.0).expect("valid default"),
            x_min: -30.0,
            x_max: 30.0,
            dx: 0.01,
            relax_x_min: -20.0,
            relax_x_max: 20.0,
            evolve: EvolveConfig::default(),
            schedule: RelaxationSchedule::default(),
            polish: PolishOptions::default(),
            molecule_tol: 5e-3,
            relax_kind: RelaxKind::Seed(SeedKind::PsiPlus),
            left_kind: SeedKind::PsiPlus,
            right_kind: SeedKind::AntiPsiMinus,
            x_left: -10.0,
            x_right: 10.0,
            v_left: 0.6,
            v_right: -0.6,
            v_list: None,
            v_min: 0.2,
            v_max: 0.7,
            v_step: 0.05,
            thresholds: Thresholds::default(),
            heatmap: HeatmapSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Grid {
        Grid::with_spacing(self.x_min, self.x_max, self.dx).expect("validated grid")
    }

    pub fn relax_grid(&self) -> Grid {
        Grid::with_spacing(self.relax_x_min, self.relax_x_max, self.dx).expect("validated grid")
    }

    /// Velocities of a scan in ascending order.
    pub fn scan_velocities(&self) -> Vec<f64> {
        if let Some(list) = &self.v_list {
            let mut v = list.clone();
            v.sort_by(f64::total_cmp);
            return v;
        }
        let mut out = Vec::new();
        if self.v_min > self.v_max {
            return out;
        }
        let count = ((self.v_max - self.v_min) / self.v_step + 1e-9).floor() as usize;
        for k in 0..=count {
            out.push(self.v_min + k as f64 * self.v_step);
        }
        out
    }
}

const KEYS: &[&str] = &[
    "schema_version",
    "lambda",
    "x_min",
    "x_max",
    "dx",
    "relax_x_min",
    "relax_x_max",
    "dt",
    "t_end",
    "boundary",
    "sponge_width",
    "sponge_strength",
    "snapshot_stride",
    "initial_amplitude",
    "amplitude_decay",
    "trials_per_stage",
    "max_stages",
    "convergence_tol",
    "seed",
    "polish",
    "polish_step",
    "polish_tol",
    "polish_max_iters",
    "molecule_tol",
    "relax_kind",
    "left_kind",
    "right_kind",
    "x_left",
    "x_right",
    "v_left",
    "v_right",
    "v_list",
    "v_min",
    "v_max",
    "v_step",
    "noise_floor",
    "min_lump_charge",
    "capture_half_widths",
    "persistence_fraction",
    "oscillation_amplitude",
    "min_capture_oscillations",
    "decay_ratio",
    "min_radiated_fraction",
    "heatmap_quantity",
    "heatmap_limit",
    "heatmap_x_stride",
    "heatmap_t_stride",
];

/// Serializes every key in a fixed order.
pub fn write_config(c: &RunConfig) -> String {
    let auto_f = |v: Option<f64>| v.map_or("auto".to_string(), |x| format!("{x}"));
    let list = c.v_list.as_ref().map_or("none".to_string(), |l| {
        l.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
    });
    let th = &c.thresholds;
    let values: Vec<(&str, String)> = vec![
        ("schema_version", c.schema_version.to_string()),
        ("lambda", format!("{}", c.model.lambda())),
        ("x_min", format!("{}", c.x_min)),
        ("x_max", format!("{}", c.x_max)),
        ("dx", format!("{}", c.dx)),
        ("relax_x_min", format!("{}", c.relax_x_min)),
        ("relax_x_max", format!("{}", c.relax_x_max)),
        ("dt", format!("{}", c.evolve.dt)),
        ("t_end", format!("{}", c.evolve.t_end)),
        ("boundary", c.evolve.boundary.name().to_string()),
        ("sponge_width", format!("{}", c.evolve.sponge_width)),
        ("sponge_strength", format!("{}", c.evolve.sponge_strength)),
        ("snapshot_stride", c.evolve.snapshot_stride.to_string()),
        ("initial_amplitude", format!("{}", c.schedule.initial_amplitude)),
        ("amplitude_decay", format!("{}", c.schedule.amplitude_decay)),
        (
            "trials_per_stage",
            c.schedule
                .trials_per_stage
                .map_or("auto".to_string(), |t| t.to_string()),
        ),
        ("max_stages", c.schedule.max_stages.to_string()),
        ("convergence_tol", format!("{}", c.schedule.convergence_tol)),
        ("seed", c.schedule.rng_seed.to_string()),
        ("polish", c.polish.enabled.to_string()),
        ("polish_step", auto_f(c.polish.step)),
        ("polish_tol", format!("{}", c.polish.residual_tol)),
        ("polish_max_iters", c.polish.max_iters.to_string()),
        ("molecule_tol", format!("{}", c.molecule_tol)),
        ("relax_kind", c.relax_kind.name().to_string()),
        ("left_kind", c.left_kind.name().to_string()),
        ("right_kind", c.right_kind.name().to_string()),
        ("x_left", format!("{}", c.x_left)),
        ("x_right", format!("{}", c.x_right)),
        ("v_left", format!("{}", c.v_left)),
        ("v_right", format!("{}", c.v_right)),
        ("v_list", list),
        ("v_min", format!("{}", c.v_min)),
        ("v_max", format!("{}", c.v_max)),
        ("v_step", format!("{}", c.v_step)),
        ("noise_floor", format!("{}", th.noise_floor)),
        ("min_lump_charge", format!("{}", th.min_lump_charge)),
        ("capture_half_widths", format!("{}", th.capture_half_widths)),
        ("persistence_fraction", format!("{}", th.persistence_fraction)),
        ("oscillation_amplitude", format!("{}", th.oscillation_amplitude)),
        ("min_capture_oscillations", th.min_capture_oscillations.to_string()),
        ("decay_ratio", format!("{}", th.decay_ratio)),
        ("min_radiated_fraction", format!("{}", th.min_radiated_fraction)),
        ("heatmap_quantity", c.heatmap.quantity.name().to_string()),
        ("heatmap_limit", auto_f(c.heatmap.limit)),
        ("heatmap_x_stride", c.heatmap.x_stride.to_string()),
        ("heatmap_t_stride", c.heatmap.t_stride.to_string()),
    ];
    debug_assert_eq!(values.len(), KEYS.len());
    let mut out = String::new();
    for (k, v) in values {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

pub fn read_config(text: &str) -> Result<RunConfig, ConfigError> {
    read_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `overrides` (each `key=value`) on top of it.
/// Errors name the line number, or the override, that caused them.
pub fn read_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<String, (String, String)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let at = format!("line {}", i + 1);
        let Some((k, v)) = split_line(raw, &at)? else { continue };
        if entries.contains_key(&k) {
            return Err(ConfigError::Duplicate { at, key: k });
        }
        entries.insert(k, (v, at));
    }
    for o in overrides {
        let at = format!("override `{o}`");
        let Some((k, v)) = split_line(o, &at)? else { continue };
        entries.insert(k, (v, at));
    }
    for (k, (_, at)) in &entries {
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey {
                at: at.clone(),
                key: k.clone(),
            });
        }
    }
    let mut p = Parser { entries };
    let mut c = RunConfig::default();

    c.schema_version = p.get("schema_version", "an integer", |s| s.parse().ok())?
        .unwrap_or(SCHEMA_VERSION);
    if c.schema_version != SCHEMA_VERSION {
        return Err(p.invariant("schema_version", format!("unsupported schema_version {}", c.schema_version)));
    }
    if let Some(l) = p.float("lambda")? {
        c.model = ModelParams::new(l).map_err(|e| p.invariant("lambda", e.to_string()))?;
    }
    p.set_float("x_min", &mut c.x_min)?;
    p.set_float("x_max", &mut c.x_max)?;
    p.set_float("dx", &mut c.dx)?;
    p.set_float("relax_x_min", &mut c.relax_x_min)?;
    p.set_float("relax_x_max", &mut c.relax_x_max)?;
    p.set_float("dt", &mut c.evolve.dt)?;
    p.set_float("t_end", &mut c.evolve.t_end)?;
    if let Some(b) = p.get("boundary", "pinned_vacuum or sponge", Boundary::from_name)? {
        c.evolve.boundary = b;
    }
    p.set_float("sponge_width", &mut c.evolve.sponge_width)?;
    p.set_float("sponge_strength", &mut c.evolve.sponge_strength)?;
    p.set_usize("snapshot_stride", &mut c.evolve.snapshot_stride)?;
    p.set_float("initial_amplitude", &mut c.schedule.initial_amplitude)?;
    p.set_float("amplitude_decay", &mut c.schedule.amplitude_decay)?;
    if let Some(t) = p.get("trials_per_stage", "an integer or auto", |s| auto_or(s, |x| x.parse().ok()))? {
        c.schedule.trials_per_stage = t;
    }
    p.set_usize("max_stages", &mut c.schedule.max_stages)?;
    p.set_float("convergence_tol", &mut c.schedule.convergence_tol)?;
    if let Some(s) = p.get("seed", "an unsigned integer", |s| s.parse().ok())? {
        c.schedule.rng_seed = s;
    }
    if let Some(b) = p.get("polish", "true or false", |s| s.parse().ok())? {
        c.polish.enabled = b;
    }
    if let Some(s) = p.get("polish_step", "a number or auto", |s| auto_or(s, parse_f64))? {
        c.polish.step = s;
    }
    p.set_float("polish_tol", &mut c.polish.residual_tol)?;
    p.set_usize("polish_max_iters", &mut c.polish.max_iters)?;
    p.set_float("molecule_tol", &mut c.molecule_tol)?;
    if let Some(k) = p.get("relax_kind", "a seed kind, molecule or all", RelaxKind::from_name)? {
        c.relax_kind = k;
    }
    if let Some(k) = p.get("left_kind", "a seed kind", SeedKind::from_name)? {
        c.left_kind = k;
    }
    if let Some(k) = p.get("right_kind", "a seed kind", SeedKind::from_name)? {
        c.right_kind = k;
    }
    p.set_float("x_left", &mut c.x_left)?;
    p.set_float("x_right", &mut c.x_right)?;
    p.set_float("v_left", &mut c.v_left)?;
    p.set_float("v_right", &mut c.v_right)?;
    if let Some(l) = p.get("v_list", "none or comma-separated numbers", parse_list)? {
        c.v_list = l;
    }
    p.set_float("v_min", &mut c.v_min)?;
    p.set_float("v_max", &mut c.v_max)?;
    p.set_float("v_step", &mut c.v_step)?;
    let th = &mut c.thresholds;
    p.set_float("noise_floor", &mut th.noise_floor)?;
    p.set_float("min_lump_charge", &mut th.min_lump_charge)?;
    p.set_float("capture_half_widths", &mut th.capture_half_widths)?;
    p.set_float("persistence_fraction", &mut th.persistence_fraction)?;
    p.set_float("oscillation_amplitude", &mut th.oscillation_amplitude)?;
    p.set_usize("min_capture_oscillations", &mut th.min_capture_oscillations)?;
    p.set_float("decay_ratio", &mut th.decay_ratio)?;
    p.set_float("min_radiated_fraction", &mut th.min_radiated_fraction)?;
    if let Some(q) = p.get("heatmap_quantity", "charge_density or energy_density", HeatmapQuantity::from_name)? {
        c.heatmap.quantity = q;
    }
    if let Some(l) = p.get("heatmap_limit", "a number or auto", |s| auto_or(s, parse_f64))? {
        c.heatmap.limit = l;
    }
    p.set_usize("heatmap_x_stride", &mut c.heatmap.x_stride)?;
    p.set_usize("heatmap_t_stride", &mut c.heatmap.t_stride)?;

    validate(&c, &p)?;
    Ok(c)
}

fn validate(c: &RunConfig, p: &Parser) -> Result<(), ConfigError> {
    let grid = Grid::with_spacing(c.x_min, c.x_max, c.dx).map_err(|e| p.invariant("dx", e.to_string()))?;
    Grid::with_spacing(c.relax_x_min, c.relax_x_max, c.dx)
        .map_err(|e| p.invariant("relax_x_max", e.to_string()))?;
    if c.evolve.dt > 0.5 * c.dx {
        return Err(p.invariant(
            "dt",
            format!("CFL violation: dt = {} exceeds 0.5 dx = {}", c.evolve.dt, 0.5 * c.dx),
        ));
    }
    c.evolve.validate(&grid).map_err(|e| {
        let key = match e {
            crate::evolve::EvolveError::InvalidConfig(ref m) if m.contains("sponge_strength") => "sponge_strength",
            crate::evolve::EvolveError::InvalidConfig(ref m) if m.contains("sponge") => "sponge_width",
            crate::evolve::EvolveError::InvalidConfig(ref m) if m.contains("snapshot") => "snapshot_stride",
            crate::evolve::EvolveError::InvalidConfig(ref m) if m.contains("t_end") => "t_end",
            _ => "dt",
        };
        p.invariant(key, e.to_string())
    })?;
    c.schedule.validate().map_err(|e| {
        let key = KEYS
            .iter()
            .find(|k| e.to_string().contains(*k))
            .copied()
            .unwrap_or("initial_amplitude");
        p.invariant(key, e.to_string())
    })?;
    if let Some(s) = c.polish.step {
        if !(s > 0.0 && s < 0.5 * c.dx * c.dx) {
            return Err(p.invariant("polish_step", format!("polish_step must lie in (0, dx^2/2 = {})", 0.5 * c.dx * c.dx)));
        }
    }
    if !(c.polish.residual_tol > 0.0) {
        return Err(p.invariant("polish_tol", "polish_tol must be positive".into()));
    }
    if !(c.molecule_tol > 0.0) {
        return Err(p.invariant("molecule_tol", "molecule_tol must be positive".into()));
    }
    for (key, v) in [("v_left", c.v_left), ("v_right", c.v_right)] {
        if !(v.abs() < 1.0) {
            return Err(p.invariant(key, format!("{key} = {v} must satisfy |v| < 1")));
        }
    }
    if !(c.x_left < c.x_right) {
        return Err(p.invariant("x_right", "x_left must be smaller than x_right".into()));
    }
    if let Some(l) = &c.v_list {
        if let Some(v) = l.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(p.invariant("v_list", format!("velocity {v} must satisfy |v| < 1")));
        }
    }
    if !(c.v_step > 0.0) {
        return Err(p.invariant("v_step", "v_step must be positive".into()));
    }
    for (key, v) in [("v_min", c.v_min), ("v_max", c.v_max)] {
        if !(v.abs() < 1.0) {
            return Err(p.invariant(key, format!("{key} = {v} must satisfy |v| < 1")));
        }
    }
    c.thresholds.validate().map_err(|m| {
        let key = KEYS.iter().find(|k| m.starts_with(*k)).copied().unwrap_or("noise_floor");
        p.invariant(key, m)
    })?;
    if c.heatmap.x_stride == 0 {
        return Err(p.invariant("heatmap_x_stride", "heatmap_x_stride must be >= 1".into()));
    }
    if c.heatmap.t_stride == 0 {
        return Err(p.invariant("heatmap_t_stride", "heatmap_t_stride must be >= 1".into()));
    }
    if let Some(l) = c.heatmap.limit {
        if !(l > 0.0 && l.is_finite()) {
            return Err(p.invariant("heatmap_limit", "heatmap_limit must be positive".into()));
        }
    }
    Ok(())
}

fn split_line(raw: &str, at: &str) -> Result<Option<(String, String)>, ConfigError> {
    let line = raw.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let Some((k, v)) = line.split_once('=') else {
        return Err(ConfigError::Syntax {
            at: at.to_string(),
            text: line.to_string(),
        });
    };
    Ok(Some((k.trim().to_string(), v.trim().to_string())))
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn auto_or<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Option<Option<T>> {
    if s == "auto" {
        Some(None)
    } else {
        f(s).map(Some)
    }
}

fn parse_list(s: &str) -> Option<Option<Vec<f64>>> {
    if s == "none" {
        return Some(None);
    }
    if s.is_empty() {
        return Some(Some(Vec::new()));
    }
    s.split(',')
        .map(|t| parse_f64(t.trim()))
        .collect::<Option<Vec<f64>>>()
        .map(Some)
}

struct Parser {
    /// key -> (value, location)
    entries: HashMap<String, (String, String)>,
}

impl Parser {
    fn location(&self, key: &str) -> String {
        self.entries
            .get(key)
            .map_or_else(|| format!("default `{key}`"), |(_, at)| at.clone())
    }

    fn invariant(&self, key: &str, message: String) -> ConfigError {
        ConfigError::Invariant {
            at: self.location(key),
            message,
        }
    }

    fn get<T>(
        &mut self,
        key: &str,
        expected: &'static str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        let Some((value, at)) = self.entries.get(key) else {
            return Ok(None);
        };
        match f(value) {
            Some(v) => Ok(Some(v)),
            None => Err(ConfigError::Type {
                at: at.clone(),
                key: key.to_string(),
                value: value.clone(),
                expected,
            }),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key, "a finite number", parse_f64)
    }

    fn set_float(&mut self, key: &str, target: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.float(key)? {
            *target = v;
        }
        Ok(())
    }

    fn set_usize(&mut self, key: &str, target: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = self.get(key, "a non-negative integer", |s| s.parse().ok())? {
            *target = v;
        }
        Ok(())
    }
}

fn e17(v: f64) -> String {
    format!("{v:.16e}")
}

pub const TIMESERIES_HEADER: &str = "time,total_energy,Q,Q_N,first_integral_max,pcac_max";

pub fn write_timeseries(samples: &[DiagnosticsSample]) -> String {
    let mut out = String::with_capacity(110 * (samples.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e17(s.time),
            e17(s.total_energy),
            e17(s.topological_charge),
            e17(s.noether_charge),
            e17(s.max_first_integral_deviation),
            e17(s.max_pcac_residual)
        );
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Format(String),
}

fn parse_row(line: &str, lineno: usize, width: usize) -> Result<Vec<f64>, ParseError> {
    let vals: Option<Vec<f64>> = line.split(',').map(|t| t.parse().ok()).collect();
    match vals {
        Some(v) if v.len() == width => Ok(v),
        _ => Err(ParseError::Line {
            line: lineno,
            message: format!("expected {width} numbers, found `{line}`"),
        }),
    }
}

pub fn read_timeseries(text: &str) -> Result<Vec<DiagnosticsSample>, ParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TIMESERIES_HEADER => {}
        _ => return Err(ParseError::Format("missing timeseries header".into())),
    }
    lines
        .map(|(i, l)| {
            let v = parse_row(l, i + 1, 6)?;
            Ok(DiagnosticsSample {
                time: v[0],
                total_energy: v[1],
                topological_charge: v[2],
                noether_charge: v[3],
                max_first_integral_deviation: v[4],
                max_pcac_residual: v[5],
            })
        })
        .collect()
}

pub const SNAPSHOT_HEADER: &str = "x,phi,psi,phi_dot,psi_dot";

/// `# time=<t>` line, header, then one row per grid point.
pub fn write_snapshot(s: &FieldState) -> String {
    let mut out = String::with_capacity(120 * (s.len() + 2));
    let _ = writeln!(out, "# time={}", e17(s.time));
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for i in 0..s.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e17(s.grid.x(i)),
            e17(s.phi[i]),
            e17(s.psi[i]),
            e17(s.phi_dot[i]),
            e17(s.psi_dot[i])
        );
    }
    out
}

pub fn read_snapshot(text: &str) -> Result<FieldState, ParseError> {
    let mut lines = text.lines().enumerate();
    let time = match lines.next() {
        Some((_, l)) => l
            .strip_prefix("# time=")
            .and_then(|t| t.parse::<f64>().ok())
            .ok_or_else(|| ParseError::Format("missing `# time=` line".into()))?,
        None => return Err(ParseError::Format("empty snapshot".into())),
    };
    match lines.next() {
        Some((_, h)) if h == SNAPSHOT_HEADER => {}
        _ => return Err(ParseError::Format("missing snapshot header".into())),
    }
    let mut cols: [Vec<f64>; 5] = Default::default();
    for (i, l) in lines {
        let v = parse_row(l, i + 1, 5)?;
        for (c, x) in cols.iter_mut().zip(v) {
            c.push(x);
        }
    }
    let [x, phi, psi, phi_dot, psi_dot] = cols;
    let n = x.len();
    if n < 2 {
        return Err(ParseError::Format("snapshot has fewer than two rows".into()));
    }
    let grid = Grid::new(x[0], x[n - 1], n).map_err(|e| ParseError::Format(e.to_string()))?;
    if (0..n).any(|i| grid.x(i) != x[i]) {
        return Err(ParseError::Format("x column is not a uniform grid".into()));
    }
    FieldState::new(grid, phi, psi, phi_dot, psi_dot, time).map_err(|e| ParseError::Format(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or("none".to_string(), e17)
}

/// Outcome record as `key=value` lines.
pub fn write_outcome(r: &OutcomeRecord) -> String {
    let (sp, sn) = match r.outgoing_speeds {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let mut out = String::new();
    let _ = writeln!(out, "outcome={}", r.outcome.name());
    let _ = writeln!(out, "initial_Q={}", e17(r.initial_q));
    let _ = writeln!(out, "final_Q={}", e17(r.final_q));
    let _ = writeln!(out, "outgoing_speed_positive={}", opt(sp));
    let _ = writeln!(out, "outgoing_speed_negative={}", opt(sn));
    let _ = writeln!(out, "oscillation_period={}", opt(r.oscillation_period));
    let _ = writeln!(out, "radiated_energy_fraction={}", e17(r.radiated_energy_fraction));
    let _ = writeln!(out, "asymmetry_index={}", e17(r.asymmetry_index));
    let _ = writeln!(out, "breather_like={}", r.breather_like);
    let _ = writeln!(out, "first_contact_time={}", opt(r.first_contact_time));
    let _ = writeln!(out, "peak_excitation={}", e17(r.peak_excitation));
    let _ = writeln!(out, "late_excitation={}", e17(r.late_excitation));
    out
}

pub const SCAN_HEADER: &str = "v,outcome,final_Q,speed_positive,speed_negative,oscillation_period,radiated_energy_fraction,asymmetry_index,breather_like,error";

/// One row per velocity plus trailing `# v1=` comment with the estimated
/// annihilation threshold.
pub fn write_scan_summary(r: &ScanResult) -> String {
    let mut out = String::new();
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for e in &r.entries {
        match &e.record {
            Some(rec) => {
                let (sp, sn) = match rec.outgoing_speeds {
                    Some((a, b)) => (Some(a), Some(b)),
                    None => (None, None),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},",
                    e17(e.velocity),
                    rec.outcome.name(),
                    e17(rec.final_q),
                    opt(sp),
                    opt(sn),
                    opt(rec.oscillation_period),
                    e17(rec.radiated_energy_fraction),
                    e17(rec.asymmetry_index),
                    rec.breather_like
                );
            }
            None => {
                let msg = e.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
                let _ = writeln!(
                    out,
                    "{},undecided,none,none,none,none,none,none,false,{msg}",
                    e17(e.velocity)
                );
            }
        }
    }
    match r.v1 {
        Some((v, err)) => {
            let _ = writeln!(out, "# v1={} +/- {}", e17(v), e17(err));
        }
        None => out.push_str("# v1=none\n"),
    }
    out
}

/// Diverging colour map: 0 is white, `+limit` pure red, `-limit` pure blue.
pub fn colormap(value: f64, limit: f64) -> [u8; 3] {
    if !(limit > 0.0) || value == 0.0 || value.is_nan() {
        return [255, 255, 255];
    }
    let a = (value.abs() / limit).min(1.0);
    let fade = (255.0 * (1.0 - a)).round() as u8;
    if value > 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

/// Values drawn in the heatmap: rows are every `t_stride`-th snapshot, columns
/// every `x_stride`-th grid point.
pub fn heatmap_values(traj: &Trajectory, spec: &HeatmapSpec) -> Vec<Vec<f64>> {
    traj.snapshots
        .iter()
        .step_by(spec.t_stride)
        .map(|s| {
            let row = match spec.quantity {
                HeatmapQuantity::ChargeDensity => charge_density(s),
                HeatmapQuantity::EnergyDensity => energy_density(s, traj.model),
            };
            row.into_iter().step_by(spec.x_stride).collect()
        })
        .collect()
}

/// Binary PPM (P6, maxval 255) with time increasing downward.
pub fn write_heatmap(traj: &Trajectory, spec: &HeatmapSpec) -> Vec<u8> {
    let values = heatmap_values(traj, spec);
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    let limit = spec.limit.unwrap_or_else(|| {
        values
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    });
    let mut out = format!("P6\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(3 * rows * cols);
    for row in &values {
        for &v in row {
            out.extend_from_slice(&colormap(v, limit));
        }
    }
    out
}
