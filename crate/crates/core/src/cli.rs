//! Experiment files and the command-line driver.
//!
//! An experiment is a TOML file with the sections `[experiment]`, `[model]`,
//! `[grid]` and `[solver]`. Every subcommand validates the whole file before
//! a single solver step runs, writes its artifacts to job-private temporary
//! files and renames them into place, and never consults a clock or an RNG,
//! so the same spec always yields the same bytes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::arrival::{
    arrival_time, combined_verdict, no_interior_check, NoInteriorReport, Representation, Seed, Stencil, Verdict,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{read_field, write_field, Boundary, Grid, Point, ScalarField};
use crate::hj::{bracket_run, envelope_bracket_run, hj_run, mcf_run, write_gap_csv, HjConfig, HjSolution};
use crate::limits::{
    arrival_reference, converge_report, generation_ladder, hj_reference, EpsLadder, GenerationOptions, GridPolicy,
    InitialData, ReferenceFronts,
};
use crate::model::{
    validate_assumptions, BistableModel, Interface, Scaling, SpeedMode, ValidationReport, Velocity, VelocityModel,
};
use crate::rd::{front_position, rd_run, RdConfig};

/// The model used when `validate` is given neither a spec nor a model file.
pub const DEFAULT_MODEL: &str = include_str!("../specs/default_model.toml");

#[derive(Debug, Parser)]
#[command(name = "frontlim", version, about = "Bistable front limits and their geometric flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Output directory; defaults to `out/<experiment name>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent jobs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// `section.key=value`, applied after loading the spec. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Reaction-diffusion run; writes snapshots and an index.
    RdRun,
    /// First-order level-set run.
    HjRun,
    /// Level-set run with the curvature term.
    McfRun,
    /// Arrival times from a seed.
    Arrival {
        /// `zero-set`, `point:x[,y]` or `cells:i,j,...`.
        #[arg(long)]
        seed: Option<String>,
        /// Model file, replacing `experiment.model_file`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Level-set fronts from the arrival-time representation.
    Represent,
    /// Lower and upper level-set solutions and their gap.
    Bracket,
    /// ε-ladder convergence report.
    Converge,
    /// Band-measure check for fattening on grids h and h/2.
    NoInterior,
    /// Structural checks on a model.
    Validate {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Generation time along an ε-ladder.
    GenTime,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RdRun => "rd-run",
            Command::HjRun => "hj-run",
            Command::McfRun => "mcf-run",
            Command::Arrival { .. } => "arrival",
            Command::Represent => "represent",
            Command::Bracket => "bracket",
            Command::Converge => "converge",
            Command::NoInterior => "no-interior",
            Command::Validate { .. } => "validate",
            Command::GenTime => "gen-time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// The expression is the data.
    #[default]
    Expr,
    /// The expression is a signed distance; the data is the traveling wave
    /// across its zero set.
    Wave,
    /// `tanh(d/ε)` of the expression.
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    #[default]
    Arrival,
    Hj,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub model_file: Option<PathBuf>,
    /// Expression in `x1`, `x2`.
    pub initial: Option<Expr>,
    pub initial_kind: InitialKind,
    /// Field file, as an alternative to `initial`.
    pub initial_file: Option<PathBuf>,
    pub t_end: Option<f64>,
    pub times: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub stencil: Stencil,
    pub seed: Option<String>,
    pub reference: ReferenceKind,
    /// Signed distance to the initial front for `gen-time`; defaults to the
    /// initial expression.
    pub distance: Option<Expr>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            name: "experiment".into(),
            model_file: None,
            initial: None,
            initial_kind: InitialKind::Expr,
            initial_file: None,
            t_end: None,
            times: Vec::new(),
            epsilons: Vec::new(),
            stencil: Stencil::Eight,
            seed: None,
            reference: ReferenceKind::Arrival,
            distance: None,
        }
    }
}

/// Model keys. `speed` alone gives a constant level-set speed; otherwise
/// `n1`, `n2` and `interface` are required, plus `epsilon` for the
/// reaction-diffusion commands.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub speed: Option<f64>,
    pub n1: Option<Expr>,
    pub n2: Option<Expr>,
    pub rho: Option<f64>,
    pub k: Option<f64>,
    pub interface: Option<Interface>,
    pub epsilon: Option<f64>,
    pub scaling: Option<Scaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// One entry per axis.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: Option<f64>,
    /// Cells along the first axis, as an alternative to `h`.
    pub n: Option<usize>,
    pub boundary: Boundary,
    pub cells_per_eps: f64,
    pub cells_per_band: f64,
    pub h_max: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        let p = GridPolicy::default();
        GridSection {
            lower: vec![-2.0, -2.0],
            upper: vec![2.0, 2.0],
            h: None,
            n: None,
            boundary: Boundary::default(),
            cells_per_eps: p.cells_per_eps,
            cells_per_band: p.cells_per_band,
            h_max: p.h_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Fixed step; when absent, `safety` times the stability bound.
    pub dt: Option<f64>,
    pub safety: f64,
    pub record_every: Option<usize>,
    pub mode: SpeedMode,
    pub curvature: bool,
    pub reinit_every: Option<usize>,
    /// Band half-width for `no-interior`; defaults to `h/2`.
    pub tol: Option<f64>,
    pub beta: f64,
    pub region: Option<f64>,
    pub margin: f64,
    pub agreement_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let g = GenerationOptions::default();
        SolverSection {
            dt: None,
            safety: 0.9,
            record_every: None,
            mode: SpeedMode::LowerEnvelope,
            curvature: false,
            reinit_every: None,
            tol: None,
            beta: g.beta,
            region: None,
            margin: g.margin,
            agreement_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

fn parse_toml(text: &str, path: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn override_value(value: &str) -> toml::Value {
    match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Applies `section.key=value` to `table`; dotted keys may go deeper.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.len() < 2 || path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} must look like section.key")));
    }
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?}: {part} is not a table")))?;
    }
    cur.insert(path[path.len() - 1].to_string(), override_value(value.trim()));
    Ok(())
}

impl ExperimentSpec {
    /// Loads `path`, merges the referenced model file under `[model]` and
    /// applies overrides.
    pub fn load(path: &Path, overrides: &[String], model_file: Option<&Path>) -> Result<Self> {
        let text = read_text(path)?;
        let table = parse_toml(&text, &path.display().to_string())?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_table(table, base, overrides, model_file)
    }

    pub fn from_str(text: &str, base: &Path, overrides: &[String], model_file: Option<&Path>) -> Result<Self> {
        Self::from_table(parse_toml(text, "<spec>")?, base.to_path_buf(), overrides, model_file)
    }

    fn from_table(mut table: toml::Table, base: PathBuf, overrides: &[String], model_file: Option<&Path>) -> Result<Self> {
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let listed = table
            .get("experiment")
            .and_then(|e| e.get("model_file"))
            .and_then(|v| v.as_str())
            .map(|s| base.join(s));
        if let Some(file) = model_file.map(Path::to_path_buf).or(listed) {
            let text = read_text(&file)?;
            let mut loaded = parse_toml(&text, &file.display().to_string())?;
            let mut model = match loaded.remove("model") {
                Some(toml::Value::Table(t)) => t,
                _ => loaded,
            };
            // keys in the spec itself win over the model file
            if let Some(toml::Value::Table(own)) = table.remove("model") {
                model.extend(own);
            }
            table.insert("model".into(), toml::Value::Table(model));
        }
        let mut spec: ExperimentSpec = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            Error::Parse {
                path: "<spec>".into(),
                message: e.to_string(),
            }
        })?;
        spec.base = base;
        spec.check_static()?;
        Ok(spec)
    }

    fn check_static(&self) -> Result<()> {
        let g = &self.grid;
        if g.lower.len() != g.upper.len() || !(1..=2).contains(&g.lower.len()) {
            return Err(Error::Config(format!(
                "grid.lower and grid.upper need one entry per axis (1 or 2), got {} and {}",
                g.lower.len(),
                g.upper.len()
            )));
        }
        if self.experiment.initial.is_some() && self.experiment.initial_file.is_some() {
            return Err(Error::Config("set experiment.initial or experiment.initial_file, not both".into()));
        }
        if let Some(f) = &self.experiment.initial_file {
            let p = self.base.join(f);
            if !p.is_file() {
                return Err(Error::Config(format!("initial_file {} does not exist", p.display())));
            }
        }
        if let Some(e) = &self.experiment.initial {
            if e.dimension_used() > self.dim() {
                return Err(Error::Config(format!(
                    "initial expression {e} uses x{} on a {}D grid",
                    e.dimension_used(),
                    self.dim()
                )));
            }
        }
        if self.experiment.times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("experiment.times must be nonnegative".into()));
        }
        if !(self.solver.safety > 0.0 && self.solver.safety <= 1.0) {
            return Err(Error::Config(format!("solver.safety must lie in (0, 1], got {}", self.solver.safety)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.grid.lower.len()
    }

    fn point(v: &[f64]) -> Point {
        [v[0], v.get(1).copied().unwrap_or(0.0)]
    }

    pub fn lower(&self) -> Point {
        Self::point(&self.grid.lower)
    }

    pub fn upper(&self) -> Point {
        Self::point(&self.grid.upper)
    }

    fn h(&self) -> Result<Option<f64>> {
        match (self.grid.h, self.grid.n) {
            (Some(_), Some(_)) => Err(Error::Config("set grid.h or grid.n, not both".into())),
            (Some(h), None) => Ok(Some(h)),
            (None, Some(n)) if n >= 2 => Ok(Some((self.upper()[0] - self.lower()[0]) / n as f64)),
            (None, Some(n)) => Err(Error::Config(format!("grid.n must be at least 2, got {n}"))),
            (None, None) => Ok(None),
        }
    }

    /// The fixed grid, at `h` scaled by `refine`.
    pub fn grid(&self, refine: f64) -> Result<Grid> {
        let h = self.h()?.ok_or_else(|| Error::Config("grid.h or grid.n is required".into()))?;
        Ok(Grid::covering(self.dim(), self.lower(), self.upper(), h / refine)?.with_boundary(self.grid.boundary))
    }

    pub fn t_end(&self) -> Result<f64> {
        let t = self
            .experiment
            .t_end
            .or_else(|| self.experiment.times.iter().copied().reduce(f64::max))
            .ok_or_else(|| Error::Config("experiment.t_end or experiment.times is required".into()))?;
        if !(t > 0.0) {
            return Err(Error::Config(format!("t_end must be positive, got {t}")));
        }
        Ok(t)
    }

    pub fn velocity_model(&self) -> Result<VelocityModel> {
        let m = &self.model;
        let missing = |k: &str| Error::Config(format!("model.{k} is required"));
        VelocityModel::new(
            m.n1.clone().ok_or_else(|| missing("n1"))?,
            m.n2.clone().ok_or_else(|| missing("n2"))?,
            m.rho.unwrap_or(0.05),
            m.interface.clone().ok_or_else(|| missing("interface"))?,
            m.k.unwrap_or(0.25),
        )
    }

    pub fn bistable(&self) -> Result<BistableModel> {
        let eps = self
            .model
            .epsilon
            .or_else(|| self.experiment.epsilons.first().copied())
            .ok_or_else(|| Error::Config("model.epsilon is required".into()))?;
        BistableModel::new(self.velocity_model()?, eps, self.model.scaling.unwrap_or_default())
    }

    /// Level-set speed: the constant `speed`, the full model when it has
    /// an epsilon, else the velocity model.
    pub fn velocity(&self) -> Result<Velocity> {
        if let Some(a) = self.model.speed {
            if self.model.n1.is_some() || self.model.n2.is_some() {
                return Err(Error::Config("model.speed excludes model.n1 and model.n2".into()));
            }
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("model.speed must be nonnegative, got {a}")));
            }
            return Ok(Velocity::Constant(a));
        }
        if self.model.epsilon.is_some() {
            Ok(Velocity::Bistable(self.bistable()?))
        } else {
            Ok(Velocity::Model(self.velocity_model()?))
        }
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        let e = self
            .experiment
            .initial
            .clone()
            .ok_or_else(|| Error::Config("experiment.initial is required".into()))?;
        Ok(match self.experiment.initial_kind {
            InitialKind::Expr => InitialData::Expr { expr: e },
            InitialKind::Wave => InitialData::Wave { distance: e },
            InitialKind::Tanh => InitialData::Tanh { distance: e },
        })
    }

    /// Reaction-diffusion data on `grid`.
    pub fn rd_initial(&self, model: &BistableModel, grid: Grid) -> Result<ScalarField> {
        match &self.experiment.initial_file {
            Some(f) => self.file_on(f, grid),
            None => self.initial_data()?.field(model, grid),
        }
    }

    /// Level-set data on `grid`: the expression itself, whatever its kind,
    /// since only its zero set matters.
    pub fn level_set_initial(&self, grid: Grid) -> Result<ScalarField> {
        match &self.experiment.initial_file {
            Some(f) => self.file_on(f, grid),
            None => {
                let e = self.initial_data()?;
                ScalarField::from_fn(grid, |x| e.distance().eval(x))
            }
        }
    }

    fn file_on(&self, f: &Path, grid: Grid) -> Result<ScalarField> {
        let p = self.base.join(f);
        let file = fs::File::open(&p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())))?;
        let field = read_field(std::io::BufReader::new(file))?;
        if !field.grid().same_layout(&grid) {
            return Err(Error::DomainMismatch(format!(
                "{} does not match the [grid] section",
                p.display()
            )));
        }
        Ok(field)
    }

    pub fn ladder(&self) -> Result<EpsLadder> {
        let policy = GridPolicy {
            cells_per_eps: self.grid.cells_per_eps,
            cells_per_band: self.grid.cells_per_band,
            h_max: self.grid.h_max.or(self.h()?),
        };
        EpsLadder::new(
            self.experiment.epsilons.clone(),
            self.bistable()?,
            self.dim(),
            self.lower(),
            self.upper(),
            policy,
        )
    }

    fn hj_config(&self, grid: Grid, velocity: &Velocity, curvature: bool) -> Result<HjConfig> {
        let t_end = self.t_end()?;
        let mut cfg = match self.solver.dt {
            Some(dt) => {
                let mut c = HjConfig::new(grid, self.solver.mode, dt, t_end);
                if curvature {
                    c.curvature = Some(crate::hj::Curvature::for_grid(&grid));
                }
                c
            }
            None => HjConfig::stable(grid, velocity, self.solver.mode, t_end, curvature, self.solver.safety)?,
        };
        cfg.times = self.experiment.times.clone();
        cfg.reinit_every = self.solver.reinit_every;
        Ok(cfg)
    }

    fn sample_points(&self) -> Result<Vec<Point>> {
        let grid = match self.h()? {
            Some(_) => self.grid(1.0)?,
            None => Grid::covering(self.dim(), self.lower(), self.upper(), 0.05)?,
        };
        Ok((0..grid.len()).map(|k| grid.coord(k)).collect())
    }
}

/// Refuses models failing a blocking structural check.
fn require_runnable(model: &BistableModel, samples: &[Point]) -> Result<ValidationReport> {
    let report = validate_assumptions(model, samples);
    if !report.runnable() {
        let names: Vec<String> = report
            .failed()
            .filter(|c| c.blocking)
            .map(|c| format!("{} (margin {:e} at {:?})", c.name, c.worst_margin, c.worst_point))
            .collect();
        return Err(Error::InvalidModel(format!("failed checks: {}", names.join(", "))));
    }
    Ok(report)
}

/// Where artifacts go. Files are written next to their target under a
/// temporary name and renamed into place.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Output { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp{}", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &target)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn write_field(&self, name: &str, field: &ScalarField) -> Result<()> {
        let mut buf = Vec::new();
        write_field(&mut buf, field)?;
        self.write(name, &buf)
    }

    /// Writes `u_NNNN.field` per snapshot and `index.csv`.
    pub fn write_series(&self, snapshots: &[(f64, ScalarField, usize)]) -> Result<()> {
        let mut index = String::from("t,path,front_point_count\n");
        for (i, (t, u, count)) in snapshots.iter().enumerate() {
            let name = format!("u_{i:04}.field");
            self.write_field(&name, u)?;
            index.push_str(&format!("{t},{name},{count}\n"));
        }
        self.write("index.csv", index.as_bytes())
    }
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    name: &'a str,
    command: &'a str,
    h: f64,
    dt: f64,
    steps: usize,
    warnings: Vec<String>,
}

/// Parses a `--seed` value.
pub fn parse_seed(text: &str, grid: &Grid, u0: Option<&ScalarField>) -> Result<Seed> {
    let text = text.trim();
    if text == "zero-set" {
        let u0 = u0.ok_or_else(|| Error::Config("seed zero-set needs experiment.initial".into()))?;
        let cells: Vec<usize> = (0..grid.len()).filter(|&k| u0.values()[k] <= 0.0).collect();
        return Ok(Seed::Cells(cells));
    }
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("seed {text:?} must be zero-set, point:x[,y] or cells:i,...")))?;
    let bad = |e: String| Error::Config(format!("seed {text:?}: {e}"));
    match kind {
        "point" => {
            let v: Vec<f64> = rest
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
                .collect::<Result<_>>()?;
            if v.is_empty() || v.len() > 2 {
                return Err(bad("a point needs one or two coordinates".into()));
            }
            Ok(Seed::Point([v[0], v.get(1).copied().unwrap_or(0.0)]))
        }
        "cells" => {
            let v: Vec<usize> = rest
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| bad(e.to_string())))
                .collect::<Result<_>>()?;
            if let Some(k) = v.iter().find(|&&k| k >= grid.len()) {
                return Err(bad(format!("cell {k} outside a grid of {} nodes", grid.len())));
            }
            Ok(Seed::Cells(v))
        }
        _ => Err(bad(format!("unknown seed kind {kind}"))),
    }
}

fn level_set_series(sol: &HjSolution) -> Vec<(f64, ScalarField, usize)> {
    sol.snapshots
        .iter()
        .map(|(t, u)| (*t, u.clone(), crate::field::zero_level_set(u, 0.0).gamma.len()))
        .collect()
}

fn run_rd(spec: &ExperimentSpec, out: &Output) -> Result<String> {
    let model = spec.bistable()?;
    let grid = spec.grid(1.0)?;
    require_runnable(&model, &(0..grid.len()).map(|k| grid.coord(k)).collect::<Vec<_>>())?;
    let g = spec.rd_initial(&model, grid)?;
    let t_end = spec.t_end()?;
    let record_every = spec.solver.record_every.unwrap_or(usize::MAX);
    let cfg = match spec.solver.dt {
        Some(dt) => RdConfig::new(model, grid, dt, t_end, record_every),
        None => RdConfig::stable(model, grid, t_end, spec.solver.safety).with_record_every(record_every),
    }
    .with_record_times(spec.experiment.times.iter().copied());
    cfg.check()?;
    let traj = rd_run(&cfg, &g)?;
    let series: Vec<(f64, ScalarField, usize)> = traj
        .snapshots
        .iter()
        .map(|(t, u)| (*t, u.clone(), front_position(&traj, *t).gamma.len()))
        .collect();
    out.write_series(&series)?;
    out.write_json(
        "report.json",
        &RunReport {
            name: &spec.experiment.name,
            command: "rd-run",
            h: grid.h(),
            dt: cfg.dt,
            steps: traj.steps,
            warnings: cfg.resolution_warnings(),
        },
    )?;
    Ok(format!("rd-run: {} steps, {} snapshots", traj.steps, series.len()))
}

fn run_hj(spec: &ExperimentSpec, out: &Output, curvature: bool) -> Result<String> {
    let grid = spec.grid(1.0)?;
    let velocity = spec.velocity()?;
    let u0 = spec.level_set_initial(grid)?;
    let curvature = curvature || spec.solver.curvature;
    let cfg = spec.hj_config(grid, &velocity, curvature)?;
    let sol = if curvature {
        mcf_run(&cfg, &u0, &velocity)?
    } else {
        hj_run(&cfg, &u0, &velocity)?
    };
    let command = if curvature { "mcf-run" } else { "hj-run" };
    out.write_series(&level_set_series(&sol))?;
    out.write_json(
        "report.json",
        &RunReport {
            name: &spec.experiment.name,
            command,
            h: grid.h(),
            dt: cfg.dt,
            steps: sol.steps,
            warnings: Vec::new(),
        },
    )?;
    Ok(format!("{command}: {} steps, {} snapshots", sol.steps, sol.snapshots.len()))
}

#[derive(Debug, Serialize)]
struct ArrivalReport<'a> {
    name: &'a str,
    stencil: Stencil,
    distortion: f64,
    h: f64,
    seed: &'a Seed,
    max_time: Option<f64>,
    unreached: usize,
}

fn run_arrival(spec: &ExperimentSpec, out: &Output, seed: Option<&str>) -> Result<String> {
    let grid = spec.grid(1.0)?;
    let velocity = spec.velocity()?;
    let u0 = match (&spec.experiment.initial, &spec.experiment.initial_file) {
        (None, None) => None,
        _ => Some(spec.level_set_initial(grid)?),
    };
    let text = seed
        .map(str::to_string)
        .or_else(|| spec.experiment.seed.clone())
        .unwrap_or_else(|| "zero-set".into());
    let seed = parse_seed(&text, &grid, u0.as_ref())?;
    let field = arrival_time(&seed, &velocity, &grid, spec.experiment.stencil)?;
    out.write_field("arrival.field", &field.to_field()?)?;
    let finite = field.times.iter().copied().filter(|t| t.is_finite());
    let max_time = finite.clone().reduce(f64::max);
    let unreached = field.times.len() - finite.count();
    out.write_json(
        "report.json",
        &ArrivalReport {
            name: &spec.experiment.name,
            stencil: spec.experiment.stencil,
            distortion: spec.experiment.stencil.distortion(),
            h: grid.h(),
            seed: &seed,
            max_time,
            unreached,
        },
    )?;
    Ok(format!("arrival: max time {max_time:?}, {unreached} unreached nodes"))
}

fn run_represent(spec: &ExperimentSpec, out: &Output) -> Result<String> {
    let grid = spec.grid(1.0)?;
    let velocity = spec.velocity()?;
    let u0 = spec.level_set_initial(grid)?;
    if spec.experiment.times.is_empty() {
        return Err(Error::Config("represent needs experiment.times".into()));
    }
    let rep = Representation::new(&u0, &velocity, spec.experiment.stencil)?;
    let series: Vec<(f64, ScalarField, usize)> = spec
        .experiment
        .times
        .iter()
        .map(|&t| {
            let u = rep.at(t);
            let n = crate::field::zero_level_set(&u, 0.0).gamma.len();
            (t, u, n)
        })
        .collect();
    out.write_series(&series)?;
    Ok(format!("represent: {} snapshots", series.len()))
}

#[derive(Debug, Serialize)]
struct BracketReport<'a> {
    name: &'a str,
    h: f64,
    epsilon: Option<f64>,
    max_gap: Option<f64>,
    /// `2h + 3ε` when the model has an epsilon.
    bound: Option<f64>,
    within_bound: Option<bool>,
}

fn run_bracket(spec: &ExperimentSpec, out: &Output) -> Result<String> {
    let grid = spec.grid(1.0)?;
    let velocity = spec.velocity()?;
    let u0 = spec.level_set_initial(grid)?;
    let (bracket, eps) = match &velocity {
        Velocity::Bistable(model) => {
            require_runnable(model, &(0..grid.len()).map(|k| grid.coord(k)).collect::<Vec<_>>())?;
            let speed_for_cfl = Velocity::Bistable(model.clone());
            let mut cfg = spec.hj_config(grid, &speed_for_cfl, false)?;
            if spec.solver.dt.is_none() {
                let a = HjConfig::stable(grid, &speed_for_cfl, SpeedMode::OneSidedLower, cfg.t_end, false, 1.0)?;
                let b = HjConfig::stable(grid, &speed_for_cfl, SpeedMode::OneSidedUpper, cfg.t_end, false, 1.0)?;
                cfg.dt = cfg.dt.min(spec.solver.safety * a.dt.min(b.dt));
            }
            (bracket_run(&cfg, &u0, model)?, Some(model.epsilon))
        }
        v => {
            let cfg = spec.hj_config(grid, v, false)?;
            let upper = HjConfig::stable(grid, v, SpeedMode::UpperEnvelope, cfg.t_end, false, spec.solver.safety)?;
            let cfg = HjConfig { dt: cfg.dt.min(upper.dt), ..cfg };
            (envelope_bracket_run(&cfg, &u0, v)?, None)
        }
    };
    let mut csv = Vec::new();
    write_gap_csv(&mut csv, &bracket.gap)?;
    out.write("gap.csv", &csv)?;
    out.write_field("lower_final.field", bracket.lower.final_state())?;
    out.write_field("upper_final.field", bracket.upper.final_state())?;
    let max_gap = bracket.max_gap();
    let bound = eps.map(|e| 2.0 * grid.h() + 3.0 * e);
    out.write_json(
        "report.json",
        &BracketReport {
            name: &spec.experiment.name,
            h: grid.h(),
            epsilon: eps,
            max_gap,
            bound,
            within_bound: bound.zip(max_gap).map(|(b, g)| g <= b),
        },
    )?;
    Ok(format!("bracket: max gap {max_gap:?}"))
}

fn run_converge(spec: &ExperimentSpec, out: &Output) -> Result<String> {
    let ladder = spec.ladder()?;
    let times = &spec.experiment.times;
    if times.is_empty() {
        return Err(Error::Config("converge needs experiment.times".into()));
    }
    let finest = *ladder.epsilons().last().expect("ladder has entries");
    let ref_grid = match spec.h()? {
        Some(_) => spec.grid(1.0)?,
        None => ladder.grid_for(finest)?,
    };
    let model = ladder.model_for(finest)?;
    require_runnable(&model, &(0..ref_grid.len()).map(|k| ref_grid.coord(k)).collect::<Vec<_>>())?;
    let initial = spec.initial_data()?;
    let u0 = ScalarField::from_fn(ref_grid, |x| initial.distance().eval(x))?;
    let velocity = Velocity::Model(model.velocity.clone());
    let reference: ReferenceFronts = match spec.experiment.reference {
        ReferenceKind::Arrival => arrival_reference(&u0, &velocity, spec.experiment.stencil, times)?,
        ReferenceKind::Hj => {
            let curvature = model.scaling == Scaling::Two;
            let cfg = spec.hj_config(ref_grid, &velocity, curvature)?.with_times(times.iter().copied());
            let sol = if curvature {
                mcf_run(&cfg, &u0, &velocity)?
            } else {
                hj_run(&cfg, &u0, &velocity)?
            };
            hj_reference(&sol, times)
        }
    };
    let report = converge_report(&ladder, &initial, &reference, times, spec.solver.agreement_tol)?;
    out.write_json("report.json", &report)?;
    out.write("report.csv", report.to_csv().as_bytes())?;
    Ok(format!("converge: {}", report.verdicts.join("; ")))
}

#[derive(Debug, Serialize)]
struct NoInteriorSummary<'a> {
    name: &'a str,
    reports: Vec<NoInteriorReport>,
    verdict: Verdict,
}

fn run_no_interior(spec: &ExperimentSpec, out: &Output) -> Result<String> {
    let velocity = spec.velocity()?;
    let mut reports = Vec::new();
    for refine in [1.0, 2.0] {
        let grid = spec.grid(refine)?;
        let u0 = spec.level_set_initial(grid)?;
        let cfg = spec.hj_config(grid, &velocity, spec.solver.curvature)?;
        let cfg = if spec.solver.dt.is_some() && refine > 1.0 {
            HjConfig { dt: cfg.dt / (refine * refine), ..cfg }
        } else {
            cfg
        };
        let sol = if spec.solver.curvature {
            mcf_run(&cfg, &u0, &velocity)?
        } else {
            hj_run(&cfg, &u0, &velocity)?
        };
        reports.push(no_interior_check(&sol.snapshots, spec.solver.tol));
    }
    let verdict = combined_verdict(&reports);
    out.write_json(
        "report.json",
        &NoInteriorSummary {
            name: &spec.experiment.name,
            reports,
            verdict,
        },
    )?;
    Ok(format!(
        "no-interior: {}",
        match verdict {
            Verdict::NoFattening => "no fattening detected",
            Verdict::Fattening => "fattening",
        }
    ))
}

fn run_validate(spec: &ExperimentSpec, out: &Output) -> Result<String> {
    let model = spec.bistable()?;
    let samples = spec.sample_points()?;
    let report = validate_assumptions(&model, &samples);
    out.write_json("report.json", &report)?;
    let failed: Vec<&str> = report.failed().map(|c| c.name).collect();
    require_runnable(&model, &samples)?;
    Ok(if failed.is_empty() {
        format!("validate: all {} checks passed", report.checks.len())
    } else {
        format!("validate: runnable, non-blocking checks failed: {}", failed.join(", "))
    })
}

fn run_gen_time(spec: &ExperimentSpec, out: &Output) -> Result<String> {
    let ladder = spec.ladder()?;
    let finest = *ladder.epsilons().last().expect("ladder has entries");
    let g = ladder.grid_for(finest)?;
    require_runnable(&ladder.model_for(finest)?, &(0..g.len()).map(|k| g.coord(k)).collect::<Vec<_>>())?;
    let opts = GenerationOptions {
        beta: spec.solver.beta,
        region: spec.solver.region,
        t_end: spec.t_end()?,
        margin: spec.solver.margin,
    };
    let initial = spec.initial_data()?;
    let distance = spec.experiment.distance.clone().unwrap_or_else(|| initial.distance().clone());
    let fit = generation_ladder(&ladder, &initial, &distance, &opts)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_else(|| "nan".into());
    let mut csv = String::from("epsilon,time,scale,ratio\n");
    for i in 0..fit.epsilons.len() {
        csv.push_str(&format!(
            "{:e},{},{:e},{}\n",
            fit.epsilons[i],
            opt(fit.times[i]),
            fit.scales[i],
            opt(fit.ratios[i])
        ));
    }
    out.write("gen_time.csv", csv.as_bytes())?;
    out.write_json("report.json", &fit)?;
    Ok(format!("gen-time: ratio spread {:?}", fit.spread))
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let model_flag = match &cli.command {
        Command::Arrival { model, .. } | Command::Validate { model } => model.as_deref(),
        _ => None,
    };
    match (&cli.spec, &cli.command) {
        (Some(path), _) => ExperimentSpec::load(path, &cli.overrides, model_flag),
        (None, Command::Validate { .. }) => match model_flag {
            Some(m) => ExperimentSpec::from_str("", Path::new("."), &cli.overrides, Some(m)),
            None => {
                let mut table = parse_toml(DEFAULT_MODEL, "default model")?;
                let model = table.remove("model").unwrap_or(toml::Value::Table(table));
                let mut spec = toml::Table::new();
                spec.insert("model".into(), model);
                let text = toml::to_string(&spec).map_err(|e| Error::Config(e.to_string()))?;
                ExperimentSpec::from_str(&text, Path::new("."), &cli.overrides, None)
            }
        },
        (None, c) => Err(Error::Config(format!("{} needs --spec", c.name()))),
    }
}

/// Runs a parsed command line and returns the summary line.
pub fn run(cli: &Cli) -> Result<String> {
    let spec = load_spec(cli)?;
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&spec.experiment.name));
    let work = || -> Result<String> {
        let out = Output::new(dir.clone())?;
        match &cli.command {
            Command::RdRun => run_rd(&spec, &out),
            Command::HjRun => run_hj(&spec, &out, false),
            Command::McfRun => run_hj(&spec, &out, true),
            Command::Arrival { seed, .. } => run_arrival(&spec, &out, seed.as_deref()),
            Command::Represent => run_represent(&spec, &out),
            Command::Bracket => run_bracket(&spec, &out),
            Command::Converge => run_converge(&spec, &out),
            Command::NoInterior => run_no_interior(&spec, &out),
            Command::Validate { .. } => run_validate(&spec, &out),
            Command::GenTime => run_gen_time(&spec, &out),
        }
    };
    match cli.jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Exit status for a result: 0, 2 for spec or validation errors, 3 for
/// numerical failures.
pub fn exit_code(result: &Result<String>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_numerical() => 3,
        Err(_) => 2,
    }
}

/// Entry point for the binary: parses `args`, runs, reports and returns the
/// exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&cli);
    match &result {
        Ok(summary) => println!("{summary}"),
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_keys() {
        let mut t: toml::Table = "[solver]\ndt = 0.1\n".parse().unwrap();
        apply_override(&mut t, "solver.dt=0.5").unwrap();
        apply_override(&mut t, "model.interface.offset = 2").unwrap();
        apply_override(&mut t, "experiment.name=run-a").unwrap();
        assert_eq!(t["solver"]["dt"].as_float(), Some(0.5));
        assert_eq!(t["model"]["interface"]["offset"].as_integer(), Some(2));
        assert_eq!(t["experiment"]["name"].as_str(), Some("run-a"));
        assert!(apply_override(&mut t, "dt=0.5").is_err());
        assert!(apply_override(&mut t, "solver.dt").is_err());
    }

    #[test]
    fn spec_sections_parse() {
        let text = r#"
            [experiment]
            name = "t"
            initial = "x1 - 0.5"
            initial_kind = "wave"
            times = [0.1, 0.2]

            [model]
            n1 = 1.0
            n2 = 1.5
            rho = 0.25
            epsilon = 0.05
            interface = { kind = "hyperplane", normal = [1.0, 0.0], offset = 0.0 }

            [grid]
            lower = [-1.0]
            upper = [1.0]
            n = 100
        "#;
        let spec = ExperimentSpec::from_str(text, Path::new("."), &[], None).unwrap();
        assert_eq!(spec.dim(), 1);
        assert!((spec.grid(1.0).unwrap().h() - 0.02).abs() < 1e-15);
        assert_eq!(spec.t_end().unwrap(), 0.2);
        assert!(matches!(spec.initial_data().unwrap(), InitialData::Wave { .. }));
        assert!(matches!(spec.velocity().unwrap(), Velocity::Bistable(_)));
    }

    #[test]
    fn unknown_keys_and_bad_grids_are_rejected() {
        let bad = ExperimentSpec::from_str("[solver]\nsafty = 0.5\n", Path::new("."), &[], None);
        assert!(matches!(bad, Err(Error::Parse { .. })));
        let bad = ExperimentSpec::from_str("[grid]\nlower = [0.0]\nupper = [1.0, 1.0]\n", Path::new("."), &[], None);
        assert!(matches!(bad, Err(Error::Config(_))));
        let bad = ExperimentSpec::from_str("[experiment]\ninitial = \"x1 +\"\n", Path::new("."), &[], None);
        assert!(bad.is_err());
    }

    #[test]
    fn seeds_parse() {
        let g = Grid::new_2d([0.0, 0.0], 0.1, [5, 5]).unwrap();
        assert_eq!(parse_seed("point:0.1, 0.2", &g, None).unwrap(), Seed::Point([0.1, 0.2]));
        assert_eq!(parse_seed("cells:0,3", &g, None).unwrap(), Seed::Cells(vec![0, 3]));
        assert!(parse_seed("cells:25", &g, None).is_err());
        assert!(parse_seed("zero-set", &g, None).is_err());
        let u = ScalarField::from_fn(g, |x| x[0] - 0.15).unwrap();
        match parse_seed("zero-set", &g, Some(&u)).unwrap() {
            Seed::Cells(c) => assert_eq!(c.len(), 10),
            s => panic!("{s:?}"),
        }
        assert!(parse_seed("ball:1", &g, None).is_err());
    }

    #[test]
    fn bundled_default_model_is_valid() {
        let cli = Cli::try_parse_from(["frontlim", "validate"]).unwrap();
        let spec = load_spec(&cli).unwrap();
        let model = spec.bistable().unwrap();
        let report = validate_assumptions(&model, &spec.sample_points().unwrap());
        assert!(report.all_passed(), "{:?}", report.failed().collect::<Vec<_>>());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(String::new())), 0);
        assert_eq!(exit_code(&Err(Error::Config("x".into()))), 2);
        let blow = Error::Blowup {
            solver: "rd",
            step: 3,
            time: 0.1,
        };
        assert_eq!(exit_code(&Err(blow)), 3);
    }
}
