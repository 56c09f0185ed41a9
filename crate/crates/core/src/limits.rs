//! The ε-ladder harness: relaxed half-limits, the sets Ω¹/Ω², convergence
//! of the reaction-diffusion fronts to a reference flow, and the generation
//! time of the interface.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{brute_force_distance, hausdorff, zero_level_set, Grid, Point, ScalarField};
use crate::model::{cubic, BistableModel, Scaling};
use crate::rd::{equilibrium_fraction, front_position, linear_slope, rd_run, RdConfig, RdSolver, RdTrajectory};

/// How the spacing follows ε.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridPolicy {
    /// `h <= ε / cells_per_eps`.
    pub cells_per_eps: f64,
    /// `h <= ε^k / cells_per_band`.
    pub cells_per_band: f64,
    /// Optional absolute cap.
    pub h_max: Option<f64>,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            cells_per_eps: 4.0,
            cells_per_band: 4.0,
            h_max: None,
        }
    }
}

impl GridPolicy {
    pub fn spacing(&self, eps: f64, k: f64) -> f64 {
        let h = (eps / self.cells_per_eps).min(eps.powf(k) / self.cells_per_band);
        match self.h_max {
            Some(m) => h.min(m),
            None => h,
        }
    }
}

/// A decreasing list of ε values sharing one model and one box.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsLadder {
    epsilons: Vec<f64>,
    pub model: BistableModel,
    pub dim: usize,
    pub lower: Point,
    pub upper: Point,
    pub policy: GridPolicy,
}

impl EpsLadder {
    pub fn new(
        epsilons: Vec<f64>,
        model: BistableModel,
        dim: usize,
        lower: Point,
        upper: Point,
        policy: GridPolicy,
    ) -> Result<Self> {
        if epsilons.len() < 3 {
            return Err(Error::Config(format!(
                "an epsilon ladder needs at least 3 entries, got {}",
                epsilons.len()
            )));
        }
        if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Config("ladder epsilons must be positive".into()));
        }
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("ladder epsilons must be strictly decreasing".into()));
        }
        if !(policy.cells_per_eps > 0.0) || !(policy.cells_per_band > 0.0) {
            return Err(Error::Config("grid policy ratios must be positive".into()));
        }
        model.check()?;
        Ok(EpsLadder {
            epsilons,
            model,
            dim,
            lower,
            upper,
            policy,
        })
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn model_for(&self, eps: f64) -> Result<BistableModel> {
        self.model.with_epsilon(eps)
    }

    pub fn grid_for(&self, eps: f64) -> Result<Grid> {
        let h = self.policy.spacing(eps, self.model.velocity.k);
        Grid::covering(self.dim, self.lower, self.upper, h)
    }
}

/// Initial data for a ladder run, possibly depending on ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialData {
    /// A fixed expression.
    Expr { expr: Expr },
    /// The traveling wave across the zero set of `distance`:
    /// `tanh(d(x)/ε + r^ε(x))`, whose front sits on the unstable root.
    Wave { distance: Expr },
    /// `tanh(d(x)/ε)`.
    Tanh { distance: Expr },
}

impl InitialData {
    pub fn eval(&self, model: &BistableModel, x: Point) -> f64 {
        let e = model.epsilon;
        match self {
            InitialData::Expr { expr } => expr.eval(x),
            InitialData::Wave { distance } => model.traveling_wave(distance.eval(x) / e, x),
            InitialData::Tanh { distance } => (distance.eval(x) / e).tanh(),
        }
    }

    pub fn field(&self, model: &BistableModel, grid: Grid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.eval(model, x))
    }

    /// A function whose zero set is the initial front: the distance
    /// expression, or the data itself.
    pub fn distance(&self) -> &Expr {
        match self {
            InitialData::Expr { expr } => expr,
            InitialData::Wave { distance } | InitialData::Tanh { distance } => distance,
        }
    }
}

/// Empirical half-limits on a common grid.
#[derive(Debug, Clone)]
pub struct RelaxedLimits {
    pub liminf: ScalarField,
    pub limsup: ScalarField,
    /// Window radius used.
    pub radius: f64,
    /// `max |u_a - u_b|` over the two finest entries, after resampling.
    pub finest_gap: f64,
}

/// Sorts by ε, checks the boxes agree and resamples the two smallest-ε
/// fields to the coarser of their grids.
fn finest_pair(fields: &[(f64, ScalarField)]) -> Result<(ScalarField, ScalarField, f64, f64)> {
    if fields.len() < 2 {
        return Err(Error::Precondition("relaxed limits need at least two epsilon entries".into()));
    }
    let mut sorted: Vec<&(f64, ScalarField)> = fields.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (ea, a) = (sorted[0].0, &sorted[0].1);
    let (eb, b) = (sorted[1].0, &sorted[1].1);
    let (ga, gb) = (a.grid(), b.grid());
    let tol = ga.h().max(gb.h());
    let same_box = ga.dim() == gb.dim()
        && (0..ga.dim()).all(|d| {
            (ga.origin()[d] - gb.origin()[d]).abs() <= tol && (ga.upper()[d] - gb.upper()[d]).abs() <= tol
        });
    if !same_box {
        return Err(Error::DomainMismatch(format!(
            "fields cover different boxes: {:?}..{:?} and {:?}..{:?}",
            ga.origin(),
            ga.upper(),
            gb.origin(),
            gb.upper()
        )));
    }
    let target = if ga.h() >= gb.h() { *ga } else { *gb };
    Ok((a.resample_nearest(&target), b.resample_nearest(&target), ea, eb))
}

/// Min and max over a disk of radius `r` and over both fields.
fn windowed(a: &ScalarField, b: &ScalarField, r: f64) -> (ScalarField, ScalarField) {
    let grid = *a.grid();
    let h = grid.h();
    let reach = (r / h + 1e-9).floor() as isize;
    let mut offsets = Vec::new();
    let dj_range = if grid.dim() == 2 { -reach..=reach } else { 0..=0 };
    for dj in dj_range {
        for di in -reach..=reach {
            if ((di * di + dj * dj) as f64).sqrt() * h <= r + 1e-12 {
                offsets.push((di, dj));
            }
        }
    }
    let [nx, ny] = grid.extents();
    let mut lo = vec![0.0; grid.len()];
    let mut hi = vec![0.0; grid.len()];
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(di, dj) in &offsets {
            let (qi, qj) = (i as isize + di, j as isize + dj);
            if qi < 0 || qj < 0 || qi >= nx as isize || qj >= ny as isize {
                continue;
            }
            let q = grid.index(qi as usize, qj as usize);
            for v in [a.values()[q], b.values()[q]] {
                mn = mn.min(v);
                mx = mx.max(v);
            }
        }
        lo[k] = mn;
        hi[k] = mx;
    }
    (ScalarField::from_parts(grid, lo), ScalarField::from_parts(grid, hi))
}

/// Discrete lower and upper relaxed limits from the two smallest ε entries
/// over a window of radius `radius` (default two cells of the common grid).
pub fn relaxed_limits(fields: &[(f64, ScalarField)], radius: Option<f64>) -> Result<RelaxedLimits> {
    let (a, b, _, _) = finest_pair(fields)?;
    let r = radius.unwrap_or(2.0 * a.grid().h());
    let (liminf, limsup) = windowed(&a, &b, r);
    Ok(RelaxedLimits {
        liminf,
        limsup,
        radius: r,
        finest_gap: a.sup_distance(&b),
    })
}

/// Relaxed limits of the rescaled families used under scaling two: the
/// lower limit of `(u - 1)/ε` and the upper limit of `(u + 1)/ε`.
pub fn scaled_relaxed_limits(fields: &[(f64, ScalarField)], radius: Option<f64>) -> Result<RelaxedLimits> {
    let (a, b, ea, eb) = finest_pair(fields)?;
    let r = radius.unwrap_or(2.0 * a.grid().h());
    let scale = |f: &ScalarField, e: f64, shift: f64| -> ScalarField {
        let v = f.values().iter().map(|u| (u + shift) / e).collect();
        ScalarField::from_parts(*f.grid(), v)
    };
    let (lower, _) = windowed(&scale(&a, ea, -1.0), &scale(&b, eb, -1.0), r);
    let (_, upper) = windowed(&scale(&a, ea, 1.0), &scale(&b, eb, 1.0), r);
    Ok(RelaxedLimits {
        liminf: lower,
        limsup: upper,
        radius: r,
        finest_gap: a.sup_distance(&b),
    })
}

/// Ω¹ = `{liminf >= 1 - tol}` and Ω² = `{limsup <= -1 + tol}`.
pub fn omega_sets(liminf: &ScalarField, limsup: &ScalarField, tol: f64) -> Result<(Vec<bool>, Vec<bool>)> {
    check_tol(tol)?;
    Ok((
        liminf.values().iter().map(|&v| v >= 1.0 - tol).collect(),
        limsup.values().iter().map(|&v| v <= -1.0 + tol).collect(),
    ))
}

/// The sets for [`scaled_relaxed_limits`]: Ω¹ = `{lower >= -tol}`,
/// Ω² = `{upper <= tol}`.
pub fn scaled_omega_sets(lower: &ScalarField, upper: &ScalarField, tol: f64) -> Result<(Vec<bool>, Vec<bool>)> {
    check_tol(tol)?;
    Ok((
        lower.values().iter().map(|&v| v >= -tol).collect(),
        upper.values().iter().map(|&v| v <= tol).collect(),
    ))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("tolerance must lie in (0, 1), got {tol}")))
    }
}

/// Reference fronts at the report times.
pub type ReferenceFronts = Vec<(f64, Vec<Point>)>;

/// Fronts of the representation formula with speed `α_*`, from the zero set
/// of `u0`.
pub fn arrival_reference(
    u0: &ScalarField,
    velocity: &crate::model::Velocity,
    stencil: crate::arrival::Stencil,
    times: &[f64],
) -> Result<ReferenceFronts> {
    let rep = crate::arrival::Representation::new(u0, velocity, stencil)?;
    Ok(times
        .iter()
        .map(|&t| (t, zero_level_set(&rep.at(t), 0.0).gamma))
        .collect())
}

/// Fronts of a level-set solution at `times` (nearest snapshots).
pub fn hj_reference(sol: &crate::hj::HjSolution, times: &[f64]) -> ReferenceFronts {
    times.iter().map(|&t| (t, sol.front(t).gamma)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderEntry {
    pub epsilon: f64,
    pub h: f64,
    pub steps: usize,
    /// Hausdorff distance to the reference front per report time; `None`
    /// when either front is empty.
    pub hausdorff: Vec<Option<f64>>,
    pub plus_fraction: Vec<Option<f64>>,
    pub minus_fraction: Vec<Option<f64>>,
    pub margin: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// Always "empirical half-limits": the limits come from finitely many ε.
    pub label: String,
    pub times: Vec<f64>,
    /// Ordered by decreasing ε.
    pub entries: Vec<LadderEntry>,
    /// Per time: distances strictly decrease along the ladder.
    pub strictly_decreasing: Vec<bool>,
    /// Per time: distances decrease along the ladder up to one inversion of
    /// at most one cell.
    pub decreasing_up_to_noise: Vec<bool>,
    /// Per time: sup distance between the two finest solutions away from
    /// the finest front.
    pub finest_gap: Vec<Option<f64>>,
    pub verdicts: Vec<String>,
}

impl ConvergenceReport {
    pub fn finest(&self) -> &LadderEntry {
        &self.entries[self.entries.len() - 1]
    }

    /// CSV `epsilon,h,t,hausdorff,plus_fraction,minus_fraction`.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_else(|| "nan".into());
        let mut s = String::from("epsilon,h,t,hausdorff,plus_fraction,minus_fraction\n");
        for e in &self.entries {
            for (i, t) in self.times.iter().enumerate() {
                s.push_str(&format!(
                    "{:e},{:e},{:e},{},{},{}\n",
                    e.epsilon,
                    e.h,
                    t,
                    opt(e.hausdorff[i]),
                    opt(e.plus_fraction[i]),
                    opt(e.minus_fraction[i])
                ));
            }
        }
        s
    }
}

/// Decreasing along the ladder, optionally tolerating one rise of at most `noise`.
fn decreasing(series: &[Option<f64>], noise: Option<f64>) -> bool {
    let vals: Option<Vec<f64>> = series.iter().copied().collect();
    let Some(vals) = vals else { return false };
    let mut allowance = noise.map(|n| (1usize, n)).unwrap_or((0, 0.0));
    for w in vals.windows(2) {
        if w[1] < w[0] {
            continue;
        }
        if allowance.0 > 0 && w[1] - w[0] <= allowance.1 {
            allowance.0 -= 1;
            continue;
        }
        return false;
    }
    true
}

/// Runs the ladder and compares each front with `reference`.
///
/// `agreement_tol` is the tolerance on the finest-pair gap below which the
/// half-limit verdict is issued.
pub fn converge_report(
    ladder: &EpsLadder,
    initial: &InitialData,
    reference: &ReferenceFronts,
    times: &[f64],
    agreement_tol: f64,
) -> Result<ConvergenceReport> {
    if times.is_empty() {
        return Err(Error::Precondition("no report times".into()));
    }
    for &t in times {
        if !reference.iter().any(|(rt, _)| (rt - t).abs() <= 1e-9 * t.abs().max(1.0)) {
            return Err(Error::Precondition(format!("reference has no front at t = {t}")));
        }
    }
    let t_end = times.iter().copied().fold(0.0, f64::max);

    let runs: Vec<Result<(LadderEntry, RdTrajectory)>> = ladder
        .epsilons()
        .par_iter()
        .map(|&eps| {
            let at = |e: Error| Error::AtEpsilon {
                epsilon: eps,
                source: Box::new(e),
            };
            let model = ladder.model_for(eps).map_err(at)?;
            let grid = ladder.grid_for(eps).map_err(at)?;
            let g = initial.field(&model, grid).map_err(at)?;
            let cfg = RdConfig::stable(model.clone(), grid, t_end, 0.9)
                .with_record_every(usize::MAX)
                .with_record_times(times.iter().copied());
            let mut warnings = cfg.resolution_warnings();
            warnings.extend(influence_warning(&g, &model, t_end));
            let traj = rd_run(&cfg, &g).map_err(at)?;
            let margin = (5.0 * eps).max(4.0 * grid.h());
            let mut haus = Vec::new();
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            for &t in times {
                let front = front_position(&traj, t);
                let reference_front = &reference
                    .iter()
                    .find(|(rt, _)| (rt - t).abs() <= 1e-9 * t.abs().max(1.0))
                    .expect("checked above")
                    .1;
                haus.push(hausdorff(&front.gamma, reference_front).ok());
                let fr = equilibrium_fraction(&traj, t, &front, margin, 0.1).map_err(at)?;
                plus.push(fr.plus);
                minus.push(fr.minus);
            }
            Ok((
                LadderEntry {
                    epsilon: eps,
                    h: grid.h(),
                    steps: traj.steps,
                    hausdorff: haus,
                    plus_fraction: plus,
                    minus_fraction: minus,
                    margin,
                    warnings,
                },
                traj,
            ))
        })
        .collect();
    let mut entries = Vec::new();
    let mut trajs = Vec::new();
    for r in runs {
        let (e, t) = r?;
        entries.push(e);
        trajs.push(t);
    }

    let mut strict = Vec::new();
    let mut noisy = Vec::new();
    let mut finest_gap = Vec::new();
    let n = entries.len();
    for (i, &t) in times.iter().enumerate() {
        let series: Vec<Option<f64>> = entries.iter().map(|e| e.hausdorff[i]).collect();
        strict.push(decreasing(&series, None));
        noisy.push(decreasing(&series, Some(entries[n - 1].h.max(entries[n - 2].h))));
        finest_gap.push(finest_pair_gap(&trajs[n - 2], &trajs[n - 1], t, entries[n - 2].margin));
    }

    let mut verdicts = Vec::new();
    verdicts.push(if strict.iter().all(|&b| b) {
        "hausdorff distance strictly decreasing in epsilon at every time".to_string()
    } else if noisy.iter().all(|&b| b) {
        "hausdorff distance decreasing in epsilon up to grid noise".to_string()
    } else {
        "hausdorff distance not monotone in epsilon".to_string()
    });
    verdicts.push(if finest_gap.iter().all(|g| g.is_some_and(|g| g <= agreement_tol)) {
        format!("empirical half-limits consistent: finest entries agree within {agreement_tol} off the front")
    } else {
        format!("no half-limit verdict: finest entries differ by more than {agreement_tol} off the front")
    });

    Ok(ConvergenceReport {
        label: "empirical half-limits".into(),
        times: times.to_vec(),
        entries,
        strictly_decreasing: strict,
        decreasing_up_to_noise: noisy,
        finest_gap,
        verdicts,
    })
}

/// Sup distance between two trajectories at `t` on the coarser grid, over
/// nodes farther than `margin` from the finer run's front.
fn finest_pair_gap(coarse: &RdTrajectory, fine: &RdTrajectory, t: f64, margin: f64) -> Option<f64> {
    let a = &coarse.snapshot(t).1;
    let grid = *a.grid();
    let b = fine.snapshot(t).1.resample_nearest(&grid);
    let pts = front_position(fine, t).gamma;
    let mut gap: Option<f64> = None;
    for k in 0..grid.len() {
        if pts.is_empty() || brute_force_distance(grid.coord(k), &pts) > margin {
            let diff = (a.values()[k] - b.values()[k]).abs();
            gap = Some(gap.map_or(diff, |g: f64| g.max(diff)));
        }
    }
    gap
}

/// Warns when the initial front is closer to the box boundary than the
/// distance it can travel by `t_end`.
pub fn influence_warning(g: &ScalarField, model: &BistableModel, t_end: f64) -> Option<String> {
    let grid = *g.grid();
    let shifted: Vec<f64> = (0..grid.len())
        .map(|k| g.values()[k] - model.unstable_root(grid.coord(k)))
        .collect();
    let front = zero_level_set(&ScalarField::from_parts(grid, shifted), 0.0);
    if front.gamma.is_empty() {
        return None;
    }
    let speed = model.velocity.max_speed((0..grid.len()).map(|k| grid.coord(k)));
    let radius = t_end * speed + 5.0 * model.epsilon;
    let (lo, hi) = (grid.origin(), grid.upper());
    let room = front
        .gamma
        .iter()
        .map(|p| {
            (0..grid.dim())
                .map(|d| (p[d] - lo[d]).min(hi[d] - p[d]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);
    (room < radius).then(|| {
        format!(
            "initial front comes within {room:.3} of the box boundary but can travel {radius:.3} by t = {t_end}"
        )
    })
}

/// Settings for [`generation_time`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationOptions {
    pub beta: f64,
    /// Cells with `d0 >= region` are watched; defaults to `beta`.
    pub region: Option<f64>,
    pub t_end: f64,
    /// Required excess of `g` over the unstable root on the watched cells.
    pub margin: f64,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            beta: 0.1,
            region: None,
            t_end: 1.0,
            margin: 0.05,
        }
    }
}

/// First time at which `u >= 1 - β` (scaling one) or `u >= 1 - βε`
/// (scaling two) on every cell with `d0 >= region`. Checked after every
/// step; `None` if not reached by `t_end`.
pub fn generation_time(
    model: &BistableModel,
    g: &ScalarField,
    d0: &ScalarField,
    opts: &GenerationOptions,
) -> Result<Option<f64>> {
    let grid = *g.grid();
    if !d0.grid().same_layout(&grid) {
        return Err(Error::DomainMismatch("initial data and distance use different grids".into()));
    }
    if !(opts.beta > 0.0) {
        return Err(Error::Precondition(format!("beta must be positive, got {}", opts.beta)));
    }
    let region = opts.region.unwrap_or(opts.beta);
    let watched: Vec<usize> = (0..grid.len()).filter(|&k| d0.values()[k] >= region).collect();
    if watched.is_empty() {
        return Err(Error::Precondition(format!("no cell with d0 >= {region}")));
    }
    if let Some(&k) = watched
        .iter()
        .find(|&&k| g.values()[k] <= model.unstable_root(grid.coord(k)) + opts.margin)
    {
        return Err(Error::Precondition(format!(
            "initial data {} at {:?} does not exceed the unstable root by {}",
            g.values()[k],
            grid.coord(k),
            opts.margin
        )));
    }
    let threshold = match model.scaling {
        Scaling::One => 1.0 - opts.beta,
        Scaling::Two => 1.0 - opts.beta * model.epsilon,
    };
    let reached = |u: &[f64]| watched.iter().all(|&k| u[k] >= threshold);
    let cfg = RdConfig::stable(model.clone(), grid, opts.t_end, 0.9);
    let mut solver = RdSolver::new(&cfg, g)?;
    if reached(solver.values()) {
        return Ok(Some(0.0));
    }
    while solver.time() < opts.t_end {
        let dt = cfg.dt.min(opts.t_end - solver.time());
        solver.step(dt)?;
        if reached(solver.values()) {
            return Ok(Some(solver.time()));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationFit {
    pub scaling: Scaling,
    pub epsilons: Vec<f64>,
    pub times: Vec<Option<f64>>,
    /// `ε` (scaling one) or `ε² |ln ε|` (scaling two).
    pub scales: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
    /// Least-squares slope of time against scale.
    pub slope: Option<f64>,
    /// `max ratio / min ratio - 1`.
    pub spread: Option<f64>,
}

/// The scale `t_ε` is expected to follow.
pub fn generation_scale(scaling: Scaling, eps: f64) -> f64 {
    match scaling {
        Scaling::One => eps,
        Scaling::Two => eps * eps * eps.ln().abs(),
    }
}

/// Generation time along a ladder, with the ratio to the expected scale.
/// `distance` is the signed distance to the initial front that picks the
/// watched cells.
pub fn generation_ladder(
    ladder: &EpsLadder,
    initial: &InitialData,
    distance: &Expr,
    opts: &GenerationOptions,
) -> Result<GenerationFit> {
    let scaling = ladder.model.scaling;
    let times: Vec<Result<Option<f64>>> = ladder
        .epsilons()
        .par_iter()
        .map(|&eps| {
            let at = |e: Error| Error::AtEpsilon {
                epsilon: eps,
                source: Box::new(e),
            };
            let model = ladder.model_for(eps).map_err(at)?;
            let grid = ladder.grid_for(eps).map_err(at)?;
            let g = initial.field(&model, grid).map_err(at)?;
            let d0 = ScalarField::from_fn(grid, |x| distance.eval(x)).map_err(at)?;
            generation_time(&model, &g, &d0, opts).map_err(at)
        })
        .collect();
    let times: Vec<Option<f64>> = times.into_iter().collect::<Result<_>>()?;
    let scales: Vec<f64> = ladder
        .epsilons()
        .iter()
        .map(|&e| generation_scale(scaling, e))
        .collect();
    let ratios: Vec<Option<f64>> = times
        .iter()
        .zip(&scales)
        .map(|(t, s)| t.map(|t| t / s))
        .collect();
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&scales)
        .filter_map(|(t, s)| t.map(|t| (*s, t)))
        .collect();
    let all: Option<Vec<f64>> = ratios.iter().copied().collect();
    let spread = all.and_then(|r| {
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.iter().copied().fold(0.0, f64::max);
        (lo > 0.0).then(|| hi / lo - 1.0)
    });
    Ok(GenerationFit {
        scaling,
        epsilons: ladder.epsilons().to_vec(),
        scales,
        ratios,
        slope: if pts.len() == times.len() { linear_slope(&pts) } else { None },
        spread,
        times,
    })
}

/// RK4 solution of `χ' + f^ε(χ, x) = 0`, `χ(0) = ξ`, on `steps` equal steps
/// up to `tau_end`. Returns `(τ, χ)` pairs including the start.
pub fn ode_chi(xi: f64, x: Point, model: &BistableModel, tau_end: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    if !(tau_end > 0.0) || steps == 0 {
        return Err(Error::Precondition(format!(
            "need tau_end > 0 and at least one step, got {tau_end} and {steps}"
        )));
    }
    let c = model.c_eps(x);
    let rhs = |q: f64| -cubic(q, c);
    let dt = tau_end / steps as f64;
    let bound = xi.abs().max(1.0);
    // |f_q| on [-bound, bound]; RK4 is stable for dt |λ| below about 2.78
    let lip = 6.0 * bound * bound + 2.0 * c.abs() * bound + 2.0;
    let safe = 2.5 / lip;
    if dt > safe {
        return Err(Error::OdeStep { step: dt, suggested: safe });
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut q = xi;
    out.push((0.0, q));
    for s in 1..=steps {
        let k1 = rhs(q);
        let k2 = rhs(q + 0.5 * dt * k1);
        let k3 = rhs(q + 0.5 * dt * k2);
        let k4 = rhs(q + dt * k3);
        q += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !q.is_finite() || q.abs() > bound * (1.0 + 1e-9) {
            return Err(Error::OdeStep { step: dt, suggested: 0.5 * dt });
        }
        out.push((s as f64 * dt, q));
    }
    Ok(out)
}

/// First time the trajectory reaches `level` from below, linearly
/// interpolated between steps and refined by bisection on the segment.
pub fn first_crossing(traj: &[(f64, f64)], level: f64) -> Option<f64> {
    if traj.first().is_some_and(|p| p.1 >= level) {
        return traj.first().map(|p| p.0);
    }
    traj.windows(2).find(|w| w[0].1 < level && w[1].1 >= level).map(|w| {
        let (mut a, mut b) = (0.0_f64, 1.0_f64);
        let at = |s: f64| w[0].1 + s * (w[1].1 - w[0].1);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if at(m) >= level {
                b = m;
            } else {
                a = m;
            }
        }
        w[0].0 + b * (w[1].0 - w[0].0)
    })
}
