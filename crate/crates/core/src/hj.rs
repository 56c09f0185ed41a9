//! Monotone level-set solvers for `u_t + α|Du| = 0` and its curvature-flow
//! variant `u_t - tr[(I - p̂⊗p̂) D²u] + α|Du| = 0`.
//!
//! The positive phase is eroded at speed `α`, so a front moves toward the
//! side where `u > 0`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{hausdorff, signed_distance, update_rows, zero_level_set, FrontTriple, Grid, Point, ScalarField};
use crate::model::{BistableModel, SpeedMode, Velocity};

/// Curvature term settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    /// Floor for `|Du|` in the curvature quotient.
    pub eta: f64,
}

impl Curvature {
    /// Floor `1e-6 / h`.
    pub fn for_grid(grid: &Grid) -> Self {
        Curvature {
            eta: 1e-6 / grid.h(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjConfig {
    pub grid: Grid,
    pub mode: SpeedMode,
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot times besides 0 and `t_end`; steps are shortened to land on them.
    pub times: Vec<f64>,
    pub curvature: Option<Curvature>,
    /// Replace `u` by its signed distance every this many steps.
    pub reinit_every: Option<usize>,
}

impl HjConfig {
    pub fn new(grid: Grid, mode: SpeedMode, dt: f64, t_end: f64) -> Self {
        HjConfig {
            grid,
            mode,
            dt,
            t_end,
            times: Vec::new(),
            curvature: None,
            reinit_every: None,
        }
    }

    /// Config with `dt` at `safety` times the stability bound for `velocity`.
    pub fn stable(
        grid: Grid,
        velocity: &Velocity,
        mode: SpeedMode,
        t_end: f64,
        curvature: bool,
        safety: f64,
    ) -> Result<Self> {
        let mut cfg = Self::new(grid, mode, 0.0, t_end);
        if curvature {
            cfg.curvature = Some(Curvature::for_grid(&grid));
        }
        let speeds = velocity.speed_field(&grid, mode)?;
        cfg.dt = safety * cfg.cfl_bound(max_of(&speeds));
        Ok(cfg)
    }

    pub fn with_times(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.times = times.into_iter().collect();
        self
    }

    pub fn with_mode(mut self, mode: SpeedMode) -> Self {
        self.mode = mode;
        self
    }

    /// `h / (dim max α)`, tightened to `h² / (4 dim)` with curvature.
    pub fn cfl_bound(&self, max_speed: f64) -> f64 {
        let h = self.grid.h();
        let dim = self.grid.dim() as f64;
        let mut bound = if max_speed > 0.0 {
            h / (dim * max_speed)
        } else {
            f64::INFINITY
        };
        if self.curvature.is_some() {
            bound = bound.min(h * h / (4.0 * dim));
        }
        bound
    }

    fn check(&self, max_speed: f64) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config(format!("bad snapshot time {t}")));
        }
        if self.reinit_every == Some(0) {
            return Err(Error::Config("reinit_every must be at least 1".into()));
        }
        if let Some(c) = self.curvature {
            if !(c.eta > 0.0) {
                return Err(Error::Config(format!("curvature floor must be positive, got {}", c.eta)));
            }
        }
        let bound = self.cfl_bound(max_speed);
        if !(self.dt > 0.0) || self.dt > bound * (1.0 + 1e-12) {
            let rule = if self.curvature.is_some() {
                "dt <= min(h / (dim max alpha), h^2 / (4 dim))"
            } else {
                "dt <= h / (dim max alpha)"
            };
            return Err(Error::Cfl {
                solver: if self.curvature.is_some() { "mcf" } else { "hj" },
                dt: self.dt,
                bound,
                rule: rule.into(),
            });
        }
        Ok(())
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct HjSolution {
    pub mode: SpeedMode,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub steps: usize,
}

impl HjSolution {
    pub fn nearest_index(&self, t: f64) -> usize {
        self.snapshots
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 .0 - t).abs().total_cmp(&(b.1 .0 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Snapshot nearest to `t`.
    pub fn at(&self, t: f64) -> &ScalarField {
        &self.snapshots[self.nearest_index(t)].1
    }

    pub fn front(&self, t: f64) -> FrontTriple {
        zero_level_set(self.at(t), 0.0)
    }

    pub fn final_state(&self) -> &ScalarField {
        &self.snapshots[self.snapshots.len() - 1].1
    }
}

/// Per-node stencil: centre value and the reflected or wrapped neighbours.
struct Stencil {
    c: f64,
    w: f64,
    e: f64,
    s: f64,
    n: f64,
    sw: f64,
    se: f64,
    nw: f64,
    ne: f64,
}

#[inline]
fn gather(grid: &Grid, u: &[f64], i: usize, j: usize, diagonals: bool) -> Stencil {
    let nx = grid.nx();
    let (im, ip) = grid.axis_neighbors(0, i);
    let (jm, jp) = grid.axis_neighbors(1, j);
    let at = |a: usize, b: usize| u[b * nx + a];
    let mut st = Stencil {
        c: at(i, j),
        w: at(im, j),
        e: at(ip, j),
        s: at(i, jm),
        n: at(i, jp),
        sw: 0.0,
        se: 0.0,
        nw: 0.0,
        ne: 0.0,
    };
    if diagonals {
        st.sw = at(im, jm);
        st.se = at(ip, jm);
        st.nw = at(im, jp);
        st.ne = at(ip, jp);
    }
    st
}

/// Upwind gradient norm for an eroding speed: per axis, the larger of
/// `max(D⁻u, 0)` and `-min(D⁺u, 0)`.
#[inline]
fn upwind_norm(st: &Stencil, two_d: bool, inv_h: f64) -> f64 {
    let axis = |lo: f64, hi: f64| {
        let back = (st.c - lo) * inv_h;
        let fwd = (hi - st.c) * inv_h;
        back.max(0.0).max(-fwd.min(0.0))
    };
    let gx = axis(st.w, st.e);
    if !two_d {
        return gx;
    }
    let gy = axis(st.s, st.n);
    (gx * gx + gy * gy).sqrt()
}

/// `tr[(I - p̂⊗p̂) D²u]` with central differences and `|p|` floored at `eta`.
#[inline]
fn curvature_term(st: &Stencil, inv_h: f64, eta: f64) -> f64 {
    let inv_h2 = inv_h * inv_h;
    let ux = 0.5 * (st.e - st.w) * inv_h;
    let uy = 0.5 * (st.n - st.s) * inv_h;
    let uxx = (st.e - 2.0 * st.c + st.w) * inv_h2;
    let uyy = (st.n - 2.0 * st.c + st.s) * inv_h2;
    let uxy = 0.25 * (st.ne - st.se - st.nw + st.sw) * inv_h2;
    let p2 = (ux * ux + uy * uy).max(eta * eta);
    (uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux) / p2
}

/// Solves the level-set equation from `u0` with speeds taken from
/// `velocity` in `config.mode`.
pub fn hj_run(config: &HjConfig, u0: &ScalarField, velocity: &Velocity) -> Result<HjSolution> {
    let grid = config.grid;
    if !u0.grid().same_layout(&grid) {
        return Err(Error::DomainMismatch("initial data and config use different grids".into()));
    }
    let speeds = velocity.speed_field(&grid, config.mode)?;
    config.check(max_of(&speeds))?;
    let solver = if config.curvature.is_some() { "mcf" } else { "hj" };

    let mut targets: Vec<f64> = config
        .times
        .iter()
        .copied()
        .filter(|&t| t <= config.t_end)
        .collect();
    targets.push(config.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let inv_h = 1.0 / grid.h();
    let eta = config.curvature.map(|c| c.eta);
    let two_d = grid.dim() == 2;
    // the curvature operator vanishes in one dimension
    let curved = two_d && eta.is_some();
    let mut u = u0.values().to_vec();
    let mut next = vec![0.0; grid.len()];
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut snapshots = vec![(0.0, u0.clone())];
    let slack = 1e-9 * config.dt;
    for &target in &targets {
        while t < target - slack {
            let remaining = target - t;
            let dt = if remaining < config.dt + slack {
                remaining
            } else {
                config.dt
            };
            {
                let u = &u;
                let speeds = &speeds;
                update_rows(&grid, &mut next, |j, row| {
                    for (i, o) in row.iter_mut().enumerate() {
                        let k = grid.index(i, j);
                        let st = gather(&grid, u, i, j, curved);
                        let mut rate = -speeds[k] * upwind_norm(&st, two_d, inv_h);
                        if let (true, Some(eta)) = (curved, eta) {
                            rate += curvature_term(&st, inv_h, eta);
                        }
                        *o = st.c + dt * rate;
                    }
                });
            }
            std::mem::swap(&mut u, &mut next);
            steps += 1;
            t += dt;
            if t >= target - slack {
                t = target;
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup { solver, step: steps, time: t });
            }
            if let Some(n) = config.reinit_every {
                if steps.is_multiple_of(n) {
                    if let Ok(d) = signed_distance(&ScalarField::from_parts(grid, u.clone())) {
                        u = d.into_values();
                    }
                }
            }
        }
        if snapshots.last().map(|s| s.0) != Some(t) {
            snapshots.push((t, ScalarField::from_parts(grid, u.clone())));
        }
    }
    Ok(HjSolution {
        mode: config.mode,
        snapshots,
        steps,
    })
}

/// [`hj_run`] with the curvature term switched on (default floor if the
/// config has none).
pub fn mcf_run(config: &HjConfig, u0: &ScalarField, velocity: &Velocity) -> Result<HjSolution> {
    let mut cfg = config.clone();
    if cfg.curvature.is_none() {
        cfg.curvature = Some(Curvature::for_grid(&cfg.grid));
    }
    hj_run(&cfg, u0, velocity)
}

/// A pair of runs with a slower and a faster velocity and the Hausdorff gap
/// between their fronts.
#[derive(Debug, Clone)]
pub struct Bracket {
    /// Run with the smaller speed; its positive phase is the larger one.
    pub lower: HjSolution,
    pub upper: HjSolution,
    /// `None` where either front is empty.
    pub gap: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapSample {
    pub t: f64,
    pub gap: Option<f64>,
}

impl Bracket {
    pub fn max_gap(&self) -> Option<f64> {
        self.gap.iter().filter_map(|g| g.1).reduce(f64::max)
    }

    pub fn samples(&self) -> Vec<GapSample> {
        self.gap.iter().map(|&(t, gap)| GapSample { t, gap }).collect()
    }
}

fn run_pair(
    config: &HjConfig,
    u0: &ScalarField,
    velocity: &Velocity,
    modes: (SpeedMode, SpeedMode),
) -> Result<Bracket> {
    let lo_cfg = config.clone().with_mode(modes.0);
    let hi_cfg = config.clone().with_mode(modes.1);
    let (lower, upper) = rayon::join(
        || hj_run(&lo_cfg, u0, velocity),
        || hj_run(&hi_cfg, u0, velocity),
    );
    let (lower, upper) = (lower?, upper?);
    let gap = lower
        .snapshots
        .iter()
        .zip(&upper.snapshots)
        .map(|((t, a), (_, b))| {
            let fa = zero_level_set(a, 0.0).gamma;
            let fb = zero_level_set(b, 0.0).gamma;
            (*t, hausdorff(&fa, &fb).ok())
        })
        .collect();
    Ok(Bracket { lower, upper, gap })
}

/// Runs the two continuous one-sided modifications of the velocity and
/// reports the gap between their fronts over time. The mode in `config` is
/// ignored.
pub fn bracket_run(config: &HjConfig, u0: &ScalarField, model: &BistableModel) -> Result<Bracket> {
    run_pair(
        config,
        u0,
        &Velocity::Bistable(model.clone()),
        (SpeedMode::OneSidedLower, SpeedMode::OneSidedUpper),
    )
}

/// Same as [`bracket_run`] with the lower and upper envelopes of the
/// discontinuous velocity.
pub fn envelope_bracket_run(config: &HjConfig, u0: &ScalarField, velocity: &Velocity) -> Result<Bracket> {
    run_pair(
        config,
        u0,
        velocity,
        (SpeedMode::LowerEnvelope, SpeedMode::UpperEnvelope),
    )
}

/// Writes the gap series as CSV `t,gap`; missing gaps are written as `nan`.
pub fn write_gap_csv<W: Write>(mut w: W, gap: &[(f64, Option<f64>)]) -> Result<()> {
    writeln!(w, "t,gap")?;
    for (t, g) in gap {
        match g {
            Some(g) => writeln!(w, "{t:e},{g:e}")?,
            None => writeln!(w, "{t:e},nan")?,
        }
    }
    Ok(())
}

/// Mean and largest deviation of the front points from a circle.
pub fn radius_error(front: &[Point], center: Point, radius: f64) -> Option<(f64, f64)> {
    if front.is_empty() {
        return None;
    }
    let devs: Vec<f64> = front
        .iter()
        .map(|p| ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs())
        .collect();
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    Some((mean, max_of(&devs)))
}

/// Radius of a circle moving by curvature plus constant erosion speed `a`,
/// `R' = -1/R - a`, integrated with RK4 on `steps` steps. Returns 0 once the
/// circle has vanished.
pub fn circle_radius_ode(r0: f64, a: f64, t: f64, steps: usize) -> f64 {
    let f = |r: f64| if r > 0.0 { -1.0 / r - a } else { 0.0 };
    let dt = t / steps.max(1) as f64;
    let mut r = r0;
    for _ in 0..steps.max(1) {
        let k1 = f(r);
        let k2 = f(r + 0.5 * dt * k1);
        let k3 = f(r + 0.5 * dt * k2);
        let k4 = f(r + dt * k3);
        r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(r > 0.0) {
            return 0.0;
        }
    }
    r
}
