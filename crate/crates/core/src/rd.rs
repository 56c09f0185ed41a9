//! Explicit finite-difference solver for the bistable reaction-diffusion
//! problem in both scalings, with fronts tracked at the unstable root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{distance_to_front, update_rows, zero_level_set, FrontTriple, Grid, ScalarField};
use crate::model::{cubic, BistableModel, Scaling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdConfig {
    pub model: BistableModel,
    #[serde(skip)]
    pub grid: Option<Grid>,
    pub dt: f64,
    pub t_end: f64,
    /// Steps between snapshots; the initial and final states are always kept.
    pub record_every: usize,
    /// Extra snapshot times. The step before each one is shortened so the
    /// snapshot lands on it exactly.
    #[serde(default)]
    pub record_times: Vec<f64>,
}

impl RdConfig {
    pub fn new(model: BistableModel, grid: Grid, dt: f64, t_end: f64, record_every: usize) -> Self {
        RdConfig {
            model,
            grid: Some(grid),
            dt,
            t_end,
            record_every,
            record_times: Vec::new(),
        }
    }

    /// Config with `dt` at `safety` times the stability bound.
    pub fn stable(model: BistableModel, grid: Grid, t_end: f64, safety: f64) -> Self {
        let dt = safety * cfl_bound(&model, &grid);
        Self::new(model, grid, dt, t_end, 1)
    }

    pub fn with_record_times(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.record_times = times.into_iter().collect();
        self
    }

    pub fn with_record_every(mut self, steps: usize) -> Self {
        self.record_every = steps;
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid
            .ok_or_else(|| Error::Config("reaction-diffusion config has no grid".into()))
    }

    /// Largest stable step for this model and grid.
    pub fn cfl_bound(&self) -> Result<f64> {
        Ok(cfl_bound(&self.model, &self.grid()?))
    }

    pub fn check(&self) -> Result<()> {
        self.model.check()?;
        let grid = self.grid()?;
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if let Some(t) = self.record_times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config(format!("bad record time {t}")));
        }
        let bound = cfl_bound(&self.model, &grid);
        if !(self.dt > 0.0) || self.dt > bound * (1.0 + 1e-12) {
            let rule = match self.model.scaling {
                Scaling::One => "dt <= 1 / (2 dim eps / h^2 + L_f / eps)",
                Scaling::Two => "dt <= 1 / (2 dim / h^2 + L_f / eps^2)",
            };
            return Err(Error::Cfl {
                solver: "rd",
                dt: self.dt,
                bound,
                rule: rule.into(),
            });
        }
        Ok(())
    }

    /// Non-fatal resolution problems, currently only the transition band of
    /// `c^ε` being under-resolved (`h > ε^k / 4`).
    pub fn resolution_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(grid) = self.grid {
            let band = self.model.epsilon.powf(self.model.velocity.k);
            if grid.h() > 0.25 * band {
                out.push(format!(
                    "h = {:e} exceeds eps^k / 4 = {:e}; the velocity transition band is under-resolved",
                    grid.h(),
                    0.25 * band
                ));
            }
        }
        out
    }
}

/// Diffusion and reaction coefficients of the scaling.
fn coefficients(model: &BistableModel) -> (f64, f64) {
    let e = model.epsilon;
    match model.scaling {
        Scaling::One => (e, 1.0 / e),
        Scaling::Two => (1.0, 1.0 / (e * e)),
    }
}

/// Monotonicity bound `dt (2 dim D / h² + L_f R) <= 1`.
pub fn cfl_bound(model: &BistableModel, grid: &Grid) -> f64 {
    let (d, r) = coefficients(model);
    let worst = (0..grid.len())
        .map(|k| grid.coord(k))
        .max_by(|a, b| model.c_eps(*a).abs().total_cmp(&model.c_eps(*b).abs()))
        .unwrap_or([0.0, 0.0]);
    let lip = model.reaction_lipschitz([worst]);
    let h = grid.h();
    1.0 / (2.0 * grid.dim() as f64 * d / (h * h) + lip * r)
}

/// Time stepper for one run. Most callers want [`rd_run`].
#[derive(Debug, Clone)]
pub struct RdSolver {
    model: BistableModel,
    grid: Grid,
    c: Vec<f64>,
    u: Vec<f64>,
    next: Vec<f64>,
    t: f64,
    steps: usize,
}

impl RdSolver {
    pub fn new(config: &RdConfig, g: &ScalarField) -> Result<Self> {
        config.check()?;
        let grid = config.grid()?;
        if !g.grid().same_layout(&grid) {
            return Err(Error::DomainMismatch(
                "initial data and config use different grids".into(),
            ));
        }
        if let Some(v) = g.values().iter().find(|v| v.abs() > 1.0) {
            return Err(Error::Precondition(format!("initial data must lie in [-1, 1], found {v}")));
        }
        let c = (0..grid.len()).map(|k| config.model.c_eps(grid.coord(k))).collect();
        Ok(RdSolver {
            model: config.model.clone(),
            grid,
            c,
            u: g.values().to_vec(),
            next: vec![0.0; grid.len()],
            t: 0.0,
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn state(&self) -> ScalarField {
        ScalarField::from_parts(self.grid, self.u.clone())
    }

    /// Advances by `dt`, which must respect the stability bound.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let grid = self.grid;
        let (diff, react) = coefficients(&self.model);
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let two_d = grid.dim() == 2;
        let (u, c) = (&self.u, &self.c);
        let row = |j: usize, out: &mut [f64]| {
            let (jm, jp) = grid.axis_neighbors(1, j);
            for (i, o) in out.iter_mut().enumerate() {
                let (im, ip) = grid.axis_neighbors(0, i);
                let k = grid.index(i, j);
                let uk = u[k];
                let mut lap = u[grid.index(im, j)] + u[grid.index(ip, j)] - 2.0 * uk;
                if two_d {
                    lap += u[grid.index(i, jm)] + u[grid.index(i, jp)] - 2.0 * uk;
                }
                *o = uk + dt * (diff * inv_h2 * lap - react * cubic(uk, c[k]));
            }
        };
        update_rows(&grid, &mut self.next, row);
        std::mem::swap(&mut self.u, &mut self.next);
        self.steps += 1;
        self.t += dt;
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                solver: "rd",
                step: self.steps,
                time: self.t,
            });
        }
        Ok(())
    }

    /// The unstable root `m_o^ε` at every node.
    pub fn iso_levels(&self) -> Vec<f64> {
        self.c.iter().map(|c| 0.5 * c).collect()
    }

    /// Front of the current state at the unstable root.
    pub fn front(&self) -> FrontTriple {
        let shifted = self.u.iter().zip(&self.c).map(|(u, c)| u - 0.5 * c).collect();
        zero_level_set(&ScalarField::from_parts(self.grid, shifted), 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct RdTrajectory {
    pub model: BistableModel,
    pub snapshots: Vec<(f64, ScalarField)>,
    /// Front of each snapshot, tracked at `u = m_o^ε(x)`.
    pub front_history: Vec<(f64, FrontTriple)>,
    pub steps: usize,
}

impl RdTrajectory {
    /// Index of the snapshot closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        self.snapshots
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 .0 - t).abs().total_cmp(&(b.1 .0 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn snapshot(&self, t: f64) -> &(f64, ScalarField) {
        &self.snapshots[self.nearest_index(t)]
    }

    pub fn final_state(&self) -> &ScalarField {
        &self.snapshots[self.snapshots.len() - 1].1
    }
}

/// Runs the explicit scheme from `g` to `config.t_end`.
pub fn rd_run(config: &RdConfig, g: &ScalarField) -> Result<RdTrajectory> {
    let mut solver = RdSolver::new(config, g)?;
    let mut targets: Vec<f64> = config
        .record_times
        .iter()
        .copied()
        .filter(|&t| t <= config.t_end)
        .collect();
    targets.push(config.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut snapshots = vec![(0.0, solver.state())];
    let mut fronts = vec![(0.0, solver.front())];
    let mut since = 0;
    for &target in &targets {
        // steps whose size would round to zero are absorbed into the previous one
        let slack = 1e-9 * config.dt;
        while solver.time() < target - slack {
            let remaining = target - solver.time();
            let dt = if remaining < config.dt + slack {
                remaining
            } else {
                config.dt
            };
            solver.step(dt)?;
            since += 1;
            let landed = solver.time() >= target - slack;
            if landed {
                solver.t = target;
            }
            if since == config.record_every || landed {
                since = 0;
                if snapshots.last().map(|s| s.0) != Some(solver.time()) {
                    snapshots.push((solver.time(), solver.state()));
                    fronts.push((solver.time(), solver.front()));
                }
            }
        }
    }
    Ok(RdTrajectory {
        model: config.model.clone(),
        snapshots,
        front_history: fronts,
        steps: solver.steps(),
    })
}

/// Front at the snapshot nearest to `t`.
pub fn front_position(traj: &RdTrajectory, t: f64) -> FrontTriple {
    traj.front_history[traj.nearest_index(t)].1.clone()
}

/// Share of cells well inside each phase that have reached the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumFractions {
    /// `None` when no cell of `D⁺` lies farther than the margin from the front.
    pub plus: Option<f64>,
    pub minus: Option<f64>,
}

/// Fractions of the cells of `D⁺` (resp. `D⁻`) at distance more than
/// `margin` from the front whose value is within `tol` of `+1` (resp. `-1`).
pub fn equilibrium_fraction(
    traj: &RdTrajectory,
    t: f64,
    front: &FrontTriple,
    margin: f64,
    tol: f64,
) -> Result<EquilibriumFractions> {
    let u = &traj.snapshot(t).1;
    let grid = *u.grid();
    if front.d_plus.len() != grid.len() {
        return Err(Error::DomainMismatch("front and trajectory use different grids".into()));
    }
    if margin < 2.0 * grid.h() * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "margin {margin:e} is below two cells ({:e})",
            2.0 * grid.h()
        )));
    }
    let dist = distance_to_front(&grid, front);
    let frac = |mask: &[bool], target: f64| -> Option<f64> {
        let mut total = 0usize;
        let mut hit = 0usize;
        for k in 0..grid.len() {
            if mask[k] && dist[k] > margin {
                total += 1;
                if (u.values()[k] - target).abs() < tol {
                    hit += 1;
                }
            }
        }
        (total > 0).then(|| hit as f64 / total as f64)
    };
    Ok(EquilibriumFractions {
        plus: frac(&front.d_plus, 1.0),
        minus: frac(&front.d_minus, -1.0),
    })
}

/// Least-squares speed of a 1D front over the snapshots with time in
/// `[t0, t1]`. Uses the mean of the front points of each snapshot.
pub fn fit_front_speed(traj: &RdTrajectory, t0: f64, t1: f64) -> Result<f64> {
    let samples: Vec<(f64, f64)> = traj
        .front_history
        .iter()
        .filter(|(t, f)| *t >= t0 && *t <= t1 && !f.gamma.is_empty())
        .map(|(t, f)| (*t, f.gamma.iter().map(|p| p[0]).sum::<f64>() / f.gamma.len() as f64))
        .collect();
    linear_slope(&samples)
        .ok_or_else(|| Error::Precondition(format!("fewer than two fronts in [{t0}, {t1}]")))
}

/// Slope of the least-squares line through `(x, y)` pairs.
pub fn linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Boundary;
    use crate::model::{Interface, VelocityModel};

    fn constant_model(c: f64, eps: f64, scaling: Scaling) -> BistableModel {
        // interface far outside every test box, so c^ε is n1 up to rounding
        let v = VelocityModel::piecewise_constant(
            c,
            c + 0.5,
            0.05,
            Interface::Hyperplane {
                normal: [1.0, 0.0],
                offset: 1000.0,
            },
            0.25,
        )
        .unwrap();
        BistableModel::new(v, eps, scaling).unwrap()
    }

    fn line(h: f64, lo: f64, hi: f64) -> Grid {
        Grid::new_1d(lo, h, ((hi - lo) / h).round() as usize + 1).unwrap()
    }

    #[test]
    fn cfl_violation_is_reported() {
        let m = constant_model(0.8, 0.02, Scaling::One);
        let g = line(0.004, -1.0, 1.0);
        let bound = cfl_bound(&m, &g);
        let cfg = RdConfig::new(m, g, 1.01 * bound, 0.1, 1);
        match cfg.check() {
            Err(Error::Cfl { bound: b, .. }) => assert_eq!(b, bound),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equilibrium_one_is_preserved() {
        let m = constant_model(0.8, 0.05, Scaling::One);
        let g = line(0.01, -0.5, 0.5);
        let cfg = RdConfig::stable(m, g, 0.05, 0.9);
        let traj = rd_run(&cfg, &ScalarField::constant(g, 1.0).unwrap()).unwrap();
        assert!(traj.final_state().values().iter().all(|&v| v == 1.0));
        assert!(front_position(&traj, 0.05).is_empty());
    }

    #[test]
    fn unstable_root_is_a_fixed_point() {
        let m = constant_model(0.8, 0.05, Scaling::One);
        let g = line(0.01, -0.5, 0.5);
        let cfg = RdConfig::stable(m, g, 0.01, 0.9);
        let traj = rd_run(&cfg, &ScalarField::constant(g, 0.4).unwrap()).unwrap();
        assert!(traj.final_state().values().iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn record_times_are_hit_exactly() {
        let m = constant_model(0.8, 0.05, Scaling::One);
        let g = line(0.01, -0.5, 0.5);
        let cfg = RdConfig::stable(m, g, 0.1, 0.9)
            .with_record_every(1_000_000)
            .with_record_times([0.0314, 0.05]);
        let traj = rd_run(&cfg, &ScalarField::constant(g, 0.5).unwrap()).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.0314, 0.05, 0.1]);
    }

    #[test]
    fn traveling_wave_front_starts_at_origin() {
        let eps = 0.02;
        let m = constant_model(0.8, eps, Scaling::One);
        let g = line(eps / 5.0, -0.5, 0.5);
        let g0 = ScalarField::from_fn(g, |x| m.traveling_wave(x[0] / eps, x)).unwrap();
        let cfg = RdConfig::stable(m, g, 0.0, 0.9);
        let traj = rd_run(&cfg, &g0).unwrap();
        let f = front_position(&traj, 0.0);
        assert_eq!(f.gamma.len(), 1);
        assert!(f.gamma[0][0].abs() < g.h());
    }

    #[test]
    fn scaling_one_front_speed() {
        let eps = 0.02;
        let m = constant_model(0.8, eps, Scaling::One);
        let g = line(eps / 5.0, -1.0, 1.5);
        let g0 = ScalarField::from_fn(g, |x| m.traveling_wave(x[0] / eps, x)).unwrap();
        let cfg = RdConfig::stable(m, g, 0.5, 0.9).with_record_every(50);
        let traj = rd_run(&cfg, &g0).unwrap();
        let v = fit_front_speed(&traj, 0.1, 0.5).unwrap();
        assert!((v - 0.8).abs() < 0.04, "speed {v}");
    }

    #[test]
    fn scaling_two_front_speed() {
        let eps = 0.05;
        let alpha = 1.0;
        let m = constant_model(alpha, eps, Scaling::Two);
        let g = line(eps / 5.0, -0.5, 1.0);
        let g0 = ScalarField::from_fn(g, |x| m.traveling_wave(x[0] / eps, x)).unwrap();
        let cfg = RdConfig::stable(m, g, 0.4, 0.9).with_record_every(20);
        let traj = rd_run(&cfg, &g0).unwrap();
        let v = fit_front_speed(&traj, 0.05, 0.4).unwrap();
        assert!((v - alpha).abs() < 0.1 * alpha, "speed {v}");
    }

    #[test]
    fn maximum_principle_and_comparison() {
        let m = constant_model(0.6, 0.05, Scaling::One);
        let g = Grid::new_2d([-0.5, -0.5], 0.025, [41, 41]).unwrap();
        // deterministic rough data in [-1, 1]
        let rough = |k: usize, s: f64| ((k as f64 * 12.9898 + s).sin() * 43758.5453).fract();
        let lo = ScalarField::new(g, (0..g.len()).map(|k| rough(k, 0.0).clamp(-1.0, 1.0)).collect())
            .unwrap();
        let hi = ScalarField::new(
            g,
            lo.values()
                .iter()
                .enumerate()
                .map(|(k, v)| (v + 0.3 * rough(k, 1.0).abs()).min(1.0))
                .collect(),
        )
        .unwrap();
        let cfg = RdConfig::stable(m, g, 0.02, 1.0);
        let a = rd_run(&cfg, &lo).unwrap();
        let b = rd_run(&cfg, &hi).unwrap();
        for ((_, ua), (_, ub)) in a.snapshots.iter().zip(&b.snapshots) {
            for (x, y) in ua.values().iter().zip(ub.values()) {
                assert!((-1.0..=1.0).contains(x) && (-1.0..=1.0).contains(y));
                assert!(x <= y);
            }
        }
    }

    #[test]
    fn periodic_shift_is_bit_exact() {
        let m = constant_model(0.5, 0.05, Scaling::One);
        let g = Grid::new_2d([0.0, 0.0], 0.02, [40, 30])
            .unwrap()
            .with_boundary(Boundary::Periodic);
        let bump = |p: [f64; 2]| ((p[0] * 7.0).sin() * (p[1] * 3.0).cos()).tanh();
        let g0 = ScalarField::from_fn(g, bump).unwrap();
        let shifted = ScalarField::new(
            g,
            (0..g.len())
                .map(|k| {
                    let (i, j) = g.ij(k);
                    g0.values()[g.index((i + g.nx() - 1) % g.nx(), j)]
                })
                .collect(),
        )
        .unwrap();
        let cfg = RdConfig::stable(m, g, 0.01, 0.9);
        let a = rd_run(&cfg, &g0).unwrap();
        let b = rd_run(&cfg, &shifted).unwrap();
        let (ua, ub) = (a.final_state(), b.final_state());
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            assert_eq!(ub.values()[k], ua.values()[g.index((i + g.nx() - 1) % g.nx(), j)]);
        }
    }

    #[test]
    fn radial_front_near_unit_circle() {
        let eps = 0.05;
        let m = constant_model(1.0, eps, Scaling::One);
        let g = Grid::new_2d([-1.5, -1.5], 0.02, [151, 151]).unwrap();
        let g0 = ScalarField::from_fn(g, |x| ((1.0 - x[0].hypot(x[1])) / eps).tanh()).unwrap();
        let traj = rd_run(&RdConfig::stable(m.clone(), g, 0.0, 0.9), &g0).unwrap();
        let f = front_position(&traj, 0.0);
        // tanh(d / eps) = c/2 at d = eps atanh(c/2)
        let r = 1.0 - eps * (0.5_f64).atanh();
        for p in &f.gamma {
            assert!((p[0].hypot(p[1]) - r).abs() < 2.0 * g.h());
        }
        assert!(!f.gamma.is_empty());
    }

    #[test]
    fn equilibrium_fractions() {
        let eps = 0.02;
        let m = constant_model(0.8, eps, Scaling::One);
        let g = line(eps / 5.0, -0.5, 0.5);
        let cfg = RdConfig::stable(m.clone(), g, 0.0, 0.9);

        let wave = ScalarField::from_fn(g, |x| m.traveling_wave(x[0] / eps, x)).unwrap();
        let traj = rd_run(&cfg, &wave).unwrap();
        let front = front_position(&traj, 0.0);
        let fr = equilibrium_fraction(&traj, 0.0, &front, 5.0 * eps, 0.1).unwrap();
        assert!(fr.plus.unwrap() >= 0.99 && fr.minus.unwrap() >= 0.99);

        let ones = rd_run(&cfg, &ScalarField::constant(g, 1.0).unwrap()).unwrap();
        let f1 = front_position(&ones, 0.0);
        let fr = equilibrium_fraction(&ones, 0.0, &f1, 5.0 * eps, 0.1).unwrap();
        assert_eq!(fr.plus, Some(1.0));
        assert_eq!(fr.minus, None);

        let zeros = rd_run(&cfg, &ScalarField::constant(g, 0.0).unwrap()).unwrap();
        let fr = equilibrium_fraction(&zeros, 0.0, &front, 5.0 * eps, 0.1).unwrap();
        assert_eq!((fr.plus, fr.minus), (Some(0.0), Some(0.0)));

        assert!(equilibrium_fraction(&traj, 0.0, &front, g.h(), 0.1).is_err());
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let m = constant_model(0.8, 0.01, Scaling::One);
        let cfg = RdConfig::stable(m.clone(), line(0.1, -1.0, 1.0), 0.1, 0.9);
        assert_eq!(cfg.resolution_warnings().len(), 1);
        let cfg = RdConfig::stable(m, line(0.01, -1.0, 1.0), 0.1, 0.9);
        assert!(cfg.resolution_warnings().is_empty());
    }
}
