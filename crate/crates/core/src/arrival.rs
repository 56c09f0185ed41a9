//! Minimal travel times with speed `α_*` on the grid graph, the
//! representation formula built on them, and the no-interior check.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    distance_to_front, front_length, interior_band_measure, zero_level_set, Crossing, Grid, Point,
    ScalarField,
};
use crate::model::{SpeedMode, Velocity};

/// Neighbourhood of the 2D grid graph. 1D grids always use the two
/// adjacent nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// Axis and diagonal neighbours; path lengths overestimate Euclidean
    /// distance by at most `sqrt(4 - 2 sqrt 2) - 1`, about 8.2%.
    #[default]
    Eight,
    /// Adds the knight moves; overestimate at most about 2.7%.
    Sixteen,
}

impl Stencil {
    fn offsets(self, dim: usize) -> &'static [(isize, isize)] {
        const LINE: [(isize, isize); 2] = [(-1, 0), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        const SIXTEEN: [(isize, isize); 16] = [
            (-1, -2),
            (1, -2),
            (-2, -1),
            (-1, -1),
            (0, -1),
            (1, -1),
            (2, -1),
            (-1, 0),
            (1, 0),
            (-2, 1),
            (-1, 1),
            (0, 1),
            (1, 1),
            (2, 1),
            (-1, 2),
            (1, 2),
        ];
        match (dim, self) {
            (1, _) => &LINE,
            (_, Stencil::Eight) => &EIGHT,
            (_, Stencil::Sixteen) => &SIXTEEN,
        }
    }

    /// Largest ratio of path length to Euclidean distance over all
    /// directions, found by scanning angles.
    pub fn distortion(self) -> f64 {
        let moves: Vec<Point> = self
            .offsets(2)
            .iter()
            .map(|&(a, b)| [a as f64, b as f64])
            .collect();
        let mut worst = 1.0_f64;
        // the metric is piecewise linear in the direction; a fine scan of one
        // octant finds the worst direction to many digits
        for s in 0..=20_000 {
            let th = s as f64 / 20_000.0 * std::f64::consts::FRAC_PI_4;
            let d = [th.cos(), th.sin()];
            worst = worst.max(cone_cost(&moves, d));
        }
        worst
    }
}

/// Cost of reaching unit vector `d` with nonnegative combinations of the two
/// moves bounding its direction (each move costs its length).
fn cone_cost(moves: &[Point], d: Point) -> f64 {
    let mut best = f64::INFINITY;
    for a in moves {
        for b in moves {
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (d[0] * b[1] - d[1] * b[0]) / det;
            let y = (a[0] * d[1] - a[1] * d[0]) / det;
            if x >= -1e-12 && y >= -1e-12 {
                let la = a[0].hypot(a[1]);
                let lb = b[0].hypot(b[1]);
                best = best.min(x * la + y * lb);
            }
        }
    }
    best
}

/// Where travel starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Seed {
    Cells(Vec<usize>),
    /// A point, attached to its nearest node with the travel time of the
    /// straight offset.
    Point(Point),
    /// Nodes with individual start times.
    Timed(Vec<(usize, f64)>),
}

/// Minimal travel times from a seed.
#[derive(Debug, Clone)]
pub struct ArrivalField {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub seed: Seed,
}

impl ArrivalField {
    pub fn to_field(&self) -> Result<ScalarField> {
        ScalarField::new(self.grid, self.times.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    t: f64,
    k: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap pops the smallest time, then the smallest index
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then(other.k.cmp(&self.k))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-node slowness `1/α_*`, rejecting non-positive speeds.
pub fn slowness(grid: &Grid, velocity: &Velocity) -> Result<Vec<f64>> {
    let speeds = velocity.speed_field(grid, SpeedMode::LowerEnvelope)?;
    speeds
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            if a > 0.0 {
                Ok(1.0 / a)
            } else {
                Err(Error::InvalidModel(format!(
                    "arrival times need a positive speed, got {a} at {:?}",
                    grid.coord(k)
                )))
            }
        })
        .collect()
}

/// Dijkstra on the grid graph with edge time `length * (s_a + s_b) / 2`.
pub fn arrival_from_slowness(
    seed: &Seed,
    grid: &Grid,
    slow: &[f64],
    stencil: Stencil,
) -> Result<ArrivalField> {
    if slow.len() != grid.len() {
        return Err(Error::DomainMismatch("slowness and grid differ in size".into()));
    }
    let starts: Vec<(usize, f64)> = match seed {
        Seed::Cells(cells) => cells.iter().map(|&k| (k, 0.0)).collect(),
        Seed::Point(p) => {
            let k = grid.nearest(*p);
            vec![(k, crate::field::dist(*p, grid.coord(k)) * slow[k])]
        }
        Seed::Timed(v) => v.clone(),
    };
    if starts.is_empty() {
        return Err(Error::EmptySeed);
    }
    if let Some(&(k, t)) = starts.iter().find(|(k, t)| *k >= grid.len() || !(*t >= 0.0)) {
        return Err(Error::Config(format!("bad seed node {k} with start time {t}")));
    }

    let mut times = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    for &(k, t) in &starts {
        if t < times[k] {
            times[k] = t;
            heap.push(Entry { t, k });
        }
    }
    let offsets = stencil.offsets(grid.dim());
    let lengths: Vec<f64> = offsets
        .iter()
        .map(|&(a, b)| grid.h() * (a as f64).hypot(b as f64))
        .collect();
    let [nx, ny] = grid.extents();
    let mut done = vec![false; grid.len()];
    while let Some(Entry { t, k }) = heap.pop() {
        if done[k] {
            continue;
        }
        done[k] = true;
        let (i, j) = grid.ij(k);
        for (&(di, dj), &len) in offsets.iter().zip(&lengths) {
            let (qi, qj) = (i as isize + di, j as isize + dj);
            if qi < 0 || qj < 0 || qi >= nx as isize || qj >= ny as isize {
                continue;
            }
            let q = grid.index(qi as usize, qj as usize);
            if done[q] {
                continue;
            }
            let cand = t + len * 0.5 * (slow[k] + slow[q]);
            if cand < times[q] {
                times[q] = cand;
                heap.push(Entry { t: cand, k: q });
            }
        }
    }
    Ok(ArrivalField {
        grid: *grid,
        times,
        seed: seed.clone(),
    })
}

/// Minimal travel time from `seed` with speed `α_*` of `velocity`.
pub fn arrival_time(seed: &Seed, velocity: &Velocity, grid: &Grid, stencil: Stencil) -> Result<ArrivalField> {
    let slow = slowness(grid, velocity)?;
    arrival_from_slowness(seed, grid, &slow, stencil)
}

/// `min u0` over the nodes reachable from `x` within time `t`.
pub fn represent_u(
    x: Point,
    t: f64,
    u0: &ScalarField,
    velocity: &Velocity,
    stencil: Stencil,
) -> Result<f64> {
    let grid = u0.grid();
    let reach = arrival_time(&Seed::Point(x), velocity, grid, stencil)?;
    Ok(reach
        .times
        .iter()
        .zip(u0.values())
        .filter(|(tt, _)| **tt <= t)
        .map(|(_, &v)| v)
        .fold(u0.values()[grid.nearest(x)], f64::min))
}

/// Arrival fields seeded from both phases of `u0`, from which the sign of
/// the solution at any time is read off.
#[derive(Debug, Clone)]
pub struct Representation {
    u0: ScalarField,
    /// Time for the nonpositive phase to reach each node.
    pub t_minus: Option<Vec<f64>>,
    /// Time for the nonnegative phase to reach each node.
    pub t_plus: Option<Vec<f64>>,
}

impl Representation {
    pub fn new(u0: &ScalarField, velocity: &Velocity, stencil: Stencil) -> Result<Self> {
        let grid = *u0.grid();
        let slow = slowness(&grid, velocity)?;
        let v = u0.values();
        let triple = zero_level_set(u0, 0.0);
        let near = distance_to_front(&grid, &triple);

        // nodes next to a crossing start at their sub-cell distance
        let mut boundary_nodes = Vec::new();
        for s in &triple.sources {
            if let Crossing::Edge(a, b) = *s {
                boundary_nodes.push(a);
                boundary_nodes.push(b);
            }
        }
        let seeds = |inside: &dyn Fn(f64) -> bool| -> Vec<(usize, f64)> {
            let mut out: Vec<(usize, f64)> = (0..grid.len())
                .filter(|&k| inside(v[k]))
                .map(|k| (k, 0.0))
                .collect();
            for &k in &boundary_nodes {
                if !inside(v[k]) {
                    out.push((k, near[k] * slow[k]));
                }
            }
            out
        };
        let run = |s: Vec<(usize, f64)>| -> Result<Option<Vec<f64>>> {
            if s.is_empty() {
                return Ok(None);
            }
            Ok(Some(arrival_from_slowness(&Seed::Timed(s), &grid, &slow, stencil)?.times))
        };
        Ok(Representation {
            u0: u0.clone(),
            t_minus: run(seeds(&|x| x <= 0.0))?,
            t_plus: run(seeds(&|x| x >= 0.0))?,
        })
    }

    /// A field with the sign of the solution at time `t`: `T⁻ - t` on the
    /// positive phase of `u0`, `-T⁺ - t` on the negative one and `-t` on its
    /// zero set. One-signed data is returned unchanged.
    pub fn at(&self, t: f64) -> ScalarField {
        let (tm, tp) = match (&self.t_minus, &self.t_plus) {
            (Some(a), Some(b)) => (a, b),
            _ => return self.u0.clone(),
        };
        let values = self
            .u0
            .values()
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                if u > 0.0 {
                    tm[k] - t
                } else if u < 0.0 {
                    -tp[k] - t
                } else {
                    -t
                }
            })
            .collect();
        ScalarField::from_parts(*self.u0.grid(), values)
    }
}

/// [`Representation::at`] for a single time.
pub fn represent_field(t: f64, u0: &ScalarField, velocity: &Velocity, stencil: Stencil) -> Result<ScalarField> {
    Ok(Representation::new(u0, velocity, stencil)?.at(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandSample {
    pub t: f64,
    pub band_measure: f64,
    pub front_length: f64,
    /// `band_measure / (h * front_length)`; infinite for a band without a
    /// front, zero when both vanish.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "no fattening detected")]
    NoFattening,
    #[serde(rename = "fattening")]
    Fattening,
}

/// Band ratio above which a zero set counts as fat.
pub const FATTENING_RATIO: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoInteriorReport {
    pub h: f64,
    pub tol: f64,
    pub samples: Vec<BandSample>,
    pub max_ratio: f64,
    pub verdict: Verdict,
}

/// Measures the band `{|u| <= tol}` against the front length at each
/// snapshot. `tol` defaults to `h/2`.
pub fn no_interior_check(snapshots: &[(f64, ScalarField)], tol: Option<f64>) -> NoInteriorReport {
    let h = snapshots.first().map(|s| s.1.grid().h()).unwrap_or(0.0);
    let tol = tol.unwrap_or(0.5 * h);
    let samples: Vec<BandSample> = snapshots
        .iter()
        .map(|(t, u)| {
            let band = interior_band_measure(u, tol);
            let len = front_length(u, 0.0);
            let h = u.grid().h();
            let ratio = if len > 0.0 {
                band / (h * len)
            } else if band > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            BandSample {
                t: *t,
                band_measure: band,
                front_length: len,
                ratio,
            }
        })
        .collect();
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    NoInteriorReport {
        h,
        tol,
        samples,
        max_ratio,
        verdict: verdict_for(max_ratio),
    }
}

fn verdict_for(ratio: f64) -> Verdict {
    if ratio <= FATTENING_RATIO {
        Verdict::NoFattening
    } else {
        Verdict::Fattening
    }
}

/// Verdict across runs at several resolutions: fat if any run is.
pub fn combined_verdict(reports: &[NoInteriorReport]) -> Verdict {
    verdict_for(reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::hausdorff;
    use crate::model::{Interface, VelocityModel};

    fn line(lo: f64, h: f64, n: usize) -> Grid {
        Grid::new_1d(lo, h, n).unwrap()
    }

    fn two_speed() -> Velocity {
        Velocity::Model(
            VelocityModel::piecewise_constant(
                1.0,
                2.0,
                0.25,
                Interface::Hyperplane {
                    normal: [1.0, 0.0],
                    offset: 0.0,
                },
                0.5,
            )
            .unwrap(),
        )
    }

    #[test]
    fn distortion_bounds() {
        let eight = Stencil::Eight.distortion();
        assert!((eight - (4.0 - 2.0 * 2f64.sqrt()).sqrt()).abs() < 1e-6, "{eight}");
        let sixteen = Stencil::Sixteen.distortion();
        assert!(sixteen > 1.02 && sixteen < 1.028, "{sixteen}");
    }

    #[test]
    fn uniform_line() {
        let g = line(-1.0, 0.125, 17);
        let a = arrival_time(&Seed::Point([0.0, 0.0]), &Velocity::Constant(2.0), &g, Stencil::Eight).unwrap();
        for k in 0..g.len() {
            assert_eq!(a.times[k], g.coord(k)[0].abs() / 2.0);
        }
    }

    #[test]
    fn two_speed_line() {
        let h = 0.01;
        let g = line(-1.5, h, 351);
        let a = arrival_time(&Seed::Point([1.0, 0.0]), &two_speed(), &g, Stencil::Eight).unwrap();
        let t = a.times[g.nearest([-1.0, 0.0])];
        assert!((t - 1.5).abs() <= 2.0 * h * 1.0, "{t}");
    }

    #[test]
    fn empty_seed_and_zero_speed() {
        let g = line(0.0, 0.1, 5);
        assert!(matches!(
            arrival_time(&Seed::Cells(vec![]), &Velocity::Constant(1.0), &g, Stencil::Eight),
            Err(Error::EmptySeed)
        ));
        assert!(arrival_time(&Seed::Cells(vec![0]), &Velocity::Constant(0.0), &g, Stencil::Eight).is_err());
    }

    #[test]
    fn chamfer_overestimate_on_a_plane() {
        let g = Grid::new_2d([-1.0, -1.0], 0.02, [101, 101]).unwrap();
        for (st, bound) in [(Stencil::Eight, 1.083), (Stencil::Sixteen, 1.028)] {
            let a = arrival_time(&Seed::Point([0.0, 0.0]), &Velocity::Constant(1.0), &g, st).unwrap();
            for k in 0..g.len() {
                let p = g.coord(k);
                let r = p[0].hypot(p[1]);
                assert!(a.times[k] >= r * (1.0 - 1e-12));
                assert!(a.times[k] <= r * bound + 1e-12);
            }
        }
    }

    #[test]
    fn union_of_seeds_is_pointwise_min() {
        let g = Grid::new_2d([0.0, 0.0], 0.05, [30, 25]).unwrap();
        let vel = two_speed();
        let a = arrival_time(&Seed::Cells(vec![3]), &vel, &g, Stencil::Eight).unwrap();
        let b = arrival_time(&Seed::Cells(vec![500]), &vel, &g, Stencil::Eight).unwrap();
        let ab = arrival_time(&Seed::Cells(vec![3, 500]), &vel, &g, Stencil::Eight).unwrap();
        for k in 0..g.len() {
            assert_eq!(ab.times[k], a.times[k].min(b.times[k]));
        }
    }

    #[test]
    fn faster_is_never_later() {
        let g = Grid::new_2d([-1.0, -1.0], 0.05, [41, 41]).unwrap();
        let slow = arrival_time(&Seed::Point([0.3, 0.1]), &two_speed(), &g, Stencil::Eight).unwrap();
        let fast = arrival_time(&Seed::Point([0.3, 0.1]), &Velocity::Constant(2.0), &g, Stencil::Eight).unwrap();
        assert!(slow.times.iter().zip(&fast.times).all(|(s, f)| f <= s));
    }

    #[test]
    fn window_minimum_in_1d() {
        let h = 0.01;
        let g = line(-1.0, h, 201);
        let u0 = ScalarField::from_fn(g, |x| (5.0 * x[0]).sin() + x[0]).unwrap();
        let a = 0.7;
        let vel = Velocity::Constant(a);
        for &(x, t) in &[(0.0, 0.3), (-0.4, 0.5), (0.55, 0.2)] {
            let got = represent_u([x, 0.0], t, &u0, &vel, Stencil::Eight).unwrap();
            let window = |w: f64| {
                (0..g.len())
                    .map(|k| (g.coord(k)[0], u0.values()[k]))
                    .filter(|(y, _)| (y - x).abs() <= w)
                    .map(|(_, v)| v)
                    .fold(f64::INFINITY, f64::min)
            };
            // one cell of slack at the window edge
            assert!(got >= window(a * t + h) - 1e-12 && got <= window(a * t - h) + 1e-12);
        }
        assert_eq!(
            represent_u([0.2, 0.0], 0.0, &u0, &vel, Stencil::Eight).unwrap(),
            u0.values()[g.nearest([0.2, 0.0])]
        );
    }

    #[test]
    fn represent_u_semigroup() {
        let h = 0.02;
        let g = line(-1.0, h, 101);
        let u0 = ScalarField::from_fn(g, |x| (4.0 * x[0]).cos() * x[0]).unwrap();
        let vel = two_speed();
        let (s, t) = (0.15, 0.2);
        let at_t: Vec<f64> = (0..g.len())
            .map(|k| represent_u(g.coord(k), t, &u0, &vel, Stencil::Eight).unwrap())
            .collect();
        for &x in &[-0.5, 0.0, 0.1, 0.6] {
            let direct = represent_u([x, 0.0], s + t, &u0, &vel, Stencil::Eight).unwrap();
            let reach = arrival_time(&Seed::Point([x, 0.0]), &vel, &g, Stencil::Eight).unwrap();
            let composed = (0..g.len())
                .filter(|&k| reach.times[k] <= s)
                .map(|k| at_t[k])
                .fold(f64::INFINITY, f64::min);
            // the two differ by at most the variation of u0 over one cell
            assert!((direct - composed).abs() <= 4.0 * h, "{x}: {direct} {composed}");
            assert!(direct <= represent_u([x, 0.0], s, &u0, &vel, Stencil::Eight).unwrap());
        }
    }

    #[test]
    fn representation_at_zero_keeps_signs() {
        let g = Grid::new_2d([-1.0, -1.0], 0.05, [41, 41]).unwrap();
        let u0 = ScalarField::from_fn(g, |x| 0.5 - (x[0] - 0.1).hypot(x[1])).unwrap();
        let r = represent_field(0.0, &u0, &two_speed(), Stencil::Eight).unwrap();
        let (a, b) = (zero_level_set(&u0, 0.0), zero_level_set(&r, 0.0));
        assert_eq!(a.d_plus, b.d_plus);
        assert_eq!(a.d_minus, b.d_minus);
    }

    #[test]
    fn refraction_front_reaches_minus_one() {
        let h = 0.01;
        let g = line(-1.5, h, 351);
        let u0 = ScalarField::from_fn(g, |x| 1.0 - x[0]).unwrap();
        let r = represent_field(1.5, &u0, &two_speed(), Stencil::Eight).unwrap();
        let f = zero_level_set(&r, 0.0).gamma;
        assert_eq!(f.len(), 1);
        assert!((f[0][0] + 1.0).abs() <= 2.0 * h, "{f:?}");
    }

    #[test]
    fn circle_shrinks_at_constant_speed() {
        let g = Grid::new_2d([-1.5, -1.5], 0.02, [151, 151]).unwrap();
        let u0 = ScalarField::from_fn(g, |x| 1.0 - x[0].hypot(x[1])).unwrap();
        let vel = Velocity::Constant(1.0);
        let rep = Representation::new(&u0, &vel, Stencil::Sixteen).unwrap();
        let circle: Vec<Point> = (0..720)
            .map(|k| {
                let th = k as f64 / 720.0 * std::f64::consts::TAU;
                [0.6 * th.cos(), 0.6 * th.sin()]
            })
            .collect();
        let f = zero_level_set(&rep.at(0.4), 0.0).gamma;
        // chamfer distortion of the sixteen-stencil over the travelled distance
        let d = hausdorff(&f, &circle).unwrap();
        assert!(d <= 2.0 * g.h() + 0.028 * 0.4, "{d}");
    }

    #[test]
    fn ball_growth_is_exact() {
        let g = Grid::new_2d([-1.0, -1.0], 0.04, [51, 51]).unwrap();
        let vel = two_speed();
        let rho = 1.0;
        let seed = Seed::Point([0.2, -0.3]);
        let t = arrival_time(&seed, &vel, &g, Stencil::Eight).unwrap();
        let chamfer = arrival_from_slowness(&seed, &g, &vec![1.0 / rho; g.len()], Stencil::Eight).unwrap();
        for k in 0..g.len() {
            assert!(t.times[k] <= chamfer.times[k]);
        }
    }

    #[test]
    fn no_interior_verdicts() {
        let g = Grid::new_2d([-1.0, -1.0], 0.02, [101, 101]).unwrap();
        // translating plane with unit gradient
        let plane: Vec<(f64, ScalarField)> = (0..4)
            .map(|s| {
                let t = s as f64 * 0.1;
                (t, ScalarField::from_fn(g, |x| 0.6 * x[0] + 0.8 * x[1] - t).unwrap())
            })
            .collect();
        let rep = no_interior_check(&plane, None);
        assert!(rep.samples.iter().all(|s| s.ratio <= 2.0), "{rep:?}");
        assert_eq!(rep.verdict, Verdict::NoFattening);

        let zero = vec![(0.0, ScalarField::constant(g, 0.0).unwrap())];
        let r = no_interior_check(&zero, None);
        assert_eq!(r.verdict, Verdict::Fattening);
        assert!(r.max_ratio.is_infinite());
        assert_eq!(combined_verdict(&[rep, r]), Verdict::Fattening);
    }
}
