use super::level_set::{zero_level_set, Crossing, FrontTriple};
use super::{dist, Grid, Point, ScalarField};
use crate::error::{Error, Result};

/// Point-set sizes (sum of both sets) below which [`hausdorff`] uses the
/// quadratic scan.
const BRUTE_FORCE_LIMIT: usize = 10_000;

const NONE: u32 = u32::MAX;

/// Signed Euclidean distance to the zero level set of `f`, positive where
/// `f > 0`.
///
/// Crossing points are found by linear interpolation along grid edges and
/// then propagated over the grid in two raster passes that carry, for each
/// node, the index of the closest crossing point seen so far.
pub fn signed_distance(f: &ScalarField) -> Result<ScalarField> {
    let triple = zero_level_set(f, 0.0);
    if triple.plus_count() == 0 || triple.minus_count() == 0 || triple.is_empty() {
        return Err(Error::NoInterface);
    }
    let grid = *f.grid();
    let unsigned = nearest_point_transform(&grid, &triple.gamma, &triple.sources);
    let values = unsigned
        .into_iter()
        .zip(f.values())
        .map(|(d, &v)| {
            if v > 0.0 {
                d
            } else if v < 0.0 {
                -d
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::new(grid, values)
}

/// Signed distance to the boundary of `{x : inside(x)}`, positive inside.
/// The boundary is placed halfway between nodes of opposite membership.
pub fn signed_distance_from_mask(grid: Grid, inside: impl Fn(Point) -> bool) -> Result<ScalarField> {
    let indicator = ScalarField::from_fn(grid, |p| if inside(p) { 1.0 } else { -1.0 })?;
    signed_distance(&indicator)
}

/// Unsigned distance from every node to the front points of `triple`
/// (infinite everywhere when the front is empty).
pub fn distance_to_front(grid: &Grid, triple: &FrontTriple) -> Vec<f64> {
    if triple.is_empty() {
        return vec![f64::INFINITY; grid.len()];
    }
    nearest_point_transform(grid, &triple.gamma, &triple.sources)
}

/// Distance from `p` to the closest member of `points` (infinite if empty).
pub fn brute_force_distance(p: Point, points: &[Point]) -> f64 {
    points.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min)
}

fn nearest_point_transform(grid: &Grid, points: &[Point], sources: &[Crossing]) -> Vec<f64> {
    let n = grid.len();
    let mut nearest = vec![NONE; n];
    let mut best = vec![f64::INFINITY; n];

    let offer = |node: usize, pi: usize, nearest: &mut [u32], best: &mut [f64]| {
        let d = dist(grid.coord(node), points[pi]);
        if d < best[node] {
            best[node] = d;
            nearest[node] = pi as u32;
        }
    };
    for (pi, src) in sources.iter().enumerate() {
        match *src {
            Crossing::Node(k) => offer(k, pi, &mut nearest, &mut best),
            Crossing::Edge(a, b) => {
                offer(a, pi, &mut nearest, &mut best);
                offer(b, pi, &mut nearest, &mut best);
            }
        }
    }

    let [nx, ny] = grid.extents();
    let relax = |c: usize, nb: usize, nearest: &mut [u32], best: &mut [f64]| {
        let pi = nearest[nb];
        if pi != NONE {
            let d = dist(grid.coord(c), points[pi as usize]);
            if d < best[c] {
                best[c] = d;
                nearest[c] = pi;
            }
        }
    };

    if grid.dim() == 1 {
        for _ in 0..2 {
            for i in 1..nx {
                relax(i, i - 1, &mut nearest, &mut best);
            }
            for i in (0..nx - 1).rev() {
                relax(i, i + 1, &mut nearest, &mut best);
            }
        }
        return best;
    }

    let at = |i: usize, j: usize| j * nx + i;
    for _ in 0..2 {
        // forward: bottom to top
        for j in 0..ny {
            for i in 0..nx {
                let c = at(i, j);
                if i > 0 {
                    relax(c, at(i - 1, j), &mut nearest, &mut best);
                }
                if j > 0 {
                    relax(c, at(i, j - 1), &mut nearest, &mut best);
                    if i > 0 {
                        relax(c, at(i - 1, j - 1), &mut nearest, &mut best);
                    }
                    if i + 1 < nx {
                        relax(c, at(i + 1, j - 1), &mut nearest, &mut best);
                    }
                }
            }
            for i in (0..nx - 1).rev() {
                relax(at(i, j), at(i + 1, j), &mut nearest, &mut best);
            }
        }
        // backward: top to bottom
        for j in (0..ny).rev() {
            for i in (0..nx).rev() {
                let c = at(i, j);
                if i + 1 < nx {
                    relax(c, at(i + 1, j), &mut nearest, &mut best);
                }
                if j + 1 < ny {
                    relax(c, at(i, j + 1), &mut nearest, &mut best);
                    if i + 1 < nx {
                        relax(c, at(i + 1, j + 1), &mut nearest, &mut best);
                    }
                    if i > 0 {
                        relax(c, at(i - 1, j + 1), &mut nearest, &mut best);
                    }
                }
            }
            for i in 1..nx {
                relax(at(i, j), at(i - 1, j), &mut nearest, &mut best);
            }
        }
    }
    best
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if a.len() + b.len() < BRUTE_FORCE_LIMIT {
        Ok(directed_brute(a, b).max(directed_brute(b, a)))
    } else {
        Ok(directed_bucketed(a, b).max(directed_bucketed(b, a)))
    }
}

fn directed_brute(a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .map(|&p| brute_force_distance(p, b))
        .fold(0.0, f64::max)
}

/// Uniform bucket grid over a point set for exact nearest-point queries.
struct Buckets<'a> {
    points: &'a [Point],
    lo: Point,
    size: f64,
    n: [usize; 2],
    cells: Vec<Vec<u32>>,
}

impl<'a> Buckets<'a> {
    fn new(points: &'a [Point]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let span = [(hi[0] - lo[0]).max(1e-12), (hi[1] - lo[1]).max(1e-12)];
        let target = (points.len() as f64).sqrt().max(1.0);
        let size = (span[0].max(span[1]) / target).max(1e-12);
        let n = [
            ((span[0] / size).floor() as usize + 1).min(4096),
            ((span[1] / size).floor() as usize + 1).min(4096),
        ];
        let size = size.max(span[0] / n[0] as f64).max(span[1] / n[1] as f64);
        let mut cells = vec![Vec::new(); n[0] * n[1]];
        let mut b = Buckets {
            points,
            lo,
            size,
            n,
            cells: Vec::new(),
        };
        for (k, &p) in points.iter().enumerate() {
            let (ci, cj) = b.cell_of(p);
            cells[cj * n[0] + ci].push(k as u32);
        }
        b.cells = cells;
        b
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let c = |a: usize| -> usize {
            let k = ((p[a] - self.lo[a]) / self.size).floor();
            k.clamp(0.0, (self.n[a] - 1) as f64) as usize
        };
        (c(0), c(1))
    }

    fn nearest(&self, p: Point) -> f64 {
        let (ci, cj) = self.cell_of(p);
        let (ci, cj) = (ci as isize, cj as isize);
        let mut best = f64::INFINITY;
        let max_ring = self.n[0].max(self.n[1]) as isize;
        for r in 0..=max_ring {
            for dj in -r..=r {
                for di in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    let (i, j) = (ci + di, cj + dj);
                    if i < 0 || j < 0 || i >= self.n[0] as isize || j >= self.n[1] as isize {
                        continue;
                    }
                    for &k in &self.cells[j as usize * self.n[0] + i as usize] {
                        best = best.min(dist(p, self.points[k as usize]));
                    }
                }
            }
            // cells in ring r + 1 are at least r cell widths away
            if best <= r as f64 * self.size {
                break;
            }
        }
        best
    }
}

fn directed_bucketed(a: &[Point], b: &[Point]) -> f64 {
    let buckets = Buckets::new(b);
    a.iter().map(|&p| buckets.nearest(p)).fold(0.0, f64::max)
}
