//! Uniform-grid scalar fields and the geometric tools shared by every solver:
//! zero-level-set extraction, signed distance, Hausdorff distance and the
//! band measure used as a fattening proxy.

mod distance;
mod io;
mod level_set;

pub use distance::{brute_force_distance, distance_to_front, hausdorff, signed_distance, signed_distance_from_mask};
pub use io::{read_field, write_csv, write_field, FIELD_MAGIC};
pub use level_set::{front_length, interior_band_measure, zero_level_set, Crossing, FrontTriple};

use crate::error::{Error, Result};

/// Grids with at least this many nodes update their rows in parallel.
const PARALLEL_THRESHOLD: usize = 1 << 14;

/// Fills `out` row by row with `row(j, out_row)`, in parallel on large grids.
/// Each row is written independently, so the result does not depend on the
/// thread count.
pub(crate) fn update_rows(grid: &Grid, out: &mut [f64], row: impl Fn(usize, &mut [f64]) + Sync) {
    use rayon::prelude::*;
    if grid.len() >= PARALLEL_THRESHOLD {
        out.par_chunks_mut(grid.nx())
            .enumerate()
            .for_each(|(j, r)| row(j, r));
    } else {
        out.chunks_mut(grid.nx())
            .enumerate()
            .for_each(|(j, r)| row(j, r));
    }
}

/// A point in one or two dimensions. In 1D only the first coordinate is used
/// and the second is kept at zero.
pub type Point = [f64; 2];

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Boundary treatment for the stencil solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Zero normal derivative, realised by reflecting across the boundary node.
    #[default]
    #[serde(alias = "neumann")]
    ZeroNormalDerivative,
}

/// Uniform isotropic Cartesian grid. Nodes sit at `origin + i * h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    origin: Point,
    h: f64,
    extents: [usize; 2],
    boundary: Boundary,
}

impl Grid {
    pub fn new_1d(origin: f64, h: f64, n: usize) -> Result<Self> {
        Self::new(1, [origin, 0.0], h, [n, 1])
    }

    pub fn new_2d(origin: Point, h: f64, extents: [usize; 2]) -> Result<Self> {
        Self::new(2, origin, h, extents)
    }

    /// Grid covering `[lower, upper]` (per axis) with spacing at most `h_max`.
    /// The spacing is shrunk so the box is covered by a whole number of cells;
    /// for 2D boxes the same spacing is used on both axes, which may leave the
    /// upper edge of the shorter axis slightly inside the requested bound.
    pub fn covering(dim: usize, lower: Point, upper: Point, h_max: f64) -> Result<Self> {
        if !(h_max > 0.0) || !h_max.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h_max}")));
        }
        let width0 = upper[0] - lower[0];
        if !(width0 > 0.0) {
            return Err(Error::InvalidGrid("empty box".into()));
        }
        let cells = (width0 / h_max).ceil().max(2.0) as usize;
        let h = width0 / cells as f64;
        match dim {
            1 => Self::new_1d(lower[0], h, cells + 1),
            2 => {
                let width1 = upper[1] - lower[1];
                if !(width1 > 0.0) {
                    return Err(Error::InvalidGrid("empty box".into()));
                }
                let n1 = (width1 / h + 1e-9).floor() as usize + 1;
                Self::new_2d(lower, h, [cells + 1, n1])
            }
            d => Err(Error::InvalidGrid(format!("unsupported dimension {d}"))),
        }
    }

    fn new(dim: usize, origin: Point, h: f64, extents: [usize; 2]) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        let active = &extents[..dim];
        if active.iter().any(|&n| n < 3) {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 cells per axis, got {:?}",
                active
            )));
        }
        if active.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).is_none() {
            return Err(Error::InvalidGrid("cell count overflows".into()));
        }
        Ok(Grid {
            dim,
            origin,
            h,
            extents,
            boundary: Boundary::default(),
        })
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn origin(&self) -> Point {
        self.origin
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    /// Nodes along each axis; the second entry is 1 for 1D grids.
    pub fn extents(&self) -> [usize; 2] {
        self.extents
    }
    pub fn nx(&self) -> usize {
        self.extents[0]
    }
    pub fn ny(&self) -> usize {
        self.extents[1]
    }
    pub fn len(&self) -> usize {
        self.extents[0] * self.extents[1]
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper corner of the covered box.
    pub fn upper(&self) -> Point {
        let mut u = self.origin;
        u[0] += (self.extents[0] - 1) as f64 * self.h;
        if self.dim == 2 {
            u[1] += (self.extents[1] - 1) as f64 * self.h;
        }
        u
    }

    /// Measure of one cell: h in 1D, h² in 2D.
    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Measure of the covered box.
    pub fn domain_measure(&self) -> f64 {
        self.len() as f64 * self.cell_measure()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.extents[0] + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.extents[0], idx / self.extents[0])
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        self.coord_ij(i, j)
    }

    #[inline]
    pub fn coord_ij(&self, i: usize, j: usize) -> Point {
        if self.dim == 1 {
            [self.origin[0] + i as f64 * self.h, 0.0]
        } else {
            [
                self.origin[0] + i as f64 * self.h,
                self.origin[1] + j as f64 * self.h,
            ]
        }
    }

    /// Index of the node nearest to `p` (clamped into the grid).
    pub fn nearest(&self, p: Point) -> usize {
        let snap = |v: f64, o: f64, n: usize| -> usize {
            let k = ((v - o) / self.h).round();
            k.clamp(0.0, (n - 1) as f64) as usize
        };
        let i = snap(p[0], self.origin[0], self.extents[0]);
        let j = if self.dim == 2 {
            snap(p[1], self.origin[1], self.extents[1])
        } else {
            0
        };
        self.index(i, j)
    }

    /// Same node layout and spacing (boundary kind ignored).
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.extents == other.extents
            && self.h == other.h
            && self.origin == other.origin
    }

    /// Previous and next position along `axis` from `p`. Zero-normal-derivative
    /// boundaries reflect across the edge node, periodic boundaries wrap
    /// around. Axis 1 of a 1D grid gives `p` itself twice.
    #[inline]
    pub(crate) fn axis_neighbors(&self, axis: usize, p: usize) -> (usize, usize) {
        let n = self.extents[axis];
        if axis == 1 && self.dim == 1 {
            return (p, p);
        }
        let lo = if p > 0 {
            p - 1
        } else if self.boundary == Boundary::Periodic {
            n - 1
        } else {
            1
        };
        let hi = if p + 1 < n {
            p + 1
        } else if self.boundary == Boundary::Periodic {
            0
        } else {
            n - 2
        };
        (lo, hi)
    }
}

/// Real values on the nodes of a [`Grid`], stored row-major (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {k}")));
        }
        Ok(ScalarField { grid, values })
    }

    /// Internal constructor for solvers that check finiteness themselves.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        ScalarField { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.coord(k))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, v: f64) -> Result<Self> {
        Self::new(grid, vec![v; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise `self - other` on the same grid.
    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        if !self.grid.same_layout(&other.grid) {
            return Err(Error::DomainMismatch("fields live on different grids".into()));
        }
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Nearest-node resample onto `target`. Nodes of `target` outside this
    /// field's box take the value of the closest boundary node.
    pub fn resample_nearest(&self, target: &Grid) -> Self {
        let values = (0..target.len())
            .map(|k| self.values[self.grid.nearest(target.coord(k))])
            .collect();
        ScalarField::from_parts(*target, values)
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(Grid::new_1d(0.0, 0.0, 10).is_err());
        assert!(Grid::new_1d(0.0, 0.1, 2).is_err());
        assert!(Grid::new_2d([0.0, 0.0], 0.1, [3, 2]).is_err());
        assert!(Grid::new_1d(0.0, -1.0, 10).is_err());
    }

    #[test]
    fn covering_hits_both_ends() {
        let g = Grid::covering(1, [-2.0, 0.0], [2.0, 0.0], 0.03).unwrap();
        assert!(g.h() <= 0.03);
        assert!((g.upper()[0] - 2.0).abs() < 1e-12);
        let g2 = Grid::covering(2, [-2.0, -2.0], [2.0, 2.0], 0.02).unwrap();
        assert_eq!(g2.extents(), [201, 201]);
    }

    #[test]
    fn reflecting_and_periodic_neighbours() {
        let g = Grid::new_1d(0.0, 1.0, 5).unwrap();
        assert_eq!(g.axis_neighbors(0, 0), (1, 1));
        assert_eq!(g.axis_neighbors(0, 4), (3, 3));
        assert_eq!(g.axis_neighbors(0, 2), (1, 3));
        assert_eq!(g.axis_neighbors(1, 0), (0, 0));
        let p = g.with_boundary(Boundary::Periodic);
        assert_eq!(p.axis_neighbors(0, 0), (4, 1));
        assert_eq!(p.axis_neighbors(0, 4), (3, 0));
    }

    #[test]
    fn field_rejects_nan() {
        let g = Grid::new_1d(0.0, 1.0, 3).unwrap();
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(ScalarField::new(g, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn nearest_resample_keeps_extrema() {
        let fine = Grid::new_1d(0.0, 0.25, 9).unwrap();
        let coarse = Grid::new_1d(0.0, 0.5, 5).unwrap();
        let f = ScalarField::from_fn(fine, |p| (7.0 * p[0]).sin()).unwrap();
        let r = f.resample_nearest(&coarse);
        for &v in r.values() {
            assert!(f.values().contains(&v));
        }
    }
}
