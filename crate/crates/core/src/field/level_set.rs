use super::{dist, Point, ScalarField};

/// Where a front point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// A node whose value equals the level exactly.
    Node(usize),
    /// Linear interpolation along the edge between two adjacent nodes whose
    /// values lie strictly on opposite sides of the level.
    Edge(usize, usize),
}

/// The decomposition of the grid into front, positive phase and negative
/// phase for one level of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontTriple {
    pub gamma: Vec<Point>,
    pub sources: Vec<Crossing>,
    pub d_plus: Vec<bool>,
    pub d_minus: Vec<bool>,
    pub iso: f64,
}

impl FrontTriple {
    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
    pub fn plus_count(&self) -> usize {
        self.d_plus.iter().filter(|&&b| b).count()
    }
    pub fn minus_count(&self) -> usize {
        self.d_minus.iter().filter(|&&b| b).count()
    }
}

/// Extracts `{f = iso}` together with the strict super- and sub-level masks.
///
/// Nodes exactly at `iso` are front points and belong to neither mask. An
/// empty front is a valid result.
pub fn zero_level_set(f: &ScalarField, iso: f64) -> FrontTriple {
    let grid = f.grid();
    let v = f.values();
    let mut gamma = Vec::new();
    let mut sources = Vec::new();
    let d_plus: Vec<bool> = v.iter().map(|&x| x > iso).collect();
    let d_minus: Vec<bool> = v.iter().map(|&x| x < iso).collect();

    for (k, &x) in v.iter().enumerate() {
        if x == iso {
            gamma.push(grid.coord(k));
            sources.push(Crossing::Node(k));
        }
    }

    let mut edge = |a: usize, b: usize| {
        let (fa, fb) = (v[a] - iso, v[b] - iso);
        if (fa > 0.0 && fb < 0.0) || (fa < 0.0 && fb > 0.0) {
            let theta = fa / (fa - fb);
            let pa = grid.coord(a);
            let pb = grid.coord(b);
            gamma.push([
                pa[0] + theta * (pb[0] - pa[0]),
                pa[1] + theta * (pb[1] - pa[1]),
            ]);
            sources.push(Crossing::Edge(a, b));
        }
    };
    let [nx, ny] = grid.extents();
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            if i + 1 < nx {
                edge(k, grid.index(i + 1, j));
            }
            if grid.dim() == 2 && j + 1 < ny {
                edge(k, grid.index(i, j + 1));
            }
        }
    }

    FrontTriple {
        gamma,
        sources,
        d_plus,
        d_minus,
        iso,
    }
}

/// Measure (length in 1D, area in 2D) of the band `{|f| <= tol}`, counted as
/// cells times `h^dim`.
pub fn interior_band_measure(f: &ScalarField, tol: f64) -> f64 {
    let n = f.values().iter().filter(|v| v.abs() <= tol).count();
    n as f64 * f.grid().cell_measure()
}

/// Size of the front `{f = iso}`: total polyline length from marching squares
/// in 2D, the number of crossing points in 1D.
pub fn front_length(f: &ScalarField, iso: f64) -> f64 {
    let grid = f.grid();
    if grid.dim() == 1 {
        return zero_level_set(f, iso).gamma.len() as f64;
    }
    let v = f.values();
    let [nx, ny] = grid.extents();
    let mut total = 0.0;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let corners = [
                grid.index(i, j),
                grid.index(i + 1, j),
                grid.index(i + 1, j + 1),
                grid.index(i, j + 1),
            ];
            let vals = corners.map(|c| v[c] - iso);
            if vals.iter().all(|&x| x == 0.0) {
                continue;
            }
            // walk the square boundary, collecting crossing points in order
            let mut pts: Vec<Point> = Vec::with_capacity(4);
            let mut on_corner = [false; 4];
            for e in 0..4 {
                let a = corners[e];
                let b = corners[(e + 1) % 4];
                let (fa, fb) = (vals[e], vals[(e + 1) % 4]);
                if fa == 0.0 {
                    pts.push(grid.coord(a));
                    on_corner[pts.len() - 1] = true;
                }
                if (fa > 0.0 && fb < 0.0) || (fa < 0.0 && fb > 0.0) {
                    let t = fa / (fa - fb);
                    let pa = grid.coord(a);
                    let pb = grid.coord(b);
                    pts.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                }
                if pts.len() == 4 {
                    break;
                }
            }
            total += match pts.len() {
                2 => {
                    let len = dist(pts[0], pts[1]);
                    // a segment lying along a grid edge is shared with the
                    // neighbouring square
                    if on_corner[0] && on_corner[1] {
                        0.5 * len
                    } else {
                        len
                    }
                }
                3 => dist(pts[0], pts[1]).min(dist(pts[1], pts[2])),
                4 => {
                    let a = dist(pts[0], pts[1]) + dist(pts[2], pts[3]);
                    let b = dist(pts[1], pts[2]) + dist(pts[3], pts[0]);
                    a.min(b)
                }
                _ => 0.0,
            };
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    #[test]
    fn linear_1d_crossing_is_exact() {
        let g = Grid::new_1d(-1.05, 0.1, 21).unwrap();
        let f = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let t = zero_level_set(&f, 0.0);
        assert_eq!(t.gamma.len(), 1);
        assert!(t.gamma[0][0].abs() < 1e-14);
    }

    #[test]
    fn one_signed_field_has_empty_front() {
        let g = Grid::new_2d([0.0, 0.0], 0.1, [5, 5]).unwrap();
        let f = ScalarField::constant(g, 1.0).unwrap();
        let t = zero_level_set(&f, 0.0);
        assert!(t.is_empty());
        assert_eq!(t.plus_count(), g.len());
        assert_eq!(t.minus_count(), 0);
    }

    #[test]
    fn nodes_at_level_belong_to_neither_mask() {
        let g = Grid::new_1d(-1.0, 0.5, 5).unwrap();
        let f = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let t = zero_level_set(&f, 0.0);
        assert_eq!(t.sources, vec![Crossing::Node(2)]);
        assert!(!t.d_plus[2] && !t.d_minus[2]);
    }

    #[test]
    fn circle_points_within_h() {
        let g = Grid::covering(2, [-2.0, -2.0], [2.0, 2.0], 0.05).unwrap();
        let f = ScalarField::from_fn(g, |p| 1.0 - p[0].hypot(p[1])).unwrap();
        let t = zero_level_set(&f, 0.0);
        assert!(!t.is_empty());
        for p in &t.gamma {
            assert!((p[0].hypot(p[1]) - 1.0).abs() <= g.h());
        }
    }

    #[test]
    fn band_measure_examples() {
        let g = Grid::covering(1, [-1.0, 0.0], [1.0, 0.0], 0.01).unwrap();
        let h = g.h();
        let f = ScalarField::from_fn(g, |p| p[0] + 0.3 * h).unwrap();
        // two nodes within h of a plane that misses the grid nodes
        assert!((interior_band_measure(&f, h) - 2.0 * h).abs() < 1e-12);
        let z = ScalarField::constant(g, 0.0).unwrap();
        assert!((interior_band_measure(&z, h) - g.domain_measure()).abs() < 1e-12);
    }

    #[test]
    fn annulus_band_measure() {
        let g = Grid::covering(2, [-2.0, -2.0], [2.0, 2.0], 0.02).unwrap();
        let h = g.h();
        let f = ScalarField::from_fn(g, |p| 1.0 - p[0].hypot(p[1])).unwrap();
        let m = interior_band_measure(&f, h);
        let annulus = 2.0 * std::f64::consts::PI * 2.0 * h;
        assert!(m > annulus / 2.0 && m < annulus * 2.0, "{m} vs {annulus}");
    }

    #[test]
    fn band_measure_monotone_in_tol() {
        let g = Grid::covering(2, [-1.0, -1.0], [1.0, 1.0], 0.05).unwrap();
        let f = ScalarField::from_fn(g, |p| (3.0 * p[0]).sin() * p[1]).unwrap();
        let mut prev = 0.0;
        for k in 1..40 {
            let m = interior_band_measure(&f, k as f64 * 0.01);
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn circle_length() {
        let g = Grid::covering(2, [-2.0, -2.0], [2.0, 2.0], 0.02).unwrap();
        let f = ScalarField::from_fn(g, |p| 1.0 - p[0].hypot(p[1])).unwrap();
        let len = front_length(&f, 0.0);
        assert!((len - 2.0 * std::f64::consts::PI).abs() < 0.01, "{len}");
    }

    #[test]
    fn grid_aligned_line_is_not_double_counted() {
        let g = Grid::new_2d([0.0, 0.0], 0.1, [11, 11]).unwrap();
        let f = ScalarField::from_fn(g, |p| p[0] - 0.5).unwrap();
        let len = front_length(&f, 0.0);
        assert!((len - 1.0).abs() < 1e-9, "{len}");
    }
}
