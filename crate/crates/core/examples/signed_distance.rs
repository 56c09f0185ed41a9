//! Signed distance to a circle from a sampled field, compared with the exact value.

use frontlim::field::{signed_distance, zero_level_set, Grid, ScalarField};

fn main() -> frontlim::Result<()> {
    let grid = Grid::new_2d([-1.0, -1.0], 0.02, [101, 101])?;
    // same zero set as the circle of radius 0.6, but far from a distance
    let f = ScalarField::from_fn(grid, |x| x[0] * x[0] + x[1] * x[1] - 0.36)?;
    let d = signed_distance(&f)?;
    let exact = ScalarField::from_fn(grid, |x| x[0].hypot(x[1]) - 0.6)?;
    println!("front points: {}", zero_level_set(&f, 0.0).gamma.len());
    println!("sup error against |x| - 0.6: {:.2e} (h = {})", d.sup_distance(&exact), grid.h());
    Ok(())
}
