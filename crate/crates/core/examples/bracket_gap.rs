//! One-sided envelope speeds bracket the front; the gap is of order eps.

use frontlim::field::{Grid, ScalarField};
use frontlim::hj::{bracket_run, HjConfig};
use frontlim::model::{BistableModel, Interface, Scaling, SpeedMode, Velocity, VelocityModel};

fn main() -> frontlim::Result<()> {
    let velocity = VelocityModel::piecewise_constant(
        1.0,
        2.0,
        0.25,
        Interface::Hyperplane { normal: [1.0, 0.0], offset: 0.5 },
        0.5,
    )?;
    let grid = Grid::new_2d([-1.5, -2.0], 0.04, [101, 101])?;
    let u0 = ScalarField::from_fn(grid, |x| 1.0 - x[0].hypot(x[1]))?;
    for eps in [0.1, 0.05] {
        let model = BistableModel::new(velocity.clone(), eps, Scaling::Two)?;
        let cfg = HjConfig::stable(grid, &Velocity::Bistable(model.clone()), SpeedMode::OneSidedUpper, 0.5, false, 0.9)?
            .with_times([0.1, 0.2, 0.3, 0.4, 0.5]);
        let br = bracket_run(&cfg, &u0, &model)?;
        println!("eps = {eps}: max gap {:.4}", br.max_gap().unwrap_or(f64::NAN));
    }
    Ok(())
}
