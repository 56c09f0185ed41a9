//! Level-set run with constant speed: a circle of radius 1 shrinks linearly.

use frontlim::field::{Grid, ScalarField};
use frontlim::hj::{hj_run, radius_error, HjConfig};
use frontlim::model::{SpeedMode, Velocity};

fn main() -> frontlim::Result<()> {
    let grid = Grid::new_2d([-1.5, -1.5], 0.03, [101, 101])?;
    let velocity = Velocity::Constant(1.0);
    let u0 = ScalarField::from_fn(grid, |x| 1.0 - x[0].hypot(x[1]))?;
    let cfg = HjConfig::stable(grid, &velocity, SpeedMode::LowerEnvelope, 0.5, false, 0.9)?
        .with_times([0.25, 0.5]);
    let sol = hj_run(&cfg, &u0, &velocity)?;
    for t in [0.25, 0.5] {
        let (mean, worst) = radius_error(&sol.front(t).gamma, [0.0, 0.0], 1.0 - t).unwrap();
        println!("t = {t}: radius {:.3}, mean error {mean:.4}, max error {worst:.4}", 1.0 - t);
    }
    Ok(())
}
