//! Curvature flow with a forcing term against the radius ODE R' = -1/R - a.

use frontlim::field::{Grid, ScalarField};
use frontlim::hj::{circle_radius_ode, mcf_run, radius_error, HjConfig};
use frontlim::model::{SpeedMode, Velocity};

fn main() -> frontlim::Result<()> {
    let grid = Grid::new_2d([-1.2, -1.2], 0.024, [101, 101])?;
    let u0 = ScalarField::from_fn(grid, |x| 1.0 - x[0].hypot(x[1]))?;
    for a in [0.0, 0.5] {
        let velocity = Velocity::Constant(a);
        let cfg = HjConfig::stable(grid, &velocity, SpeedMode::LowerEnvelope, 0.3, true, 0.9)?;
        let sol = mcf_run(&cfg, &u0, &velocity)?;
        let r = circle_radius_ode(1.0, a, 0.3, 3000);
        let (_, worst) = radius_error(&sol.front(0.3).gamma, [0.0, 0.0], r).unwrap();
        println!("a = {a}: R(0.3) = {r:.4}, max error {worst:.4}");
    }
    Ok(())
}
