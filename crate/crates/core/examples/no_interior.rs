//! The band |u| <= h/2 around the front should scale like h times its length.

use frontlim::arrival::no_interior_check;
use frontlim::field::{Grid, ScalarField};
use frontlim::hj::{hj_run, HjConfig};
use frontlim::model::{Interface, SpeedMode, Velocity, VelocityModel};

fn main() -> frontlim::Result<()> {
    let velocity = Velocity::Model(VelocityModel::piecewise_constant(
        1.0,
        2.0,
        0.25,
        Interface::Hyperplane { normal: [1.0, 0.0], offset: 0.5 },
        0.5,
    )?);
    for n in [50, 100] {
        let h = 4.0 / n as f64;
        let grid = Grid::new_2d([-1.5, -2.0], h, [n + 1, n + 1])?;
        let u0 = ScalarField::from_fn(grid, |x| 1.0 - x[0].hypot(x[1]))?;
        let cfg = HjConfig::stable(grid, &velocity, SpeedMode::LowerEnvelope, 0.5, false, 0.9)?
            .with_times([0.1, 0.3, 0.5]);
        let sol = hj_run(&cfg, &u0, &velocity)?;
        let rep = no_interior_check(&sol.snapshots, None);
        println!("h = {h}: max band ratio {:.3}, verdict {:?}", rep.max_ratio, rep.verdict);
    }
    Ok(())
}
