//! Arrival times through a speed jump, and the sign-of-arrival representation
//! of the level-set solution.

use frontlim::arrival::{arrival_time, Representation, Seed, Stencil};
use frontlim::field::{hausdorff, zero_level_set, Grid, ScalarField};
use frontlim::hj::{hj_run, HjConfig};
use frontlim::model::{Interface, SpeedMode, Velocity, VelocityModel};

fn main() -> frontlim::Result<()> {
    let model = VelocityModel::piecewise_constant(
        1.0,
        2.0,
        0.25,
        Interface::Hyperplane { normal: [1.0, 0.0], offset: 0.5 },
        0.5,
    )?;
    let velocity = Velocity::Model(model);
    let grid = Grid::new_2d([-1.5, -2.0], 0.04, [101, 101])?;

    for stencil in [Stencil::Eight, Stencil::Sixteen] {
        let field = arrival_time(&Seed::Point([0.0, 0.0]), &velocity, &grid, stencil)?;
        let far = field.times[grid.nearest([2.0, 0.0])];
        println!("{stencil:?}: T(2, 0) = {far:.4} (sharp interface: 1.25), worst distortion {:.4}", stencil.distortion());
    }

    let u0 = ScalarField::from_fn(grid, |x| 1.0 - x[0].hypot(x[1]))?;
    let rep = Representation::new(&u0, &velocity, Stencil::Sixteen)?;
    let cfg = HjConfig::stable(grid, &velocity, SpeedMode::LowerEnvelope, 0.5, false, 0.9)?.with_times([0.25, 0.5]);
    let sol = hj_run(&cfg, &u0, &velocity)?;
    for t in [0.25, 0.5] {
        let d = hausdorff(&sol.front(t).gamma, &zero_level_set(&rep.at(t), 0.0).gamma)?;
        println!("t = {t}: level set vs arrival representation, Hausdorff {d:.4}");
    }
    Ok(())
}
