//! Reaction-diffusion front in a uniform medium: the fitted speed approaches n1.

use frontlim::field::{Grid, ScalarField};
use frontlim::model::{BistableModel, Interface, Scaling, VelocityModel};
use frontlim::rd::{fit_front_speed, rd_run, RdConfig};

fn main() -> frontlim::Result<()> {
    // interface far outside the box, so c = n1 everywhere
    let velocity = VelocityModel::piecewise_constant(
        0.8,
        1.3,
        0.25,
        Interface::Hyperplane { normal: [1.0, 0.0], offset: 1000.0 },
        0.5,
    )?;
    let model = BistableModel::new(velocity, 0.04, Scaling::One)?;
    let grid = Grid::new_1d(-1.0, 0.008, 314)?;
    let g = ScalarField::from_fn(grid, |x| model.traveling_wave(x[0] / model.epsilon, x))?;
    let cfg = RdConfig::stable(model, grid, 0.5, 0.9).with_record_every(25);
    let traj = rd_run(&cfg, &g)?;
    println!("{} steps, {} snapshots", traj.steps, traj.snapshots.len());
    println!("fitted speed {:.4} (limit 0.8)", fit_front_speed(&traj, 0.1, 0.5)?);
    Ok(())
}
