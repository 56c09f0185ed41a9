//! Reaction-diffusion runs on a shrinking eps ladder measured against the arrival-time front.

use std::path::PathBuf;

use frontlim::arrival::Stencil;
use frontlim::cli::ExperimentSpec;
use frontlim::field::ScalarField;
use frontlim::limits::{arrival_reference, converge_report};
use frontlim::model::Velocity;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs/refraction_1d.toml");
    let s = ExperimentSpec::load(&path, &[], None)?;
    let ladder = s.ladder()?;
    let initial = s.initial_data()?;
    let finest = *ladder.epsilons().last().unwrap();
    let u0 = ScalarField::from_fn(ladder.grid_for(finest)?, |x| initial.distance().eval(x))?;
    let velocity = Velocity::Model(ladder.model.velocity.clone());
    let times = &s.experiment.times;
    let reference = arrival_reference(&u0, &velocity, Stencil::Eight, times)?;
    let rep = converge_report(&ladder, &initial, &reference, times, s.solver.agreement_tol)?;
    print!("{}", rep.to_csv());
    println!("strictly decreasing per time: {:?}", rep.strictly_decreasing);
    Ok(())
}
