//! The wave profile tanh(r + shift) solves the profile equation at every point of the model.

use frontlim::model::{validate_assumptions, wave_residual, BistableModel, Interface, Scaling, VelocityModel};

fn main() -> frontlim::Result<()> {
    let velocity = VelocityModel::piecewise_constant(
        1.0,
        1.5,
        0.25,
        Interface::Hyperplane { normal: [1.0, 0.0], offset: 0.0 },
        0.25,
    )?;
    let model = BistableModel::new(velocity, 0.05, Scaling::One)?;
    let rs: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
    for x1 in [-0.5, -0.05, 0.0, 0.05, 0.5] {
        let x = [x1, 0.0];
        println!(
            "x1 = {x1:>5}: c = {:.4}, q(0) = {:.4}, residual {:.1e}",
            model.c_eps(x),
            model.traveling_wave(0.0, x),
            wave_residual(&model, x, &rs)
        );
    }
    let samples: Vec<_> = (0..=20).map(|i| [-1.0 + 0.1 * i as f64, 0.0]).collect();
    for c in validate_assumptions(&model, &samples).checks {
        println!("{:<36} {}", c.name, if c.passed { "ok" } else { "FAILED" });
    }
    Ok(())
}
