//! Time for the plateau to reach the stable phases, divided by its predicted scale.

use std::path::PathBuf;

use frontlim::cli::ExperimentSpec;
use frontlim::limits::{generation_ladder, GenerationOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs");
    for file in ["gen_time_one.toml", "gen_time_two.toml"] {
        let s = ExperimentSpec::load(&dir.join(file), &[], None)?;
        let opts = GenerationOptions {
            beta: s.solver.beta,
            region: s.solver.region,
            t_end: s.t_end()?,
            margin: s.solver.margin,
        };
        let fit = generation_ladder(&s.ladder()?, &s.initial_data()?, s.experiment.distance.as_ref().unwrap(), &opts)?;
        println!("{:?}", fit.scaling);
        for ((eps, t), r) in fit.epsilons.iter().zip(&fit.times).zip(&fit.ratios) {
            println!("  eps {eps}: t_gen {t:?}, ratio {r:?}");
        }
        println!("  spread {:?}", fit.spread);
    }
    Ok(())
}
