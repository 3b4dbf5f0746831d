//! One localization run on the built-in world, printing the position error
//! every tenth step for the bootstrap filter and the implicit fitted likelihood.

use lipdf::harness::runners::run_mcl_trial;
use lipdf::harness::{Experiment, ExperimentConfig, FilterKind};
use lipdf::models::mcl::World;

fn main() -> lipdf::Result<()> {
    let world = World::default_world();
    for filter in [FilterKind::Sir, FilterKind::Lipdf] {
        let mut cfg = ExperimentConfig::new(Experiment::Mcl);
        cfg.filter = filter;
        cfg.seed = 7;
        let trial = run_mcl_trial(&cfg, &world, 500, 0)?;
        let eds: Vec<String> = trial.ed.iter().step_by(10).map(|e| format!("{e:.2}")).collect();
        println!("{:<6} ED every 10 steps: {}", filter.name(), eds.join(" "));
        println!(
            "       active steps {}, model likelihood calls {}",
            trial.stats.activated_steps, trial.stats.counted_calls
        );
    }
    Ok(())
}
