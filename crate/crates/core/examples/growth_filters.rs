//! SIR, GPF and the explicit fitted-likelihood filter side by side on one
//! growth-model trajectory.

use lipdf::harness::runners::simulate_ugm;
use lipdf::lipdf::FulcrumObservations;
use lipdf::metrics::RmseAccumulator;
use lipdf::models::ugm::Ugm1d;
use lipdf::{gpf_step, sir_step, GridSpec, LipdfConfig, LipdfFilter, ParticleEnsemble, ResamplePolicy, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: usize = 200;
const STEPS: usize = 2000;

fn main() -> lipdf::Result<()> {
    let model = Ugm1d::default();
    let truth = simulate_ugm(&model, STEPS, &mut ChaCha8Rng::seed_from_u64(5));
    let prior = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = ParticleEnsemble::sample(1, N, &mut rng, |r, row| row[0] = model.sample_initial(r)).unwrap();
        (e, rng)
    };

    let mut scores = Vec::new();
    for name in ["sir", "gpf", "lipdf"] {
        let (mut ens, mut rng) = prior(6);
        let mut cfg = LipdfConfig::new(Variant::Explicit, GridSpec::fixed(vec![0], 10, 1.0));
        // one noisy draw per fulcrum; the noiseless map would reproduce SIR exactly
        cfg.fulcrum_observations = FulcrumObservations::Simulated;
        let mut lipdf = LipdfFilter::new(cfg);
        let mut acc = RmseAccumulator::default();
        let mut calls = 0;
        for (t, (&x, &y)) in truth.states.iter().zip(&truth.observations).enumerate() {
            let rep = match name {
                "sir" => sir_step(&mut ens, &model, &[y], t + 1, &ResamplePolicy::default(), &mut rng)?,
                "gpf" => gpf_step(&mut ens, &model, &[y], t + 1, &mut rng)?,
                _ => {
                    let r = lipdf.step(&mut ens, &model, &[y], t + 1, &mut rng)?;
                    calls += r.model_likelihood_calls;
                    r.base
                }
            };
            if name != "lipdf" {
                calls += rep.likelihood_calls;
            }
            acc.push(&[x], &rep.estimate);
        }
        scores.push(format!("{name:<6} RMSE {:.4}  model likelihood calls {calls}", acc.value().unwrap()));
    }
    for line in scores {
        println!("{line}");
    }
    Ok(())
}
