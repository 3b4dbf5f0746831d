//! Builds a fulcrum lattice over a particle cloud and scores it with the
//! growth-model likelihood.

use lipdf::grid::{build_grid, evaluate_fulcrums, NeighborQuery};
use lipdf::models::ugm::Ugm1d;
use lipdf::{GridSpec, ParticleEnsemble};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lipdf::Result<()> {
    let model = Ugm1d::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cloud = ParticleEnsemble::sample(1, 200, &mut rng, |r, row| row[0] = 3.0 + model.sample_initial(r))?;

    let spec = GridSpec::fixed(vec![0], 10, 1.0);
    let mut grid = build_grid(&cloud, &spec, &[0.0])?;
    let calls = evaluate_fulcrums(&mut grid, &model, &[0.6])?;
    println!(
        "{} fulcrums over [{:.3}, {:.3}], {calls} model calls",
        grid.len(),
        grid.bounds()[0].lo,
        grid.bounds()[0].hi
    );
    for (x, l) in grid.points().zip(grid.likelihoods().unwrap()) {
        println!("  x {:>8.3}  likelihood {l:.5}", x[0]);
    }

    let (near, _) = grid.nearest_fulcrums(&[3.2], NeighborQuery::Count(3))?;
    for nb in near {
        println!("near 3.2: fulcrum {} at distance {:.3}", nb.index, nb.distance);
    }
    Ok(())
}
