//! Infers a 2-D likelihood surface at off-lattice points from scored
//! fulcrums, with both kernels.

use lipdf::grid::{build_grid, evaluate_fulcrums};
use lipdf::smoother::ImplicitLipdf;
use lipdf::{GridSpec, Kernel, ParticleEnsemble, SmootherConfig, StateSpaceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Observes the distance to the origin with unit Gaussian noise.
struct Range;

impl StateSpaceModel for Range {
    fn state_dim(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn sample_transition<R: Rng + ?Sized>(&self, prev: &[f64], _t: usize, _rng: &mut R, out: &mut [f64]) {
        out.copy_from_slice(prev);
    }
    fn likelihood(&self, s: &[f64], y: &[f64]) -> f64 {
        let r = s[0].hypot(s[1]) - y[0];
        (-0.5 * r * r).exp()
    }
    fn simulate_observation<R: Rng + ?Sized>(&self, s: &[f64], _rng: &mut R, out: &mut [f64]) {
        out[0] = s[0].hypot(s[1]);
    }
}

fn main() -> lipdf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cloud = ParticleEnsemble::sample(2, 400, &mut rng, |r, row| {
        row[0] = r.random_range(-4.0..4.0);
        row[1] = r.random_range(-4.0..4.0);
    })?;
    let mut grid = build_grid(&cloud, &GridSpec::fixed(vec![0, 1], 12, 0.0), &[0.0, 0.0])?;
    let y = [2.5];
    evaluate_fulcrums(&mut grid, &Range, &y)?;

    for kernel in [Kernel::NearestNeighbor, Kernel::InverseDistance] {
        let cfg = SmootherConfig { kernel, ..SmootherConfig::default() };
        let surface = ImplicitLipdf::new(grid.clone(), cfg)?;
        let err: f64 =
            cloud.particles().map(|p| (surface.eval(p).unwrap() - Range.likelihood(p, &y)).abs()).sum::<f64>()
                / cloud.len() as f64;
        println!(
            "{kernel:?}: mean absolute error {err:.4} over {} particles from {} fulcrums",
            cloud.len(),
            grid.len()
        );
    }
    Ok(())
}
