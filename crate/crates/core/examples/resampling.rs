//! Offspring counts from systematic and residual resampling of one skewed
//! weight vector, averaged over many draws.

use lipdf::resample::offspring_counts;
use lipdf::Resampler;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let weights = [0.05, 0.1, 0.15, 0.2, 0.5];
    let n = weights.len();
    let reps = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for scheme in [Resampler::Systematic, Resampler::Residual] {
        let mut totals = vec![0usize; n];
        for _ in 0..reps {
            let idx = scheme.indices(&weights, n, rng.random::<f64>());
            for (t, c) in totals.iter_mut().zip(offspring_counts(&idx, n)) {
                *t += c;
            }
        }
        println!("{scheme:?}");
        for (w, t) in weights.iter().zip(&totals) {
            println!("  weight {w:.2}: mean offspring {:.4} (expected {:.2})", *t as f64 / reps as f64, w * n as f64);
        }
    }
}
