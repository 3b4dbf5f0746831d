//! Fits the quadratic observation map from noisy samples, turns the fit
//! into a likelihood, and fits a piecewise cubic to a curve no polynomial
//! matches globally.

use lipdf::fit::{compose_gaussian_likelihood, equal_width_joins, least_squares_fit, piecewise_fit};
use lipdf::harness::runners::linspace;
use lipdf::models::ugm::{ugm_likelihood, ugm_observe};
use lipdf::Basis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> lipdf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<(f64, f64)> =
        linspace(-20.0, 20.0, 30).into_iter().map(|x| (x, ugm_observe(x, StandardNormal.sample(&mut rng)))).collect();

    for basis in [Basis::trinomial(), Basis::Monomial { power: 2 }] {
        let fit = least_squares_fit(&points, &basis)?;
        println!("{:<12} coefficients {:.5?}  rms residual {:.4}", basis.label(), fit.coefficients, fit.rms_residual);
    }

    let fit = least_squares_fit(&points, &Basis::Monomial { power: 2 })?;
    let lik = compose_gaussian_likelihood(fit, 5.0, 1.0)?;
    for x in [-10.0, -5.0, 0.0, 5.0, 10.0] {
        println!("x {x:>6.1}: fitted likelihood {:.5}, exact {:.5}", lik.eval(x), ugm_likelihood(x, 5.0));
    }

    let wave: Vec<(f64, f64)> = linspace(0.0, 6.0, 120).into_iter().map(|x| (x, x.sin() * (-0.3 * x).exp())).collect();
    for r in [1, 2, 4, 8] {
        let pw = piecewise_fit(&wave, &Basis::Polynomial { degree: 3 }, &equal_width_joins(0.0, 6.0, r))?;
        let worst = wave.iter().map(|&(x, y)| (pw.value(x) - y).abs()).fold(0.0, f64::max);
        println!("{r} cubic segments: max error {worst:.2e}");
    }
    Ok(())
}
