//! Bootstrap (SIR) and Gaussian particle filters.
//!
//! Both use the transition prior as proposal, so the weight update reduces
//! to multiplying by the observation likelihood.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::resample::ResamplePolicy;
use crate::ssm::{wrap_angle, ParticleEnsemble, StateSpaceModel, StateVector};

/// Wall-clock time spent in each phase of one filter step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub resample: Duration,
    pub predict: Duration,
    /// Likelihood evaluation and weighting.
    pub update: Duration,
    /// Fulcrum construction and fitting (Li-PDF only).
    pub fit: Duration,
}

impl PhaseTimings {
    pub fn sum(&self) -> Duration {
        self.resample + self.predict + self.update + self.fit
    }
}

impl std::ops::AddAssign for PhaseTimings {
    fn add_assign(&mut self, rhs: Self) {
        self.resample += rhs.resample;
        self.predict += rhs.predict;
        self.update += rhs.update;
        self.fit += rhs.fit;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterStepReport {
    pub estimate: StateVector,
    /// ESS of the posterior weights, before any moment-matching redraw.
    pub ess: f64,
    pub resampled: bool,
    /// The update zeroed every weight and the ensemble fell back to uniform.
    pub degeneracy_flag: bool,
    /// GPF only: covariance needed diagonal jitter.
    pub jitter_flag: bool,
    /// Model likelihood (or observation) evaluations made this step.
    pub likelihood_calls: u64,
    pub timings: PhaseTimings,
    pub wall_time_total: Duration,
}

impl FilterStepReport {
    /// Time spent turning an observation into weights, fitting included.
    pub fn wall_time_update(&self) -> Duration {
        self.timings.update + self.timings.fit
    }
}

/// Selective resampling: returns whether the ensemble was resampled.
pub(crate) fn maybe_resample<R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    policy: &ResamplePolicy,
    rng: &mut R,
) -> Result<bool> {
    let ess = ensemble.effective_sample_size()?;
    if policy.should_resample(ess, ensemble.len()) {
        policy.scheme.resample(ensemble, rng)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Pushes every particle through the transition prior.
pub(crate) fn propagate<M, R>(ensemble: &mut ParticleEnsemble, model: &M, t: usize, rng: &mut R)
where
    M: StateSpaceModel,
    R: Rng + ?Sized,
{
    let dim = ensemble.dim();
    let mut next = vec![0.0; ensemble.states().len()];
    for (prev, out) in ensemble.particles().zip(next.chunks_exact_mut(dim)) {
        model.sample_transition(prev, t, rng, out);
    }
    ensemble.replace_states(next);
}

pub(crate) fn check_likelihood(index: usize, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidLikelihood { index, value })
    }
}

/// Multiplies each weight by the model likelihood, one call per particle.
pub(crate) fn weight_by_model<M: StateSpaceModel>(
    ensemble: &mut ParticleEnsemble,
    model: &M,
    y: &[f64],
) -> Result<u64> {
    let dim = ensemble.dim();
    let n = ensemble.len();
    let (states, weights) = ensemble.split_mut();
    for (i, (p, w)) in states.chunks_exact(dim).zip(weights.iter_mut()).enumerate() {
        *w *= check_likelihood(i, model.likelihood(p, y))?;
    }
    Ok(n as u64)
}

/// Shared bootstrap step: selective resample, predict, weight by the model.
/// `lipdf` falls back to exactly this path when it is not active.
#[allow(clippy::too_many_arguments)]
pub(crate) fn bootstrap_update<M, R>(
    ensemble: &mut ParticleEnsemble,
    model: &M,
    y: &[f64],
    t: usize,
    policy: &ResamplePolicy,
    rng: &mut R,
    timings: &mut PhaseTimings,
    weigh: bool,
) -> Result<(bool, u64)>
where
    M: StateSpaceModel,
    R: Rng + ?Sized,
{
    let clock = Instant::now();
    let resampled = maybe_resample(ensemble, policy, rng)?;
    timings.resample = clock.elapsed();

    let clock = Instant::now();
    propagate(ensemble, model, t, rng);
    timings.predict = clock.elapsed();

    let mut calls = 0;
    if weigh {
        let clock = Instant::now();
        calls = weight_by_model(ensemble, model, y)?;
        timings.update = clock.elapsed();
    }
    Ok((resampled, calls))
}

/// One sampling-importance-resampling step. `t >= 1`.
pub fn sir_step<M, R>(
    ensemble: &mut ParticleEnsemble,
    model: &M,
    y: &[f64],
    t: usize,
    policy: &ResamplePolicy,
    rng: &mut R,
) -> Result<FilterStepReport>
where
    M: StateSpaceModel,
    R: Rng + ?Sized,
{
    let start = Instant::now();
    let mut timings = PhaseTimings::default();
    let (resampled, calls) = bootstrap_update(ensemble, model, y, t, policy, rng, &mut timings, true)?;
    let degenerate = ensemble.normalize().is_degenerate();
    let estimate = ensemble.estimate(model);
    let ess = ensemble.effective_sample_size()?;
    Ok(FilterStepReport {
        estimate,
        ess,
        resampled,
        degeneracy_flag: degenerate,
        jitter_flag: false,
        likelihood_calls: calls,
        timings,
        wall_time_total: start.elapsed(),
    })
}

/// One Gaussian particle filter step: predict, weight, then replace the
/// weighted ensemble by `N` equally weighted draws from its moment-matched
/// Gaussian. Never resamples.
pub fn gpf_step<M, R>(
    ensemble: &mut ParticleEnsemble,
    model: &M,
    y: &[f64],
    t: usize,
    rng: &mut R,
) -> Result<FilterStepReport>
where
    M: StateSpaceModel,
    R: Rng + ?Sized,
{
    let start = Instant::now();
    let mut timings = PhaseTimings::default();

    let clock = Instant::now();
    propagate(ensemble, model, t, rng);
    timings.predict = clock.elapsed();

    let clock = Instant::now();
    let calls = weight_by_model(ensemble, model, y)?;
    timings.update = clock.elapsed();

    let degenerate = ensemble.normalize().is_degenerate();
    let estimate = ensemble.estimate(model);
    let ess = ensemble.effective_sample_size()?;

    let clock = Instant::now();
    let jitter = redraw_gaussian(ensemble, model, &estimate, rng);
    timings.resample = clock.elapsed();

    Ok(FilterStepReport {
        estimate,
        ess,
        resampled: false,
        degeneracy_flag: degenerate,
        jitter_flag: jitter,
        likelihood_calls: calls,
        timings,
        wall_time_total: start.elapsed(),
    })
}

/// Weighted covariance about `mean` (no Bessel correction). Angular
/// coordinates use wrapped deviations.
pub fn weighted_covariance<M: StateSpaceModel>(ensemble: &ParticleEnsemble, model: &M, mean: &[f64]) -> Vec<f64> {
    let dim = ensemble.dim();
    let mut cov = vec![0.0; dim * dim];
    let mut dev = vec![0.0; dim];
    for (p, &w) in ensemble.particles().zip(ensemble.weights()) {
        for d in 0..dim {
            dev[d] = if model.is_circular(d) { wrap_angle(p[d] - mean[d]) } else { p[d] - mean[d] };
        }
        for r in 0..dim {
            for c in 0..=r {
                cov[r * dim + c] += w * dev[r] * dev[c];
            }
        }
    }
    for r in 0..dim {
        for c in 0..r {
            cov[c * dim + r] = cov[r * dim + c];
        }
    }
    cov
}

/// Lower Cholesky factor of a row-major symmetric matrix, or `None` when it
/// is not positive definite.
pub(crate) fn cholesky(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for r in 0..dim {
        for c in 0..=r {
            let mut s = a[r * dim + c];
            for k in 0..c {
                s -= l[r * dim + k] * l[c * dim + k];
            }
            if r == c {
                if !(s > 0.0) {
                    return None;
                }
                l[r * dim + c] = s.sqrt();
            } else {
                l[r * dim + c] = s / l[c * dim + c];
            }
        }
    }
    Some(l)
}

/// Replaces the ensemble with draws from `N(mean, cov)`; returns whether
/// jitter was needed.
fn redraw_gaussian<M, R>(ensemble: &mut ParticleEnsemble, model: &M, mean: &[f64], rng: &mut R) -> bool
where
    M: StateSpaceModel,
    R: Rng + ?Sized,
{
    let dim = ensemble.dim();
    let mut cov = weighted_covariance(ensemble, model, mean);
    let mut jitter = false;
    let factor = match cholesky(&cov, dim) {
        Some(l) => l,
        None => {
            jitter = true;
            let trace: f64 = (0..dim).map(|d| cov[d * dim + d]).sum();
            let eps = 1e-9 * trace / dim as f64;
            for d in 0..dim {
                cov[d * dim + d] += eps;
            }
            // a zero covariance stays singular; the draw collapses onto the mean
            cholesky(&cov, dim).unwrap_or_else(|| vec![0.0; dim * dim])
        }
    };

    let n = ensemble.len();
    let mut states = vec![0.0; n * dim];
    let mut z = vec![0.0; dim];
    for row in states.chunks_exact_mut(dim) {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for r in 0..dim {
            let offset: f64 = (0..=r).map(|c| factor[r * dim + c] * z[c]).sum();
            row[r] = mean[r] + offset;
            if model.is_circular(r) {
                row[r] = wrap_angle(row[r]);
            }
        }
    }
    ensemble.replace_states(states);
    ensemble.set_uniform_weights();
    jitter
}
