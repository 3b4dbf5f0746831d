//! Unbiased resampling schemes.
//!
//! Both schemes return ancestor indices in ascending order; the expected
//! number of copies of particle `i` is `N * w_i`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ssm::{check_normalized, ParticleEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampler {
    #[default]
    Systematic,
    Residual,
}

/// When and how a filter resamples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResamplePolicy {
    pub scheme: Resampler,
    /// Resample when `ESS / N` drops below this fraction.
    pub ess_threshold: f64,
}

impl Default for ResamplePolicy {
    fn default() -> Self {
        Self { scheme: Resampler::Systematic, ess_threshold: 0.5 }
    }
}

impl ResamplePolicy {
    pub fn should_resample(&self, ess: f64, n: usize) -> bool {
        ess / (n as f64) < self.ess_threshold
    }
}

/// Systematic resampling with offset `u0 in [0, 1)`: stratum `i` sits at
/// `(u0 + i) / n_out` on the weight CDF.
pub fn systematic_indices(weights: &[f64], n_out: usize, u0: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(n_out);
    if weights.is_empty() || n_out == 0 {
        return out;
    }
    let total: f64 = weights.iter().sum();
    let last = weights.len() - 1;
    let step = total / n_out as f64;
    let mut cdf = weights[0];
    let mut j = 0;
    for i in 0..n_out {
        let u = (u0 + i as f64) * step;
        while u >= cdf && j < last {
            j += 1;
            cdf += weights[j];
        }
        out.push(j);
    }
    out
}

/// Residual resampling: `floor(n_out * w_i)` deterministic copies, the
/// remainder drawn systematically (offset `u0`) from the residual weights.
pub fn residual_indices(weights: &[f64], n_out: usize, u0: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(n_out);
    let mut residual = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let expected = w * n_out as f64;
        let copies = expected.floor() as usize;
        out.extend(std::iter::repeat_n(i, copies));
        residual.push((expected - copies as f64).max(0.0));
    }
    out.truncate(n_out);
    let remaining = n_out - out.len();
    if remaining > 0 {
        out.extend(systematic_indices(&residual, remaining, u0));
        out.sort_unstable();
    }
    out
}

/// Number of offspring per particle for a list of ancestor indices.
pub fn offspring_counts(indices: &[usize], n: usize) -> Vec<usize> {
    let mut counts = vec![0; n];
    for &i in indices {
        counts[i] += 1;
    }
    counts
}

impl Resampler {
    pub fn indices(self, weights: &[f64], n_out: usize, u0: f64) -> Vec<usize> {
        match self {
            Resampler::Systematic => systematic_indices(weights, n_out, u0),
            Resampler::Residual => residual_indices(weights, n_out, u0),
        }
    }

    /// Resamples `ensemble` in place, leaving uniform weights. Returns the
    /// ancestor indices.
    pub fn resample<R: Rng + ?Sized>(self, ensemble: &mut ParticleEnsemble, rng: &mut R) -> Result<Vec<usize>> {
        check_normalized(ensemble.weights())?;
        let u0: f64 = rng.random();
        let n = ensemble.len();
        let idx = self.indices(ensemble.weights(), n, u0);
        let dim = ensemble.dim();
        let mut states = Vec::with_capacity(n * dim);
        for &i in &idx {
            states.extend_from_slice(ensemble.particle(i));
        }
        ensemble.replace_states(states);
        ensemble.set_uniform_weights();
        Ok(idx)
    }
}

pub fn systematic_resample<R: Rng + ?Sized>(ensemble: &mut ParticleEnsemble, rng: &mut R) -> Result<Vec<usize>> {
    Resampler::Systematic.resample(ensemble, rng)
}

pub fn residual_resample<R: Rng + ?Sized>(ensemble: &mut ParticleEnsemble, rng: &mut R) -> Result<Vec<usize>> {
    Resampler::Residual.resample(ensemble, rng)
}
