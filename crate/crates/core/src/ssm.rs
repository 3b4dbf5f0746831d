//! State-space model abstraction and the weighted particle ensemble.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};

/// A point in state space. Dimension is fixed per model.
pub type StateVector = Vec<f64>;

/// One sensor reading.
pub type Observation = Vec<f64>;

/// Tolerance used to decide whether a weight vector is normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A discrete-time state-space model with a sampleable transition prior and a
/// pointwise likelihood.
///
/// Every stochastic method draws from the stream it is handed; models hold
/// no random state of their own.
pub trait StateSpaceModel {
    fn state_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    /// Draws `x_t ~ p(x_t | x_{t-1})` into `out`. `t` starts at 1.
    fn sample_transition<R: Rng + ?Sized>(&self, prev: &[f64], t: usize, rng: &mut R, out: &mut [f64]);

    /// `p(y | x)`; must be finite and non-negative for finite inputs.
    fn likelihood(&self, state: &[f64], y: &[f64]) -> f64;

    /// Draws a noisy observation of `state` into `out`.
    fn simulate_observation<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R, out: &mut [f64]);

    /// Writes the noiseless observation of `state` into `out` and returns
    /// `true`, or returns `false` when the model does not expose its map.
    fn observation_map(&self, _state: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Whether state coordinate `dim` is an angle wrapped to `[-pi, pi)`.
    fn is_circular(&self, _dim: usize) -> bool {
        false
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Outcome of [`normalize_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Normalized,
    /// The weights summed to zero and were reset to uniform.
    Degenerate,
}

impl Normalization {
    pub fn is_degenerate(self) -> bool {
        self == Normalization::Degenerate
    }
}

/// Normalizes `weights` in place so they sum to one.
///
/// An all-zero vector is reset to uniform weights and reported as
/// [`Normalization::Degenerate`] so the caller can surface it.
pub fn normalize_weights(weights: &mut [f64]) -> Normalization {
    let n = weights.len();
    if n == 0 {
        return Normalization::Normalized;
    }
    let sum: f64 = weights.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let inv = 1.0 / sum;
        weights.iter_mut().for_each(|w| *w *= inv);
        // a second pass absorbs the rounding of the first
        let resid: f64 = weights.iter().sum();
        if (resid - 1.0).abs() > NORMALIZATION_TOL {
            weights.iter_mut().for_each(|w| *w /= resid);
        }
        Normalization::Normalized
    } else {
        weights.fill(1.0 / n as f64);
        Normalization::Degenerate
    }
}

/// Checks the normalization contract: non-negative weights summing to one.
pub fn check_normalized(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Unnormalized { sum });
    }
    Ok(())
}

/// `1 / sum(w_i^2)` for normalized weights; lies in `[1, N]`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    check_normalized(weights)?;
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    Ok(1.0 / sum_sq)
}

/// Particles stored row-major (`N x dim`) with one weight per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    states: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// Builds an equally weighted ensemble from row-major states.
    pub fn new(dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.is_empty() || !states.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} state values do not form particles of dimension {dim}",
                states.len()
            )));
        }
        let n = states.len() / dim;
        Ok(Self { dim, states, weights: vec![1.0 / n as f64; n] })
    }

    /// Builds an ensemble with explicit (not necessarily normalized) weights.
    pub fn with_weights(dim: usize, states: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut ens = Self::new(dim, states)?;
        if weights.len() != ens.len() {
            return Err(Error::LengthMismatch { left: ens.len(), right: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid weight {w}")));
        }
        ens.weights = weights;
        Ok(ens)
    }

    /// Draws `n` equally weighted particles from `sampler`.
    pub fn sample<R, F>(dim: usize, n: usize, rng: &mut R, mut sampler: F) -> Result<Self>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R, &mut [f64]),
    {
        let mut states = vec![0.0; dim * n];
        for row in states.chunks_exact_mut(dim.max(1)) {
            sampler(rng, row);
        }
        Self::new(dim, states)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.dim)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [f64] {
        &mut self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// States and weights borrowed together, for in-place reweighting.
    pub fn split_mut(&mut self) -> (&[f64], &mut [f64]) {
        (&self.states, &mut self.weights)
    }

    /// Coordinate `dim` of every particle.
    pub fn coords(&self, dim: usize) -> impl Iterator<Item = f64> + '_ {
        self.particles().map(move |p| p[dim])
    }

    pub fn normalize(&mut self) -> Normalization {
        normalize_weights(&mut self.weights)
    }

    pub fn effective_sample_size(&self) -> Result<f64> {
        effective_sample_size(&self.weights)
    }

    pub fn set_uniform_weights(&mut self) {
        let n = self.len();
        self.weights.fill(1.0 / n as f64);
    }

    pub(crate) fn replace_states(&mut self, states: Vec<f64>) {
        debug_assert_eq!(states.len(), self.states.len());
        self.states = states;
    }

    /// Weighted mean `sum_i w_i x_i`, coordinate by coordinate.
    pub fn weighted_mean(&self) -> StateVector {
        let mut mean = vec![0.0; self.dim];
        for (p, &w) in self.particles().zip(&self.weights) {
            for (m, &x) in mean.iter_mut().zip(p) {
                *m += w * x;
            }
        }
        mean
    }

    /// Weighted mean with circular averaging on the coordinates flagged by
    /// `circular`.
    pub fn weighted_mean_with(&self, circular: impl Fn(usize) -> bool) -> StateVector {
        let mut mean = self.weighted_mean();
        for (d, m) in mean.iter_mut().enumerate() {
            if circular(d) {
                *m = self.circular_mean(d);
            }
        }
        mean
    }

    /// Point estimate honoring the model's angular coordinates.
    pub fn estimate<M: StateSpaceModel>(&self, model: &M) -> StateVector {
        self.weighted_mean_with(|d| model.is_circular(d))
    }

    /// Weighted circular mean of an angular coordinate.
    pub fn circular_mean(&self, dim: usize) -> f64 {
        let (s, c) =
            self.coords(dim).zip(&self.weights).fold((0.0, 0.0), |(s, c), (a, &w)| (s + w * a.sin(), c + w * a.cos()));
        if s == 0.0 && c == 0.0 {
            0.0
        } else {
            wrap_angle(s.atan2(c))
        }
    }

    /// Weighted standard deviation of one coordinate.
    pub fn weighted_std(&self, dim: usize) -> f64 {
        let mean: f64 = self.coords(dim).zip(&self.weights).map(|(x, w)| w * x).sum();
        let var: f64 = self.coords(dim).zip(&self.weights).map(|(x, w)| w * (x - mean) * (x - mean)).sum();
        var.max(0.0).sqrt()
    }
}

/// Wraps a model and counts its likelihood and observation calls.
#[derive(Debug, Default)]
pub struct CountingModel<M> {
    pub inner: M,
    likelihood_calls: AtomicU64,
    observation_calls: AtomicU64,
}

impl<M> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self { inner, likelihood_calls: AtomicU64::new(0), observation_calls: AtomicU64::new(0) }
    }

    pub fn likelihood_calls(&self) -> u64 {
        self.likelihood_calls.load(Ordering::Relaxed)
    }

    /// Noiseless-map and simulated-observation calls.
    pub fn observation_calls(&self) -> u64 {
        self.observation_calls.load(Ordering::Relaxed)
    }

    pub fn total_calls(&self) -> u64 {
        self.likelihood_calls() + self.observation_calls()
    }

    pub fn reset(&self) {
        self.likelihood_calls.store(0, Ordering::Relaxed);
        self.observation_calls.store(0, Ordering::Relaxed);
    }
}

impl<M: StateSpaceModel> StateSpaceModel for CountingModel<M> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn sample_transition<R: Rng + ?Sized>(&self, prev: &[f64], t: usize, rng: &mut R, out: &mut [f64]) {
        self.inner.sample_transition(prev, t, rng, out)
    }

    fn likelihood(&self, state: &[f64], y: &[f64]) -> f64 {
        self.likelihood_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.likelihood(state, y)
    }

    fn simulate_observation<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R, out: &mut [f64]) {
        self.observation_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.simulate_observation(state, rng, out)
    }

    fn observation_map(&self, state: &[f64], out: &mut [f64]) -> bool {
        let exposed = self.inner.observation_map(state, out);
        if exposed {
            self.observation_calls.fetch_add(1, Ordering::Relaxed);
        }
        exposed
    }

    fn is_circular(&self, dim: usize) -> bool {
        self.inner.is_circular(dim)
    }
}

/// `sum_i w_i x_i` for a normalized ensemble.
pub fn weighted_mean_estimate(ensemble: &ParticleEnsemble) -> StateVector {
    ensemble.weighted_mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn normalizes_equal_weights() {
        let mut w = vec![2.0, 2.0];
        assert_eq!(normalize_weights(&mut w), Normalization::Normalized);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn normalizes_identity_case() {
        let mut w = vec![1.0, 0.0, 0.0];
        normalize_weights(&mut w);
        assert_eq!(w, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let mut w = vec![0.0, 0.0];
        assert!(normalize_weights(&mut w).is_degenerate());
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn ess_examples() {
        assert_abs_diff_eq!(effective_sample_size(&[0.25; 4]).unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(effective_sample_size(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(effective_sample_size(&[0.5, 0.25, 0.25]).unwrap(), 1.0 / 0.375, epsilon = 1e-12);
    }

    #[test]
    fn ess_rejects_unnormalized_weights() {
        assert!(matches!(effective_sample_size(&[1.0, 1.0]), Err(Error::Unnormalized { .. })));
    }

    #[test]
    fn weighted_mean_examples() {
        let ens = ParticleEnsemble::with_weights(1, vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(weighted_mean_estimate(&ens), vec![2.0]);
        let ens = ParticleEnsemble::new(1, vec![7.5]).unwrap();
        assert_eq!(weighted_mean_estimate(&ens), vec![7.5]);
        let ens = ParticleEnsemble::with_weights(1, vec![0.0, 10.0], vec![0.9, 0.1]).unwrap();
        assert_abs_diff_eq!(weighted_mean_estimate(&ens)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn circular_mean_straddles_the_cut() {
        let ens = ParticleEnsemble::new(1, vec![PI - 0.1, -PI + 0.1]).unwrap();
        let m = ens.circular_mean(0);
        assert!((m.abs() - PI).abs() < 1e-9, "{m}");
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-1e-18), -1e-18);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(w in prop::collection::vec(0.0f64..10.0, 1..50)) {
            let mut once = w.clone();
            normalize_weights(&mut once);
            let mut twice = once.clone();
            normalize_weights(&mut twice);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
            prop_assert!((once.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOL);
        }

        #[test]
        fn normalization_preserves_proportions(w in prop::collection::vec(0.01f64..10.0, 2..30)) {
            let mut n = w.clone();
            normalize_weights(&mut n);
            for i in 1..w.len() {
                prop_assert!((n[i] / n[0] - w[i] / w[0]).abs() <= 1e-9 * (w[i] / w[0]).max(1.0));
            }
        }

        #[test]
        fn ess_is_permutation_invariant(
            w in prop::collection::vec(0.0f64..10.0, 1..40),
            rot in 0usize..40,
        ) {
            let mut a = w.clone();
            if normalize_weights(&mut a).is_degenerate() {
                return Ok(());
            }
            let mut b = a.clone();
            let k = rot % b.len();
            b.rotate_left(k);
            b.reverse();
            let (ea, eb) = (effective_sample_size(&a).unwrap(), effective_sample_size(&b).unwrap());
            prop_assert!((ea - eb).abs() <= 1e-9 * ea);
            prop_assert!(ea >= 1.0 - 1e-9 && ea <= a.len() as f64 + 1e-9);
        }
    }
}
