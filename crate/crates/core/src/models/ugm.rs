//! The univariate nonstationary growth model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::gaussian_density;
use crate::ssm::StateSpaceModel;

/// Coefficient of the quadratic observation map.
pub const OBS_GAIN: f64 = 0.05;

/// Deterministic part of the transition plus additive noise `u`.
pub fn ugm_transition(x: f64, t: usize, u: f64) -> f64 {
    x / 2.0 + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * (t as f64 - 1.0)).cos() + u
}

pub fn ugm_observe(x: f64, v: f64) -> f64 {
    OBS_GAIN * (x * x) + v
}

/// Unit-variance Gaussian likelihood of `y` given `x`.
pub fn ugm_likelihood(x: f64, y: f64) -> f64 {
    gaussian_density(y - ugm_observe(x, 0.0), 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ugm1d {
    pub process_var: f64,
    pub obs_var: f64,
    /// Variance of the zero-mean Gaussian the truth and the particles start from.
    pub initial_var: f64,
}

impl Default for Ugm1d {
    fn default() -> Self {
        Self { process_var: 10.0, obs_var: 1.0, initial_var: 5.0 }
    }
}

impl Ugm1d {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("model.process_var", self.process_var),
            ("model.obs_var", self.obs_var),
            ("model.initial_var", self.initial_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a positive finite number"));
            }
        }
        Ok(())
    }

    pub fn obs_sigma(&self) -> f64 {
        self.obs_var.sqrt()
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.initial_var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}

impl StateSpaceModel for Ugm1d {
    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample_transition<R: Rng + ?Sized>(&self, prev: &[f64], t: usize, rng: &mut R, out: &mut [f64]) {
        let u = self.process_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        out[0] = ugm_transition(prev[0], t, u);
    }

    fn likelihood(&self, state: &[f64], y: &[f64]) -> f64 {
        gaussian_density(y[0] - ugm_observe(state[0], 0.0), self.obs_sigma())
    }

    fn simulate_observation<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R, out: &mut [f64]) {
        let v = self.obs_sigma() * rng.sample::<f64, _>(StandardNormal);
        out[0] = ugm_observe(state[0], v);
    }

    fn observation_map(&self, state: &[f64], out: &mut [f64]) -> bool {
        out[0] = ugm_observe(state[0], 0.0);
        true
    }
}
