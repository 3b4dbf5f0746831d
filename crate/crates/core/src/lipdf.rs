//! The Li-PDF particle filter: weights come from a likelihood surface fitted
//! over a small fulcrum lattice instead of one model call per particle.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{bootstrap_update, check_likelihood, weight_by_model, FilterStepReport, PhaseTimings};
use crate::fit::{gaussian_density, least_squares_fit, Basis, FitResult};
use crate::grid::{build_grid, evaluate_fulcrums, FulcrumGrid, GridSpec};
use crate::resample::ResamplePolicy;
use crate::smoother::{smooth_ensemble, SmootherConfig};
use crate::ssm::{ParticleEnsemble, StateSpaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Fit the observation map on the fulcrums, then compose a Gaussian.
    Explicit,
    /// Kernel-smooth fulcrum likelihoods onto the particles.
    Implicit,
    /// Fit the observation map once and reuse it.
    Batch,
}

/// Where the explicit and batch fits get their fulcrum observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FulcrumObservations {
    /// The noiseless map when the model exposes one, else a simulated draw.
    #[default]
    Auto,
    Noiseless,
    /// One simulated noisy observation per fulcrum.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Activation {
    /// `false` pins the filter to direct per-particle likelihoods.
    pub enabled: bool,
    /// Steps `t <= warmup_steps` always use direct likelihoods.
    pub warmup_steps: usize,
    /// Per active dimension: the weighted std must be below this value.
    /// `None` skips the spread test.
    pub spread_threshold: Option<Vec<f64>>,
}

impl Default for Activation {
    fn default() -> Self {
        Self { enabled: true, warmup_steps: 0, spread_threshold: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchOptions {
    /// Lattice size for the one-off fit.
    pub samples: usize,
    /// Step at which the fit is made.
    pub fit_step: usize,
    /// Refit period in steps; `None` never refits.
    pub refit_every: Option<usize>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { samples: 100, fit_step: 1, refit_every: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipdfConfig {
    pub variant: Variant,
    pub grid: GridSpec,
    /// Basis for the explicit and batch fits.
    pub basis: Basis,
    /// Observation noise std used when composing the Gaussian.
    pub sigma: f64,
    pub smoother: SmootherConfig,
    pub activation: Activation,
    /// Fulcrum-to-particle ratio band outside which a warning is raised.
    pub ratio_band: (f64, f64),
    pub resample: ResamplePolicy,
    pub fulcrum_observations: FulcrumObservations,
    pub batch: BatchOptions,
}

impl LipdfConfig {
    pub fn new(variant: Variant, grid: GridSpec) -> Self {
        Self {
            variant,
            grid,
            basis: Basis::Monomial { power: 2 },
            sigma: 1.0,
            smoother: SmootherConfig::default(),
            activation: Activation::default(),
            ratio_band: (0.2, 0.5),
            resample: ResamplePolicy::default(),
            fulcrum_observations: FulcrumObservations::Auto,
            batch: BatchOptions::default(),
        }
    }

    pub fn validate<M: StateSpaceModel>(&self, model: &M) -> Result<()> {
        self.grid.validate(model.state_dim())?;
        if !(self.sigma > 0.0) {
            return Err(Error::config("lipdf.sigma", "must be > 0"));
        }
        self.smoother.validate()?;
        if !(self.ratio_band.0 <= self.ratio_band.1) {
            return Err(Error::config("lipdf.ratio_band", "low must not exceed high"));
        }
        if self.variant != Variant::Implicit {
            if self.grid.active_dims.len() != 1 || model.obs_dim() != 1 {
                return Err(Error::config(
                    "lipdf.variant",
                    "explicit and batch fits need one partitioned dimension and a scalar observation",
                ));
            }
            if self.variant == Variant::Batch && self.batch.samples < self.basis.order() + 1 {
                return Err(Error::config("lipdf.batch.samples", "fewer samples than basis functions"));
            }
        }
        if let Some(th) = &self.activation.spread_threshold {
            if th.len() != 1 && th.len() != self.grid.active_dims.len() {
                return Err(Error::config(
                    "lipdf.activation.spread_threshold",
                    "needs one entry or one per active dimension",
                ));
            }
        }
        Ok(())
    }
}

/// Whether the fitted likelihood replaces direct evaluation at step `t`.
pub fn should_activate(ensemble: &ParticleEnsemble, config: &LipdfConfig, t: usize) -> bool {
    let act = &config.activation;
    if !act.enabled || t <= act.warmup_steps {
        return false;
    }
    let Some(th) = &act.spread_threshold else {
        return true;
    };
    config
        .grid
        .active_dims
        .iter()
        .enumerate()
        .all(|(l, &d)| ensemble.weighted_std(d) < th[if th.len() == 1 { 0 } else { l }])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipdfStepReport {
    pub base: FilterStepReport,
    pub lipdf_active: bool,
    /// Fulcrums scored this step (0 when inactive or reusing a batch fit).
    pub fulcrum_count: usize,
    pub model_likelihood_calls: u64,
    pub fit_rms_residual: Option<f64>,
    /// Particle likelihoods that came out negative and were set to zero.
    pub clamped_count: usize,
    /// Kernel estimates that fell back to a single nearest fulcrum.
    pub smoother_fallbacks: usize,
    /// Fulcrum-to-particle ratio left the configured band.
    pub ratio_warning: bool,
    /// The lattice exceeded its size cap; the step used direct likelihoods.
    pub grid_refused: bool,
}

/// Stateful Li-PDF filter. Holds the cached batch fit.
#[derive(Debug, Clone)]
pub struct LipdfFilter {
    config: LipdfConfig,
    batch_fit: Option<FitResult>,
    batch_fitted_at: Option<usize>,
    known_fit: bool,
}

impl LipdfFilter {
    pub fn new(config: LipdfConfig) -> Self {
        Self { config, batch_fit: None, batch_fitted_at: None, known_fit: false }
    }

    /// A batch filter that uses `fit` as an exactly known observation map
    /// and never fits.
    pub fn with_known_map(mut config: LipdfConfig, fit: FitResult) -> Self {
        config.variant = Variant::Batch;
        Self { config, batch_fit: Some(fit), batch_fitted_at: Some(0), known_fit: true }
    }

    pub fn config(&self) -> &LipdfConfig {
        &self.config
    }

    pub fn batch_fit(&self) -> Option<&FitResult> {
        self.batch_fit.as_ref()
    }

    fn batch_needs_fit(&self, t: usize) -> bool {
        if self.known_fit {
            return false;
        }
        match (self.batch_fitted_at, self.config.batch.refit_every) {
            (None, _) => t >= self.config.batch.fit_step,
            (Some(at), Some(every)) => every > 0 && t >= at + every,
            (Some(_), None) => false,
        }
    }

    /// One iteration: selective resample, predict, then weight either
    /// through the fitted likelihood or, when inactive, directly.
    pub fn step<M, R>(
        &mut self,
        ensemble: &mut ParticleEnsemble,
        model: &M,
        y: &[f64],
        t: usize,
        rng: &mut R,
    ) -> Result<LipdfStepReport>
    where
        M: StateSpaceModel,
        R: Rng + ?Sized,
    {
        let start = Instant::now();
        let mut timings = PhaseTimings::default();
        let n = ensemble.len();
        let (resampled, _) = bootstrap_update(ensemble, model, y, t, &self.config.resample, rng, &mut timings, false)?;

        let mut report = LipdfStepReport {
            base: FilterStepReport {
                estimate: Vec::new(),
                ess: 0.0,
                resampled,
                degeneracy_flag: false,
                jitter_flag: false,
                likelihood_calls: 0,
                timings,
                wall_time_total: Default::default(),
            },
            lipdf_active: false,
            fulcrum_count: 0,
            model_likelihood_calls: 0,
            fit_rms_residual: None,
            clamped_count: 0,
            smoother_fallbacks: 0,
            ratio_warning: false,
            grid_refused: false,
        };

        let mut active = should_activate(ensemble, &self.config, t);
        if self.config.variant == Variant::Batch {
            if active && self.batch_needs_fit(t) {
                match self.fit_batch(ensemble, model, t, rng, &mut report) {
                    Ok(()) => {}
                    Err(Error::GridTooLarge { .. }) => report.grid_refused = true,
                    Err(e) => return Err(e),
                }
            }
            active &= self.batch_fit.is_some();
        }

        if active {
            match self.weight_by_lipdf(ensemble, model, y, rng, &mut report) {
                Ok(()) => report.lipdf_active = true,
                Err(Error::GridTooLarge { .. }) => report.grid_refused = true,
                Err(e) => return Err(e),
            }
        }
        if !report.lipdf_active {
            let clock = Instant::now();
            report.model_likelihood_calls += weight_by_model(ensemble, model, y)?;
            report.base.timings.update += clock.elapsed();
        }

        if report.fulcrum_count > 0 {
            let ratio = report.fulcrum_count as f64 / n as f64;
            report.ratio_warning = ratio < self.config.ratio_band.0 || ratio > self.config.ratio_band.1;
        }
        report.base.degeneracy_flag = ensemble.normalize().is_degenerate();
        report.base.estimate = ensemble.estimate(model);
        report.base.ess = ensemble.effective_sample_size()?;
        report.base.likelihood_calls = report.model_likelihood_calls;
        report.base.wall_time_total = start.elapsed();
        Ok(report)
    }

    fn pinned_state<M: StateSpaceModel>(ensemble: &ParticleEnsemble, model: &M) -> Vec<f64> {
        ensemble.estimate(model)
    }

    /// Fulcrum observations for a scalar-observation model.
    fn observe_fulcrums<M, R>(&self, grid: &FulcrumGrid, model: &M, rng: &mut R) -> Result<Vec<(f64, f64)>>
    where
        M: StateSpaceModel,
        R: Rng + ?Sized,
    {
        let d = grid.active_dims()[0];
        let mode = self.config.fulcrum_observations;
        let mut obs = [0.0];
        let mut out = Vec::with_capacity(grid.len());
        for p in grid.points() {
            let mapped = mode != FulcrumObservations::Simulated && model.observation_map(p, &mut obs);
            if !mapped {
                if mode == FulcrumObservations::Noiseless {
                    return Err(Error::config(
                        "lipdf.fulcrum_observations",
                        "the model exposes no noiseless observation map",
                    ));
                }
                model.simulate_observation(p, rng, &mut obs);
            }
            out.push((p[d], obs[0]));
        }
        Ok(out)
    }

    fn fit_batch<M, R>(
        &mut self,
        ensemble: &ParticleEnsemble,
        model: &M,
        t: usize,
        rng: &mut R,
        report: &mut LipdfStepReport,
    ) -> Result<()>
    where
        M: StateSpaceModel,
        R: Rng + ?Sized,
    {
        let clock = Instant::now();
        let mut spec = self.config.grid.clone();
        let d = spec.active_dims[0];
        if spec.count_override.len() <= d {
            spec.count_override.resize(d + 1, None);
        }
        spec.count_override[d] = Some(self.config.batch.samples);
        let grid = build_grid(ensemble, &spec, &Self::pinned_state(ensemble, model))?;
        let points = self.observe_fulcrums(&grid, model, rng)?;
        let fit = least_squares_fit(&points, &self.config.basis)?;
        report.fit_rms_residual = Some(fit.rms_residual);
        report.fulcrum_count = points.len();
        report.model_likelihood_calls += points.len() as u64;
        self.batch_fit = Some(fit);
        self.batch_fitted_at = Some(t);
        report.base.timings.fit += clock.elapsed();
        Ok(())
    }

    fn weight_by_lipdf<M, R>(
        &self,
        ensemble: &mut ParticleEnsemble,
        model: &M,
        y: &[f64],
        rng: &mut R,
        report: &mut LipdfStepReport,
    ) -> Result<()>
    where
        M: StateSpaceModel,
        R: Rng + ?Sized,
    {
        match self.config.variant {
            Variant::Batch => {
                let clock = Instant::now();
                let fit = self.batch_fit.as_ref().expect("batch fit present when active");
                let d = self.config.grid.active_dims[0];
                report.clamped_count += apply_composed(ensemble, fit, d, y[0], self.config.sigma)?;
                report.base.timings.update += clock.elapsed();
            }
            Variant::Explicit => {
                let clock = Instant::now();
                let grid = build_grid(ensemble, &self.config.grid, &Self::pinned_state(ensemble, model))?;
                let points = self.observe_fulcrums(&grid, model, rng)?;
                let fit = least_squares_fit(&points, &self.config.basis)?;
                report.fulcrum_count = grid.len();
                report.model_likelihood_calls += grid.len() as u64;
                report.fit_rms_residual = Some(fit.rms_residual);
                report.base.timings.fit += clock.elapsed();

                let clock = Instant::now();
                let d = grid.active_dims()[0];
                report.clamped_count += apply_composed(ensemble, &fit, d, y[0], self.config.sigma)?;
                report.base.timings.update += clock.elapsed();
            }
            Variant::Implicit => {
                let clock = Instant::now();
                let mut grid = build_grid(ensemble, &self.config.grid, &Self::pinned_state(ensemble, model))?;
                report.model_likelihood_calls += evaluate_fulcrums(&mut grid, model, y)?;
                report.fulcrum_count = grid.len();
                report.base.timings.fit += clock.elapsed();

                let clock = Instant::now();
                let smoother = SmootherConfig { clamp_negative: false, ..self.config.smoother };
                let smoothed = smooth_ensemble(ensemble, &grid, &smoother)?;
                report.smoother_fallbacks = smoothed.fallbacks;
                report.clamped_count += apply_likelihoods(ensemble, &smoothed.values)?;
                report.base.timings.update += clock.elapsed();
            }
        }
        Ok(())
    }
}

/// Multiplies weights by clamped likelihoods; returns how many were negative.
fn apply_likelihoods(ensemble: &mut ParticleEnsemble, values: &[f64]) -> Result<usize> {
    let mut clamped = 0;
    for (i, (w, &v)) in ensemble.weights_mut().iter_mut().zip(values).enumerate() {
        let v = if v < 0.0 {
            clamped += 1;
            0.0
        } else {
            v
        };
        *w *= check_likelihood(i, v)?;
    }
    Ok(clamped)
}

/// Weights particles by the Gaussian composed with `fit` on coordinate `d`.
fn apply_composed(ensemble: &mut ParticleEnsemble, fit: &FitResult, d: usize, y: f64, sigma: f64) -> Result<usize> {
    let dim = ensemble.dim();
    let (states, weights) = ensemble.split_mut();
    let mut clamped = 0;
    for (i, (p, w)) in states.chunks_exact(dim).zip(weights.iter_mut()).enumerate() {
        let l = gaussian_density(y - fit.value(p[d]), sigma);
        let l = if l < 0.0 {
            clamped += 1;
            0.0
        } else {
            l
        };
        *w *= check_likelihood(i, l)?;
    }
    Ok(clamped)
}
