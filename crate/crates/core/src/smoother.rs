//! Nadaraya-Watson inference of particle likelihoods from scored fulcrums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FulcrumGrid, Neighbor, NeighborQuery};
use crate::ssm::ParticleEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// Constant weight over the `neighbors` nearest fulcrums.
    NearestNeighbor,
    /// Weight `h / distance` for fulcrums within the bandwidth `h`.
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub kernel: Kernel,
    /// Neighbor count for the nearest-neighbor kernel.
    pub neighbors: usize,
    /// Bandwidth `h`. `None` means 1.5 times the largest grid spacing.
    pub bandwidth: Option<f64>,
    pub clamp_negative: bool,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self { kernel: Kernel::NearestNeighbor, neighbors: 4, bandwidth: None, clamp_negative: true }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors == 0 {
            return Err(Error::config("smoother.neighbors", "must be >= 1"));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0) {
                return Err(Error::config("smoother.bandwidth", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Bandwidth to use on `grid`.
    pub fn bandwidth_for(&self, grid: &FulcrumGrid) -> f64 {
        self.bandwidth.unwrap_or_else(|| {
            let s = 1.5 * grid.max_spacing();
            if s > 0.0 {
                s
            } else {
                f64::MIN_POSITIVE
            }
        })
    }

    fn query(&self, bandwidth: f64) -> NeighborQuery {
        match self.kernel {
            Kernel::NearestNeighbor => NeighborQuery::Count(self.neighbors),
            Kernel::InverseDistance => NeighborQuery::Radius(bandwidth),
        }
    }
}

/// Kernel weight of a selected neighbor at `distance`. A zero distance under
/// the inverse-distance kernel is infinite; [`nw_estimate`] never asks for it.
pub fn kernel_weight(distance: f64, kernel: Kernel, bandwidth: f64) -> f64 {
    match kernel {
        Kernel::NearestNeighbor => bandwidth,
        Kernel::InverseDistance => {
            if distance <= bandwidth {
                bandwidth / distance
            } else {
                0.0
            }
        }
    }
}

/// A smoothed likelihood and whether it had to fall back to the nearest
/// fulcrum because every kernel weight vanished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NwEstimate {
    pub value: f64,
    pub fallback: bool,
}

/// Kernel-weighted average of neighbor likelihoods.
pub fn nw_estimate(neighbors: &[Neighbor], kernel: Kernel, bandwidth: f64, clamp_negative: bool) -> Result<NwEstimate> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument("no neighbors to smooth".into()));
    }
    let clamp = |v: f64| if clamp_negative { v.max(0.0) } else { v };

    if kernel == Kernel::InverseDistance {
        // pointwise exactness: a coincident fulcrum passes straight through
        if let Some(hit) = neighbors.iter().filter(|n| n.distance == 0.0).min_by_key(|n| n.index) {
            return Ok(NwEstimate { value: clamp(hit.likelihood), fallback: false });
        }
    }

    if kernel == Kernel::NearestNeighbor {
        // constant weights cancel; a plain mean avoids rounding through h
        let mean = neighbors.iter().map(|n| n.likelihood).sum::<f64>() / neighbors.len() as f64;
        return Ok(NwEstimate { value: clamp(mean), fallback: false });
    }

    let (mut num, mut den) = (0.0, 0.0);
    for n in neighbors {
        let k = kernel_weight(n.distance, kernel, bandwidth);
        num += k * n.likelihood;
        den += k;
    }
    if den > 0.0 && den.is_finite() {
        return Ok(NwEstimate { value: clamp(num / den), fallback: false });
    }
    let nearest = neighbors
        .iter()
        .min_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)))
        .expect("non-empty");
    Ok(NwEstimate { value: clamp(nearest.likelihood), fallback: true })
}

/// Per-particle likelihoods inferred from a scored grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Smoothed {
    pub values: Vec<f64>,
    /// Estimates that fell back to a single nearest fulcrum.
    pub fallbacks: usize,
}

/// Infers one likelihood per particle. Makes no model calls.
pub fn smooth_ensemble(ensemble: &ParticleEnsemble, grid: &FulcrumGrid, config: &SmootherConfig) -> Result<Smoothed> {
    smooth_points(ensemble.particles(), grid, config)
}

pub fn smooth_points<'a>(
    points: impl Iterator<Item = &'a [f64]>,
    grid: &FulcrumGrid,
    config: &SmootherConfig,
) -> Result<Smoothed> {
    config.validate()?;
    let bandwidth = config.bandwidth_for(grid);
    let query = config.query(bandwidth);
    let mut buf = Vec::new();
    let mut out = Smoothed::default();
    for p in points {
        let radius_fallback = grid.nearest_into(p, query, &mut buf)?;
        let est = nw_estimate(&buf, config.kernel, bandwidth, config.clamp_negative)?;
        out.fallbacks += usize::from(radius_fallback || est.fallback);
        out.values.push(est.value);
    }
    Ok(out)
}

/// The implicit Li-PDF: a closure over a scored grid.
#[derive(Debug, Clone)]
pub struct ImplicitLipdf {
    grid: FulcrumGrid,
    config: SmootherConfig,
    bandwidth: f64,
}

impl ImplicitLipdf {
    pub fn new(grid: FulcrumGrid, config: SmootherConfig) -> Result<Self> {
        config.validate()?;
        if grid.likelihoods().is_none() {
            return Err(Error::InvalidArgument("fulcrum likelihoods are not set".into()));
        }
        let bandwidth = config.bandwidth_for(&grid);
        Ok(Self { grid, config, bandwidth })
    }

    pub fn grid(&self) -> &FulcrumGrid {
        &self.grid
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let (neighbors, _) = self.grid.nearest_fulcrums(x, self.config.query(self.bandwidth))?;
        Ok(nw_estimate(&neighbors, self.config.kernel, self.bandwidth, self.config.clamp_negative)?.value)
    }
}
