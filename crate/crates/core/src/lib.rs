//! Particle filtering with likelihoods inferred from a fitted fulcrum
//! lattice, alongside bootstrap and Gaussian baselines, two benchmark
//! systems and an experiment harness.
//!
//! The filters share one contract: every stochastic draw comes from the RNG
//! passed in, so a seed fixes a run bit for bit.


// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filters;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod lipdf;
pub mod metrics;
pub mod models;
pub mod resample;
pub mod smoother;
pub mod ssm;

pub use error::{Error, Result};
pub use filters::{gpf_step, sir_step, FilterStepReport, PhaseTimings};
pub use fit::{Basis, FitResult, PiecewiseFit};
pub use grid::{FulcrumGrid, GridSpec};
pub use lipdf::{LipdfConfig, LipdfFilter, LipdfStepReport, Variant};
pub use resample::{ResamplePolicy, Resampler};
pub use smoother::{Kernel, SmootherConfig};
pub use ssm::{CountingModel, ParticleEnsemble, StateSpaceModel};
