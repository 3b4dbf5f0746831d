//! Experiment configuration: a TOML file, then command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::Basis;
use crate::grid::GridSpec;
use crate::lipdf::{Activation, BatchOptions, FulcrumObservations, LipdfConfig, Variant};
use crate::models::ugm::Ugm1d;
use crate::resample::ResamplePolicy;
use crate::smoother::{Kernel, SmootherConfig};

/// Config schema version this build reads.
/// Default mcl lattice over (x, y, heading): 100 fulcrums.
pub const MCL_FULCRUM_COUNTS: [usize; 3] = [5, 5, 4];
/// Default mcl margin noise scale: about one step of motion noise.
pub const MCL_NOISE_SCALE: [f64; 3] = [0.04, 0.04, 0.0025];

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Bench1d,
    Mcl,
    FitDemo,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bench1d => "bench1d",
            Experiment::Mcl => "mcl",
            Experiment::FitDemo => "fit-demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    Sir,
    Gpf,
    Lipdf,
    LipdfBatch,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Sir => "sir",
            FilterKind::Gpf => "gpf",
            FilterKind::Lipdf => "lipdf",
            FilterKind::LipdfBatch => "lipdf-batch",
        }
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sir" => Ok(FilterKind::Sir),
            "gpf" => Ok(FilterKind::Gpf),
            "lipdf" => Ok(FilterKind::Lipdf),
            "lipdf-batch" => Ok(FilterKind::LipdfBatch),
            other => Err(Error::config("filter", format!("unknown filter `{other}`"))),
        }
    }
}

/// An inclusive integer range `start:end:step`. Written in config files the
/// same way as on the command line: `sweep = "particles=10:500:10"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sweep {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }

    /// Parses `particles=10:500:10`; `particles` is the only sweepable key.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |why: &str| Error::config("sweep", format!("`{spec}`: {why}"));
        let (key, range) = spec.split_once('=').ok_or_else(|| bad("expected key=start:end:step"))?;
        if key.trim() != "particles" {
            return Err(bad("only `particles` can be swept"));
        }
        let parts: Vec<&str> = range.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(bad("expected start:end:step"));
        };
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("bounds must be integers"));
        let sweep = Sweep { start: num(a)?, end: num(b)?, step: num(c)? };
        if sweep.start == 0 || sweep.step == 0 || sweep.end < sweep.start {
            return Err(bad("need 1 <= start <= end and step >= 1"));
        }
        Ok(sweep)
    }
}

impl TryFrom<String> for Sweep {
    type Error = Error;

    fn try_from(spec: String) -> Result<Self> {
        Sweep::parse(&spec)
    }
}

impl From<Sweep> for String {
    fn from(s: Sweep) -> Self {
        format!("particles={}:{}:{}", s.start, s.end, s.step)
    }
}

/// Li-PDF settings. Unset fields take experiment-specific defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipdfSection {
    pub variant: Option<Variant>,
    /// Points per partitioned dimension, default 10. Ignored when
    /// `auto_count` is set.
    pub fulcrums: Option<usize>,
    /// Points per active dimension, in `active_dims` order. Overrides
    /// `fulcrums`.
    pub fulcrum_counts: Option<Vec<usize>>,
    /// Size the lattice from the cloud width, margin and resolution.
    pub auto_count: Option<bool>,
    pub active_dims: Option<Vec<usize>>,
    pub margin_scale: Option<f64>,
    pub noise_scale: Option<Vec<f64>>,
    pub resolution: Option<f64>,
    pub max_points: Option<usize>,
    pub basis: Option<Basis>,
    pub sigma: Option<f64>,
    pub kernel: Option<Kernel>,
    pub neighbors: Option<usize>,
    pub bandwidth: Option<f64>,
    pub warmup_steps: Option<usize>,
    /// Per active dimension. Unset on mcl: 10% of the initial support.
    pub spread_threshold: Option<Vec<f64>>,
    pub enabled: Option<bool>,
    pub ratio_band: Option<[f64; 2]>,
    pub fulcrum_observations: Option<FulcrumObservations>,
    pub batch_samples: Option<usize>,
    pub batch_fit_step: Option<usize>,
    pub batch_refit_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MclSection {
    /// World file; unset uses the built-in world.
    pub world: Option<PathBuf>,
    pub rays: usize,
    /// Steps from which post-activation ED is averaged.
    pub score_from: usize,
}

impl Default for MclSection {
    fn default() -> Self {
        Self { world: None, rays: 36, score_from: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitDemoSection {
    pub sizes: Vec<usize>,
    /// Fulcrums are spread evenly over this interval.
    pub interval: [f64; 2],
    pub noisy: bool,
    /// Points of the dense evaluation grid in the curve output.
    pub dense_points: usize,
}

impl Default for FitDemoSection {
    fn default() -> Self {
        Self { sizes: vec![5, 10, 30, 50], interval: [-20.0, 20.0], noisy: true, dense_points: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub experiment: Experiment,
    #[serde(default = "default_filter")]
    pub filter: FilterKind,
    #[serde(default = "default_particles")]
    pub particles: usize,
    /// Time steps; bench1d defaults to 10000, mcl runs the whole route.
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub resample: ResamplePolicy,
    #[serde(default)]
    pub lipdf: LipdfSection,
    #[serde(default)]
    pub model: Ugm1d,
    #[serde(default)]
    pub mcl: MclSection,
    #[serde(default)]
    pub fit_demo: FitDemoSection,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_filter() -> FilterKind {
    FilterKind::Sir
}
fn default_particles() -> usize {
    200
}
fn default_trials() -> usize {
    20
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            version: CONFIG_VERSION,
            experiment,
            filter: default_filter(),
            particles: default_particles(),
            steps: None,
            trials: default_trials(),
            seed: 0,
            out: None,
            sweep: None,
            resample: ResamplePolicy::default(),
            lipdf: LipdfSection::default(),
            model: Ugm1d::default(),
            mcl: MclSection::default(),
            fit_demo: FitDemoSection::default(),
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        Ok(cfg)
    }

    /// Reads a config file. A relative `mcl.world` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        if let (Some(world), Some(dir)) = (&cfg.mcl.world, path.parent()) {
            if world.is_relative() {
                cfg.mcl.world = Some(dir.join(world));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        if self.particles == 0 {
            return Err(Error::config("particles", "must be >= 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if self.steps == Some(0) {
            return Err(Error::config("steps", "must be >= 1"));
        }
        if !(self.resample.ess_threshold >= 0.0 && self.resample.ess_threshold <= 1.0) {
            return Err(Error::config("resample.ess_threshold", "must lie in [0, 1]"));
        }
        if self.lipdf.fulcrums == Some(0) {
            return Err(Error::config("lipdf.fulcrums", "must be >= 1"));
        }
        if let Some(counts) = &self.lipdf.fulcrum_counts {
            if counts.contains(&0) {
                return Err(Error::config("lipdf.fulcrum_counts", "every count must be >= 1"));
            }
        }
        self.model.validate()?;
        if self.mcl.rays == 0 {
            return Err(Error::config("mcl.rays", "must be >= 1"));
        }
        if let Some(world) = &self.mcl.world {
            if self.experiment == Experiment::Mcl && !world.exists() {
                return Err(Error::config("mcl.world", format!("{} does not exist", world.display())));
            }
        }
        let fd = &self.fit_demo;
        if fd.sizes.is_empty() || fd.sizes.contains(&0) || !(fd.interval[0] < fd.interval[1]) || fd.dense_points < 2 {
            return Err(Error::config(
                "fit_demo",
                "needs non-empty positive sizes, an ascending interval and dense_points >= 2",
            ));
        }
        Ok(())
    }

    /// Particle counts to run: the sweep if set, else `particles`.
    pub fn particle_counts(&self) -> Vec<usize> {
        self.sweep.map_or_else(|| vec![self.particles], |s| s.values())
    }

    /// Resolves the Li-PDF settings for this experiment. `support` is the
    /// width of the initial distribution per state dimension and feeds the
    /// default spread threshold.
    pub fn lipdf_config(&self, support: &[f64]) -> Result<LipdfConfig> {
        let s = &self.lipdf;
        let mcl = self.experiment == Experiment::Mcl;
        let variant = match self.filter {
            FilterKind::LipdfBatch => Variant::Batch,
            _ => s.variant.unwrap_or(if mcl { Variant::Implicit } else { Variant::Explicit }),
        };
        // mcl partitions the full pose; a pinned heading never sees the scan
        let active_dims = s.active_dims.clone().unwrap_or(if mcl { vec![0, 1, 2] } else { vec![0] });
        let mut count_override = vec![None; active_dims.iter().copied().max().unwrap_or(0) + 1];
        match (&s.fulcrum_counts, s.auto_count) {
            (Some(counts), _) => {
                if counts.len() != active_dims.len() {
                    return Err(Error::config(
                        "lipdf.fulcrum_counts",
                        format!("{} counts for {} active dimensions", counts.len(), active_dims.len()),
                    ));
                }
                for (&d, &p) in active_dims.iter().zip(counts) {
                    count_override[d] = Some(p);
                }
            }
            (None, Some(true)) => {}
            (None, _) if mcl && s.fulcrums.is_none() && s.active_dims.is_none() => {
                for (&d, p) in active_dims.iter().zip(MCL_FULCRUM_COUNTS) {
                    count_override[d] = Some(p);
                }
            }
            (None, _) => {
                let p = s.fulcrums.unwrap_or(10);
                for &d in &active_dims {
                    count_override[d] = Some(p);
                }
            }
        }
        let grid = GridSpec {
            margin_scale: s.margin_scale.unwrap_or(1.0),
            noise_scale: s
                .noise_scale
                .clone()
                .unwrap_or_else(|| if mcl { MCL_NOISE_SCALE.to_vec() } else { vec![1.0] }),
            resolution: s.resolution.unwrap_or(1.0),
            count_override,
            active_dims: active_dims.clone(),
            max_points: s.max_points.unwrap_or(crate::grid::DEFAULT_MAX_POINTS),
        };
        let spread_threshold = match &s.spread_threshold {
            Some(t) => Some(t.clone()),
            None if mcl => {
                Some(active_dims.iter().map(|&d| 0.1 * support.get(d).copied().unwrap_or(f64::INFINITY)).collect())
            }
            None => None,
        };
        let defaults = SmootherConfig::default();
        Ok(LipdfConfig {
            variant,
            grid,
            basis: s.basis.clone().unwrap_or(Basis::Monomial { power: 2 }),
            sigma: s.sigma.unwrap_or_else(|| self.model.obs_sigma()),
            smoother: SmootherConfig {
                kernel: s.kernel.unwrap_or(defaults.kernel),
                neighbors: s.neighbors.unwrap_or(defaults.neighbors),
                bandwidth: s.bandwidth,
                clamp_negative: true,
            },
            activation: Activation {
                enabled: s.enabled.unwrap_or(true),
                warmup_steps: s.warmup_steps.unwrap_or(if mcl { 3 } else { 0 }),
                spread_threshold,
            },
            ratio_band: s.ratio_band.map_or((0.2, 0.5), |b| (b[0], b[1])),
            resample: self.resample,
            fulcrum_observations: s.fulcrum_observations.unwrap_or(if mcl {
                FulcrumObservations::Auto
            } else {
                FulcrumObservations::Simulated
            }),
            batch: BatchOptions {
                samples: s.batch_samples.unwrap_or(100),
                fit_step: s.batch_fit_step.unwrap_or(1),
                refit_every: s.batch_refit_every,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s = Sweep::parse("particles=10:500:10").unwrap();
        assert_eq!(s.values().len(), 50);
        assert_eq!(s.values()[49], 500);
        assert!(Sweep::parse("fulcrums=1:2:1").is_err());
        assert!(Sweep::parse("particles=10:5:1").is_err());
        assert!(Sweep::parse("particles=10:50").is_err());
    }

    #[test]
    fn sweep_reads_and_writes_the_cli_form() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"bench1d\"\nsweep = \"particles=10:30:10\"\n",
            Path::new("t.toml"),
        )
        .unwrap();
        assert_eq!(cfg.particle_counts(), vec![10, 20, 30]);
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.contains("sweep = \"particles=10:30:10\""), "{text}");
        let bad =
            ExperimentConfig::from_toml_str("experiment = \"bench1d\"\nsweep = \"n=1:2:1\"\n", Path::new("t.toml"));
        assert!(matches!(bad, Err(Error::Parse { .. })));
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml_str("experiment = \"bench1d\"", Path::new("x")).unwrap();
        assert_eq!(cfg.filter, FilterKind::Sir);
        assert_eq!(cfg.particles, 200);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err =
            ExperimentConfig::from_toml_str("experiment = \"bench1d\"\nparticle = 3", Path::new("x")).unwrap_err();
        assert_eq!(err.kind(), "parse");
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = ExperimentConfig::new(Experiment::Bench1d);
        cfg.trials = 0;
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "trials"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mcl_defaults() {
        let mut cfg = ExperimentConfig::new(Experiment::Mcl);
        cfg.filter = FilterKind::Lipdf;
        let l = cfg.lipdf_config(&[4.0, 4.0, 0.2]).unwrap();
        assert_eq!(l.variant, Variant::Implicit);
        assert_eq!(l.grid.active_dims, vec![0, 1, 2]);
        let counts: Vec<_> = (0..3).map(|d| l.grid.count_override(d)).collect();
        assert_eq!(counts, vec![Some(5), Some(5), Some(4)]);
        assert_eq!(l.activation.warmup_steps, 3);
        assert_eq!(l.activation.spread_threshold, Some(vec![0.4, 0.4, 0.020000000000000004]));
    }

    #[test]
    fn uniform_count_and_explicit_counts() {
        let mut cfg = ExperimentConfig::new(Experiment::Mcl);
        cfg.lipdf.active_dims = Some(vec![0, 1]);
        let l = cfg.lipdf_config(&[4.0, 4.0, 0.2]).unwrap();
        assert_eq!((l.grid.count_override(0), l.grid.count_override(1)), (Some(10), Some(10)));
        cfg.lipdf.fulcrum_counts = Some(vec![3]);
        assert!(matches!(cfg.lipdf_config(&[4.0, 4.0, 0.2]), Err(Error::Config { .. })));
        cfg.lipdf.fulcrum_counts = Some(vec![3, 7]);
        let l = cfg.lipdf_config(&[4.0, 4.0, 0.2]).unwrap();
        assert_eq!((l.grid.count_override(0), l.grid.count_override(1)), (Some(3), Some(7)));
    }
}
