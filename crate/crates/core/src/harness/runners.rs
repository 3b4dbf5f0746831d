//! Experiment runners. Each trial draws the ground truth and the filter
//! from separate ChaCha streams derived from the seed and the trial index,
//! so a truth is shared across particle counts and filters.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{Experiment, ExperimentConfig, FilterKind};
use super::report::{Cell, ExperimentReport, Table};
use crate::error::{Error, Result};
use crate::filters::{gpf_step, sir_step, FilterStepReport, PhaseTimings};
use crate::fit::{fit_diagnostics, least_squares_fit, Basis};
use crate::lipdf::{LipdfConfig, LipdfFilter};
use crate::metrics::{euclidean_error, mean_std, RmseAccumulator};
use crate::models::mcl::{simulate_trajectory, MclModel, World};
use crate::models::ugm::{ugm_observe, Ugm1d};
use crate::resample::ResamplePolicy;
use crate::ssm::{CountingModel, ParticleEnsemble, StateSpaceModel};

/// Default length of a growth-model run.
pub const BENCH1D_STEPS: usize = 10_000;

/// ED at the end of an mcl run is averaged over this many final steps.
const END_WINDOW: usize = 5;

/// Stream for the truth of `trial`; the filter uses the next one.
pub fn trial_rng(seed: u64, trial: usize, filter: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * trial as u64 + u64::from(filter));
    rng
}

/// A configured filter of any kind.
#[derive(Debug, Clone)]
pub enum Filter {
    Sir(ResamplePolicy),
    Gpf,
    Lipdf(Box<LipdfFilter>),
}

/// Per-step output common to every filter.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub report: FilterStepReport,
    pub lipdf_active: bool,
    pub fulcrum_count: usize,
    pub fit_rms_residual: Option<f64>,
    pub clamped_count: usize,
    pub ratio_warning: bool,
    pub grid_refused: bool,
}

impl Filter {
    pub fn from_config(config: &ExperimentConfig, support: &[f64]) -> Result<Self> {
        Ok(match config.filter {
            FilterKind::Sir => Filter::Sir(config.resample),
            FilterKind::Gpf => Filter::Gpf,
            FilterKind::Lipdf | FilterKind::LipdfBatch => {
                Filter::Lipdf(Box::new(LipdfFilter::new(config.lipdf_config(support)?)))
            }
        })
    }

    pub fn lipdf_config(&self) -> Option<&LipdfConfig> {
        match self {
            Filter::Lipdf(f) => Some(f.config()),
            _ => None,
        }
    }

    pub fn step<M: StateSpaceModel>(
        &mut self,
        ensemble: &mut ParticleEnsemble,
        model: &M,
        y: &[f64],
        t: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<StepOutcome> {
        let plain = |report| StepOutcome {
            report,
            lipdf_active: false,
            fulcrum_count: 0,
            fit_rms_residual: None,
            clamped_count: 0,
            ratio_warning: false,
            grid_refused: false,
        };
        Ok(match self {
            Filter::Sir(policy) => plain(sir_step(ensemble, model, y, t, policy, rng)?),
            Filter::Gpf => plain(gpf_step(ensemble, model, y, t, rng)?),
            Filter::Lipdf(f) => {
                let r = f.step(ensemble, model, y, t, rng)?;
                StepOutcome {
                    report: r.base,
                    lipdf_active: r.lipdf_active,
                    fulcrum_count: r.fulcrum_count,
                    fit_rms_residual: r.fit_rms_residual,
                    clamped_count: r.clamped_count,
                    ratio_warning: r.ratio_warning,
                    grid_refused: r.grid_refused,
                }
            }
        })
    }
}

/// Running totals for one trial.
#[derive(Debug, Clone, Default)]
pub struct TrialStats {
    pub steps: usize,
    pub activated_steps: usize,
    pub reported_calls: u64,
    pub counted_calls: u64,
    /// Steps whose call count broke the cost contract.
    pub accounting_violations: usize,
    pub resampled_steps: usize,
    pub degenerate_steps: usize,
    pub jitter_steps: usize,
    pub clamped: usize,
    pub ratio_warnings: usize,
    pub grid_refusals: usize,
    fit_rms_sum: f64,
    fit_rms_count: usize,
    pub timings: PhaseTimings,
    pub total: Duration,
    /// Update plus fit time summed over Li-PDF-active steps.
    pub active_update: Duration,
}

impl TrialStats {
    /// Records a step. `counted` is the instrumented model-call count and
    /// `n` the particle count.
    pub fn record(&mut self, o: &StepOutcome, counted: u64, n: usize) {
        let r = &o.report;
        self.steps += 1;
        self.reported_calls += r.likelihood_calls;
        self.counted_calls += counted;
        self.resampled_steps += usize::from(r.resampled);
        self.degenerate_steps += usize::from(r.degeneracy_flag);
        self.jitter_steps += usize::from(r.jitter_flag);
        self.clamped += o.clamped_count;
        self.ratio_warnings += usize::from(o.ratio_warning);
        self.grid_refusals += usize::from(o.grid_refused);
        if let Some(rms) = o.fit_rms_residual {
            self.fit_rms_sum += rms;
            self.fit_rms_count += 1;
        }
        self.timings += r.timings;
        self.total += r.wall_time_total;

        // an active step scores exactly its fulcrums; a warm batch step none
        let expected = if o.lipdf_active {
            self.activated_steps += 1;
            self.active_update += r.wall_time_update();
            o.fulcrum_count as u64
        } else {
            n as u64
        };
        if r.likelihood_calls != expected || counted != expected {
            self.accounting_violations += 1;
        }
    }

    pub fn mean_fit_rms(&self) -> Option<f64> {
        (self.fit_rms_count > 0).then(|| self.fit_rms_sum / self.fit_rms_count as f64)
    }

    fn per_step(&self, d: Duration) -> f64 {
        d.as_secs_f64() / self.steps.max(1) as f64
    }
}

fn config_cells(config: &ExperimentConfig, n: usize, filter: &Filter, steps: usize) -> Vec<Cell> {
    let lipdf = filter.lipdf_config();
    let variant = lipdf.map_or(String::new(), |c| format!("{:?}", c.variant).to_lowercase());
    let fulcrums = lipdf.and_then(|c| {
        let counts: Vec<String> = c
            .grid
            .active_dims
            .iter()
            .map(|&d| c.grid.count_override(d).map_or("auto".into(), |p| p.to_string()))
            .collect();
        (!counts.is_empty()).then(|| counts.join("x"))
    });
    vec![
        config.experiment.name().into(),
        config.filter.name().into(),
        variant.into(),
        n.into(),
        fulcrums.into(),
        config.trials.into(),
        config.seed.into(),
        steps.into(),
    ]
}

const CONFIG_COLUMNS: [&str; 8] =
    ["experiment", "filter", "variant", "particles", "fulcrums", "trials", "seed", "steps"];

fn header(metrics: &[&str]) -> Vec<String> {
    CONFIG_COLUMNS.iter().chain(metrics).map(|s| s.to_string()).collect()
}

const STATS_COLUMNS: [&str; 11] = [
    "activated_steps",
    "likelihood_calls",
    "counted_calls",
    "accounting_violations",
    "resampled_steps",
    "degenerate_steps",
    "jitter_steps",
    "clamped",
    "ratio_warnings",
    "grid_refusals",
    "mean_fit_rms",
];

fn stats_cells(s: &TrialStats) -> Vec<Cell> {
    vec![
        s.activated_steps.into(),
        s.reported_calls.into(),
        s.counted_calls.into(),
        s.accounting_violations.into(),
        s.resampled_steps.into(),
        s.degenerate_steps.into(),
        s.jitter_steps.into(),
        s.clamped.into(),
        s.ratio_warnings.into(),
        s.grid_refusals.into(),
        s.mean_fit_rms().into(),
    ]
}

fn timing_table() -> Table {
    Table::new(
        "timing",
        &[
            "experiment",
            "filter",
            "particles",
            "trial",
            "steps",
            "activated_steps",
            "resample_s",
            "predict_s",
            "update_s",
            "fit_s",
            "total_s",
            "update_per_step_s",
            "active_update_per_step_s",
            "total_per_step_s",
        ],
    )
}

fn timing_row(config: &ExperimentConfig, n: usize, trial: usize, s: &TrialStats) -> Vec<Cell> {
    let t = &s.timings;
    vec![
        config.experiment.name().into(),
        config.filter.name().into(),
        n.into(),
        trial.into(),
        s.steps.into(),
        s.activated_steps.into(),
        t.resample.as_secs_f64().into(),
        t.predict.as_secs_f64().into(),
        t.update.as_secs_f64().into(),
        t.fit.as_secs_f64().into(),
        s.total.as_secs_f64().into(),
        s.per_step(t.update + t.fit).into(),
        (s.activated_steps > 0).then(|| s.active_update.as_secs_f64() / s.activated_steps as f64).into(),
        s.per_step(s.total).into(),
    ]
}

fn summary_table(metric: &str) -> Table {
    let mean = format!("mean_{metric}");
    let std = format!("std_{metric}");
    let mut t = Table::new("summary", &["experiment", "filter", "particles", "trials", "lost"]);
    t.header.push(mean);
    t.header.push(std);
    t
}

/// One ground-truth run of the growth model.
#[derive(Debug, Clone)]
pub struct UgmTruth {
    pub x0: f64,
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
}

pub fn simulate_ugm(model: &Ugm1d, steps: usize, rng: &mut ChaCha8Rng) -> UgmTruth {
    let x0 = model.sample_initial(rng);
    let mut x = [x0];
    let mut y = [0.0];
    let mut out = UgmTruth { x0, states: Vec::with_capacity(steps), observations: Vec::with_capacity(steps) };
    for t in 1..=steps {
        let prev = x;
        model.sample_transition(&prev, t, rng, &mut x);
        model.simulate_observation(&x, rng, &mut y);
        out.states.push(x[0]);
        out.observations.push(y[0]);
    }
    out
}

/// Runs one growth-model trial and returns its RMSE and stats.
pub fn run_ugm_trial(config: &ExperimentConfig, truth: &UgmTruth, n: usize, trial: usize) -> Result<(f64, TrialStats)> {
    let model = CountingModel::new(config.model);
    let mut rng = trial_rng(config.seed, trial, true);
    let mut filter = Filter::from_config(config, &[])?;
    if let Some(c) = filter.lipdf_config() {
        c.validate(&model)?;
    }
    let mut ensemble = ParticleEnsemble::sample(1, n, &mut rng, |r, out| out[0] = config.model.sample_initial(r))?;
    let mut acc = RmseAccumulator::default();
    let mut stats = TrialStats::default();
    for (i, (&x, &y)) in truth.states.iter().zip(&truth.observations).enumerate() {
        model.reset();
        let o = filter.step(&mut ensemble, &model, &[y], i + 1, &mut rng)?;
        acc.push(&[x], &o.report.estimate);
        stats.record(&o, model.total_calls(), n);
    }
    Ok((acc.value().unwrap_or(0.0), stats))
}

/// The growth-model benchmark: RMSE per trial over `steps` steps.
pub fn run_bench1d(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    expect_experiment(config, Experiment::Bench1d)?;
    let steps = config.steps.unwrap_or(BENCH1D_STEPS);
    let mut metrics = vec!["trial", "rmse"];
    metrics.extend(STATS_COLUMNS);
    let mut trials = Table::with_header("", header(&metrics));
    let mut timing = timing_table();
    let mut summary = summary_table("rmse");
    let mut lines = Vec::new();

    let truths: Vec<UgmTruth> =
        (0..config.trials).map(|k| simulate_ugm(&config.model, steps, &mut trial_rng(config.seed, k, false))).collect();
    for n in config.particle_counts() {
        let filter = Filter::from_config(config, &[])?;
        let mut rmses = Vec::with_capacity(config.trials);
        for (k, truth) in truths.iter().enumerate() {
            let (rmse, stats) = run_ugm_trial(config, truth, n, k)?;
            let mut row = config_cells(config, n, &filter, steps);
            row.push(k.into());
            row.push(rmse.into());
            row.extend(stats_cells(&stats));
            trials.push(row);
            timing.push(timing_row(config, n, k, &stats));
            rmses.push(rmse);
        }
        let (mean, std) = mean_std(&rmses);
        summary.push(vec![
            config.experiment.name().into(),
            config.filter.name().into(),
            n.into(),
            config.trials.into(),
            0usize.into(),
            mean.into(),
            std.into(),
        ]);
        lines.push(format!(
            "{} N={n}: mean RMSE {mean:.4} (std {std:.4}) over {} trials",
            config.filter.name(),
            config.trials
        ));
    }
    Ok(ExperimentReport {
        experiment: config.experiment.name().into(),
        tables: vec![trials, summary, timing],
        summary: lines,
    })
}

fn expect_experiment(config: &ExperimentConfig, want: Experiment) -> Result<()> {
    if config.experiment != want {
        return Err(Error::config(
            "experiment",
            format!("expected `{}`, got `{}`", want.name(), config.experiment.name()),
        ));
    }
    Ok(())
}

/// Result of one localization trial.
#[derive(Debug, Clone)]
pub struct MclTrial {
    /// `ed[t-1]` is the position error after step `t`.
    pub ed: Vec<f64>,
    pub active: Vec<bool>,
    pub lost: bool,
    pub stats: TrialStats,
}

impl MclTrial {
    /// Mean ED over steps `from..=end`.
    pub fn mean_ed_from(&self, from: usize) -> Option<f64> {
        let tail = self.ed.get(from.saturating_sub(1)..)?;
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }

    pub fn ed_at(&self, t: usize) -> Option<f64> {
        self.ed.get(t.checked_sub(1)?).copied()
    }

    /// Mean ED over the last few steps.
    pub fn ed_end(&self) -> Option<f64> {
        let k = END_WINDOW.min(self.ed.len());
        (k > 0).then(|| self.ed[self.ed.len() - k..].iter().sum::<f64>() / k as f64)
    }
}

pub fn load_world(config: &ExperimentConfig) -> Result<World> {
    match &config.mcl.world {
        Some(path) => World::load(path),
        None => Ok(World::default_world()),
    }
}

/// Runs one localization trial with `n` particles.
pub fn run_mcl_trial(config: &ExperimentConfig, world: &World, n: usize, trial: usize) -> Result<MclTrial> {
    let rays = config.mcl.rays;
    let traj = simulate_trajectory(world, rays, &mut trial_rng(config.seed, trial, false));
    let steps = config.steps.map_or(traj.scans.len(), |s| s.min(traj.scans.len()));
    let model = CountingModel::new(MclModel::new(world, rays, traj.controls.clone()));
    let support = world.init.support();
    let mut filter = Filter::from_config(config, &support)?;
    if let Some(c) = filter.lipdf_config() {
        c.validate(&model)?;
    }
    let mut rng = trial_rng(config.seed, trial, true);
    let start = world.route.start;
    let mut ensemble = ParticleEnsemble::sample(3, n, &mut rng, |r, out| world.init.sample(&start, r, out))?;

    let mut out = MclTrial {
        ed: Vec::with_capacity(steps),
        active: Vec::with_capacity(steps),
        lost: false,
        stats: TrialStats::default(),
    };
    for t in 1..=steps {
        model.reset();
        let o = filter.step(&mut ensemble, &model, &traj.scans[t - 1], t, &mut rng)?;
        out.stats.record(&o, model.total_calls(), n);
        let truth = traj.states[t];
        let est = &o.report.estimate;
        out.ed.push(euclidean_error((truth.x, truth.y), (est[0], est[1])));
        out.active.push(o.lipdf_active);
        if !ensemble.particles().any(|p| world.arena.is_free(p[0], p[1])) {
            out.lost = true;
            break;
        }
    }
    Ok(out)
}

/// The localization benchmark: per-step ED and per-trial summaries.
pub fn run_mcl(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    expect_experiment(config, Experiment::Mcl)?;
    let world = load_world(config)?;
    let score_from = config.mcl.score_from;
    let mut metrics = vec!["trial", "rays", "lost", "mean_ed", "ed_start", "ed_end", "ed_decreased"];
    metrics.extend(STATS_COLUMNS);
    let mut trials = Table::with_header("", header(&metrics));
    let mut per_step = Table::new("steps", &["filter", "particles", "trial", "t", "ed", "lipdf_active"]);
    let mut timing = timing_table();
    let mut summary = summary_table("ed");
    let mut lines = Vec::new();

    for n in config.particle_counts() {
        let filter = Filter::from_config(config, &world.init.support())?;
        let mut means = Vec::new();
        let mut lost = 0usize;
        for k in 0..config.trials {
            let r = run_mcl_trial(config, &world, n, k)?;
            let mean_ed = r.mean_ed_from(score_from);
            let (start, end) = (r.ed_at(score_from), r.ed_end());
            let decreased = match (start, end) {
                (Some(a), Some(b)) => Some(b < a),
                _ => None,
            };
            let mut row = config_cells(config, n, &filter, r.ed.len());
            row.extend([
                k.into(),
                config.mcl.rays.into(),
                r.lost.into(),
                mean_ed.into(),
                start.into(),
                end.into(),
                decreased.into(),
            ]);
            row.extend(stats_cells(&r.stats));
            trials.push(row);
            for (i, (&ed, &active)) in r.ed.iter().zip(&r.active).enumerate() {
                per_step.push(vec![
                    config.filter.name().into(),
                    n.into(),
                    k.into(),
                    (i + 1).into(),
                    ed.into(),
                    active.into(),
                ]);
            }
            timing.push(timing_row(config, n, k, &r.stats));
            if r.lost {
                lost += 1;
            } else if let Some(m) = mean_ed {
                means.push(m);
            }
        }
        let (mean, std) = mean_std(&means);
        summary.push(vec![
            config.experiment.name().into(),
            config.filter.name().into(),
            n.into(),
            config.trials.into(),
            lost.into(),
            mean.into(),
            std.into(),
        ]);
        lines.push(format!(
            "{} N={n} rays={}: mean ED {mean:.4} (std {std:.4}), {lost} lost of {}",
            config.filter.name(),
            config.mcl.rays,
            config.trials
        ));
    }
    Ok(ExperimentReport {
        experiment: config.experiment.name().into(),
        tables: vec![trials, summary, per_step, timing],
        summary: lines,
    })
}

/// Evenly spaced points over `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![(lo + hi) / 2.0];
    }
    let d = (hi - lo) / (m - 1) as f64;
    (0..m).map(|i| if i == m - 1 { hi } else { lo + i as f64 * d }).collect()
}

/// Fits the quadratic observation map from noisy lattice samples with the
/// trinomial and the monomial bases.
pub fn run_fit_demo(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    expect_experiment(config, Experiment::FitDemo)?;
    let fd = &config.fit_demo;
    let sigma = config.model.obs_sigma();
    let mut rng = trial_rng(config.seed, 0, false);
    let mut coeffs = Table::new(
        "",
        &[
            "experiment",
            "seed",
            "noisy",
            "fulcrums",
            "basis",
            "coef_const",
            "coef_linear",
            "coef_quadratic",
            "residual_norm",
            "rms_residual",
            "sigma_hat",
            "max_abs_residual",
            "r_squared",
            "low_redundancy",
        ],
    );
    let mut samples = Table::new("samples", &["fulcrums", "x", "y"]);
    let mut curves = Table::new("curves", &["fulcrums", "basis", "x", "fitted", "truth"]);
    let mut lines = Vec::new();
    let dense = linspace(fd.interval[0], fd.interval[1], fd.dense_points);

    for &m in &fd.sizes {
        let points: Vec<(f64, f64)> = linspace(fd.interval[0], fd.interval[1], m)
            .into_iter()
            .map(|x| {
                let v: f64 =
                    if fd.noisy { sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng) } else { 0.0 };
                (x, ugm_observe(x, v))
            })
            .collect();
        for &(x, y) in &points {
            samples.push(vec![m.into(), x.into(), y.into()]);
        }
        for basis in [Basis::trinomial(), Basis::Monomial { power: 2 }] {
            let row_start = vec![
                config.experiment.name().into(),
                config.seed.into(),
                fd.noisy.into(),
                m.into(),
                basis.label().into(),
            ];
            match least_squares_fit(&points, &basis) {
                Ok(fit) => {
                    let diag = fit_diagnostics(&fit, &points)?;
                    let c = &fit.coefficients;
                    let (c0, c1, c2) = match basis {
                        Basis::Polynomial { .. } => (Some(c[0]), Some(c[1]), Some(c[2])),
                        _ => (None, None, Some(c[0])),
                    };
                    let dof = m.saturating_sub(basis.order());
                    let sigma_hat = (dof > 0).then(|| fit.residual_norm / (dof as f64).sqrt());
                    let mut row = row_start;
                    row.extend([
                        c0.into(),
                        c1.into(),
                        c2.into(),
                        fit.residual_norm.into(),
                        fit.rms_residual.into(),
                        sigma_hat.into(),
                        diag.max_abs_residual.into(),
                        diag.r_squared.into(),
                        fit.low_redundancy.into(),
                    ]);
                    coeffs.push(row);
                    for &x in &dense {
                        curves.push(vec![
                            m.into(),
                            basis.label().into(),
                            x.into(),
                            fit.value(x).into(),
                            ugm_observe(x, 0.0).into(),
                        ]);
                    }
                    lines.push(format!(
                        "M={m:>3} {:<12} coefficients {:?} rms residual {:.4}",
                        basis.label(),
                        c,
                        fit.rms_residual
                    ));
                }
                Err(Error::TooFewPoints { .. }) => {
                    let mut row = row_start;
                    row.extend(std::iter::repeat_n(Cell::Empty, 9));
                    coeffs.push(row);
                    lines.push(format!("M={m:>3} {:<12} skipped: too few fulcrums", basis.label()));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(ExperimentReport {
        experiment: config.experiment.name().into(),
        tables: vec![coeffs, samples, curves],
        summary: lines,
    })
}

/// Dispatches on `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.experiment {
        Experiment::Bench1d => run_bench1d(config),
        Experiment::Mcl => run_mcl(config),
        Experiment::FitDemo => run_fit_demo(config),
    }
}
