//! Planar robot localization with a range scanner in a rectangle world.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ssm::{wrap_angle, StateSpaceModel};

/// World-file schema version this build reads.
pub const WORLD_VERSION: u32 = 1;

/// The built-in world.
pub const DEFAULT_WORLD: &str = include_str!("../../worlds/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    /// Strict interior test; a pose on an edge is in free space.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x > self.min[0] && x < self.max[0] && y > self.min[1] && y < self.max[1]
    }

    /// Entry distance of the ray `origin + t * dir`, `t >= 0`, if it hits.
    pub fn ray_entry(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let (mut t_in, mut t_out) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..2 {
            if dir[k].abs() < 1e-300 {
                if origin[k] < self.min[k] || origin[k] > self.max[k] {
                    return None;
                }
            } else {
                let a = (self.min[k] - origin[k]) / dir[k];
                let b = (self.max[k] - origin[k]) / dir[k];
                t_in = t_in.max(a.min(b));
                t_out = t_out.min(a.max(b));
            }
        }
        (t_out >= t_in && t_out >= 0.0).then_some(t_in.max(0.0))
    }
}

/// Arena with implicit boundary walls and rectangular obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupancyMap {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

impl OccupancyMap {
    pub fn empty(width: f64, height: f64) -> Self {
        Self { width, height, obstacles: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::config("arena", "width and height must be positive"));
        }
        for (i, r) in self.obstacles.iter().enumerate() {
            let inside = r.min[0] >= 0.0 && r.min[1] >= 0.0 && r.max[0] <= self.width && r.max[1] <= self.height;
            if !(r.min[0] < r.max[0] && r.min[1] < r.max[1] && inside) {
                return Err(Error::config(format!("obstacles[{i}]"), "must be a non-empty box inside the arena"));
            }
        }
        Ok(())
    }

    pub fn is_free(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && x <= self.width && y >= 0.0 && y <= self.height && !self.obstacles.iter().any(|r| r.contains(x, y))
    }

    /// Distance from a free-space origin to the first wall or obstacle along
    /// `angle`, capped at `max_range`.
    pub fn cast_ray(&self, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        let wall = |p: f64, d: f64, hi: f64| {
            if d > 0.0 {
                (hi - p) / d
            } else if d < 0.0 {
                -p / d
            } else {
                f64::INFINITY
            }
        };
        let mut t = wall(x, c, self.width).min(wall(y, s, self.height));
        for r in &self.obstacles {
            if let Some(hit) = r.ray_entry([x, y], [c, s]) {
                t = t.min(hit);
            }
        }
        t.clamp(0.0, max_range)
    }

    /// Noiseless ranges along `theta + 2 pi k / n`. Returns `false` and
    /// zeroes `out` when the pose is not in free space.
    pub fn scan_into(&self, pose: &[f64], max_range: f64, out: &mut [f64]) -> bool {
        if !self.is_free(pose[0], pose[1]) {
            out.fill(0.0);
            return false;
        }
        let n = out.len() as f64;
        for (k, r) in out.iter_mut().enumerate() {
            *r = self.cast_ray(pose[0], pose[1], pose[2] + 2.0 * PI * k as f64 / n, max_range);
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.y, self.theta]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self { x: s[0], y: s[1], theta: s[2] }
    }
}

/// Translate `ds` along the current heading, then turn by `dtheta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub ds: f64,
    pub dtheta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseShape {
    #[default]
    Uniform,
    Gaussian,
}

/// Motion noise. Each component is zero mean with standard deviation
/// `fraction * |command| + floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionNoise {
    pub shape: NoiseShape,
    pub translation_fraction: f64,
    pub rotation_fraction: f64,
    pub translation_floor: f64,
    pub rotation_floor: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            shape: NoiseShape::Uniform,
            translation_fraction: 0.2,
            rotation_fraction: 0.05,
            translation_floor: 0.0,
            rotation_floor: 0.0,
        }
    }
}

impl MotionNoise {
    fn draw<R: Rng + ?Sized>(&self, std: f64, rng: &mut R) -> f64 {
        if std == 0.0 {
            return 0.0;
        }
        match self.shape {
            NoiseShape::Gaussian => std * rng.sample::<f64, _>(StandardNormal),
            // half-width sqrt(3) std gives the same variance
            NoiseShape::Uniform => std * 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// Odometry motion model. With `noise` off the move is exact.
pub fn mcl_motion<R: Rng + ?Sized>(
    state: RobotState,
    u: ControlInput,
    rng: &mut R,
    noise: Option<&MotionNoise>,
) -> RobotState {
    let (ds, dtheta) = match noise {
        None => (u.ds, u.dtheta),
        Some(nz) => {
            let es = nz.draw(nz.translation_fraction * u.ds.abs() + nz.translation_floor, rng);
            let et = nz.draw(nz.rotation_fraction * u.dtheta.abs() + nz.rotation_floor, rng);
            (u.ds + es, u.dtheta + et)
        }
    };
    let (s, c) = state.theta.sin_cos();
    RobotState { x: state.x + ds * c, y: state.y + ds * s, theta: wrap_angle(state.theta + dtheta) }
}

/// A simulated scan and whether the pose was in free space.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub ranges: Vec<f64>,
    pub in_obstacle: bool,
}

/// Noisy scan with per-ray Gaussian noise of variance `noise_var`, floored
/// at zero and capped at `max_range`.
pub fn simulate_scan<R: Rng + ?Sized>(
    state: RobotState,
    map: &OccupancyMap,
    n: usize,
    max_range: f64,
    rng: &mut R,
    noise_var: f64,
) -> Scan {
    let mut ranges = vec![0.0; n];
    let free = map.scan_into(&[state.x, state.y, state.theta], max_range, &mut ranges);
    if free {
        add_scan_noise(&mut ranges, max_range, noise_var, rng);
    }
    Scan { ranges, in_obstacle: !free }
}

fn add_scan_noise<R: Rng + ?Sized>(ranges: &mut [f64], max_range: f64, noise_var: f64, rng: &mut R) {
    let sd = noise_var.sqrt();
    for r in ranges {
        *r = (*r + sd * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, max_range);
    }
}

/// Log of the diagonal-covariance Gaussian scan likelihood.
pub fn scan_log_likelihood(predicted: &[f64], observed: &[f64], per_ray_var: f64) -> f64 {
    let n = predicted.len() as f64;
    let ss: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    -0.5 * n * (2.0 * PI * per_ray_var).ln() - 0.5 * ss / per_ray_var
}

pub fn scan_likelihood(predicted: &[f64], observed: &[f64], per_ray_var: f64) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: observed.len() });
    }
    Ok(scan_log_likelihood(predicted, observed, per_ray_var).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

/// Waypoint-following controller that produces the control schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route {
    pub start: Pose,
    pub waypoints: Vec<[f64; 2]>,
    pub step_length: f64,
    pub max_turn: f64,
    pub arrival_tolerance: f64,
    pub max_steps: usize,
}

impl Route {
    /// Next command from `pose` toward waypoint `target`, advancing `target`
    /// past reached waypoints. `None` once the last waypoint is reached.
    pub fn command(&self, pose: RobotState, target: &mut usize) -> Option<ControlInput> {
        while let Some(w) = self.waypoints.get(*target) {
            if (w[0] - pose.x).hypot(w[1] - pose.y) > self.arrival_tolerance {
                break;
            }
            *target += 1;
        }
        let w = self.waypoints.get(*target)?;
        let dist = (w[0] - pose.x).hypot(w[1] - pose.y);
        let err = wrap_angle((w[1] - pose.y).atan2(w[0] - pose.x) - pose.theta);
        // move only when roughly aligned; turning uses the post-move bearing
        let ds = if err.abs() < 0.3 { self.step_length.min(dist) } else { 0.0 };
        let (s, c) = pose.theta.sin_cos();
        let (nx, ny) = (pose.x + ds * c, pose.y + ds * s);
        let next_err = if (w[0] - nx).hypot(w[1] - ny) > 1e-9 {
            wrap_angle((w[1] - ny).atan2(w[0] - nx) - pose.theta)
        } else {
            0.0
        };
        Some(ControlInput { ds, dtheta: next_err.clamp(-self.max_turn, self.max_turn) })
    }
}

/// Initial belief: uniform box around the start pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBelief {
    pub half_width: [f64; 2],
    pub heading_half_width: f64,
}

impl InitialBelief {
    /// Width of the support of each state coordinate.
    pub fn support(&self) -> [f64; 3] {
        [2.0 * self.half_width[0], 2.0 * self.half_width[1], 2.0 * self.heading_half_width]
    }

    pub fn sample<R: Rng + ?Sized>(&self, start: &Pose, rng: &mut R, out: &mut [f64]) {
        let mut u = |h: f64| h * (2.0 * rng.random::<f64>() - 1.0);
        out[0] = start.x + u(self.half_width[0]);
        out[1] = start.y + u(self.half_width[1]);
        out[2] = wrap_angle(start.theta + u(self.heading_half_width));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub max_range: f64,
    /// Per-ray observation noise variance.
    pub noise_var: f64,
}

/// Versioned world file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub arena: OccupancyMap,
    pub route: Route,
    pub scan: ScanSpec,
    pub init: InitialBelief,
    #[serde(default)]
    pub motion: MotionNoise,
}

impl World {
    pub fn default_world() -> Self {
        Self::from_toml_str(DEFAULT_WORLD, Path::new("<builtin>")).expect("built-in world is valid")
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let world: World =
            toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        world.validate()?;
        Ok(world)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != WORLD_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported world version {}, expected {WORLD_VERSION}", self.version),
            ));
        }
        self.arena.validate()?;
        let r = &self.route;
        if !self.arena.is_free(r.start.x, r.start.y) {
            return Err(Error::config("route.start", "must lie in free space"));
        }
        for (i, w) in r.waypoints.iter().enumerate() {
            if !self.arena.is_free(w[0], w[1]) {
                return Err(Error::config(format!("route.waypoints[{i}]"), "must lie in free space"));
            }
        }
        if r.waypoints.is_empty() || !(r.step_length > 0.0) || !(r.max_turn > 0.0) || r.max_steps == 0 {
            return Err(Error::config("route", "needs waypoints, positive step_length and max_turn, max_steps >= 1"));
        }
        if !(self.scan.max_range > 0.0 && self.scan.noise_var > 0.0) {
            return Err(Error::config("scan", "max_range and noise_var must be positive"));
        }
        Ok(())
    }

    pub fn start_state(&self) -> RobotState {
        RobotState { x: self.route.start.x, y: self.route.start.y, theta: self.route.start.theta }
    }
}

/// A simulated ground-truth run.
#[derive(Debug, Clone)]
pub struct MclTrajectory {
    /// `states[0]` is the start pose; `states[t]` follows `controls[t-1]`.
    pub states: Vec<RobotState>,
    pub controls: Vec<ControlInput>,
    /// `scans[t-1]` is observed at `states[t]`.
    pub scans: Vec<Vec<f64>>,
    pub reached_goal: bool,
}

/// Drives the noisy robot along the route and records its scans.
pub fn simulate_trajectory<R: Rng + ?Sized>(world: &World, n_rays: usize, rng: &mut R) -> MclTrajectory {
    let mut pose = world.start_state();
    let mut out = MclTrajectory { states: vec![pose], controls: Vec::new(), scans: Vec::new(), reached_goal: false };
    let mut target = 0;
    for _ in 0..world.route.max_steps {
        let Some(u) = world.route.command(pose, &mut target) else {
            out.reached_goal = true;
            break;
        };
        let next = mcl_motion(pose, u, rng, Some(&world.motion));
        // the true robot does not enter obstacles; a blocked move keeps the pose
        if world.arena.is_free(next.x, next.y) {
            pose = next;
        } else {
            pose.theta = next.theta;
        }
        let scan = simulate_scan(pose, &world.arena, n_rays, world.scan.max_range, rng, world.scan.noise_var);
        out.states.push(pose);
        out.controls.push(u);
        out.scans.push(scan.ranges);
    }
    out
}

/// The localization problem for one control schedule.
#[derive(Debug, Clone)]
pub struct MclModel {
    pub map: OccupancyMap,
    pub n_rays: usize,
    pub max_range: f64,
    pub per_ray_var: f64,
    pub motion: MotionNoise,
    /// `controls[t-1]` moves the robot from step `t-1` to `t`.
    pub controls: Vec<ControlInput>,
}

impl MclModel {
    pub fn new(world: &World, n_rays: usize, controls: Vec<ControlInput>) -> Self {
        Self {
            map: world.arena.clone(),
            n_rays,
            max_range: world.scan.max_range,
            per_ray_var: world.scan.noise_var,
            motion: world.motion,
            controls,
        }
    }
}

impl StateSpaceModel for MclModel {
    fn state_dim(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        self.n_rays
    }

    fn sample_transition<R: Rng + ?Sized>(&self, prev: &[f64], t: usize, rng: &mut R, out: &mut [f64]) {
        let u = self.controls.get(t - 1).copied().unwrap_or_default();
        let next = mcl_motion(RobotState::from_slice(prev), u, rng, Some(&self.motion));
        out.copy_from_slice(&[next.x, next.y, next.theta]);
    }

    fn likelihood(&self, state: &[f64], y: &[f64]) -> f64 {
        let mut predicted = vec![0.0; self.n_rays];
        if !self.map.scan_into(state, self.max_range, &mut predicted) {
            return 0.0;
        }
        scan_log_likelihood(&predicted, y, self.per_ray_var).exp()
    }

    fn simulate_observation<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R, out: &mut [f64]) {
        if self.map.scan_into(state, self.max_range, out) {
            add_scan_noise(out, self.max_range, self.per_ray_var, rng);
        }
    }

    fn observation_map(&self, state: &[f64], out: &mut [f64]) -> bool {
        self.map.scan_into(state, self.max_range, out);
        true
    }

    fn is_circular(&self, dim: usize) -> bool {
        dim == 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn exact(s: RobotState, ds: f64, dtheta: f64) -> RobotState {
        mcl_motion(s, ControlInput { ds, dtheta }, &mut ChaCha8Rng::seed_from_u64(0), None)
    }

    #[test]
    fn motion_examples() {
        let s = exact(RobotState { x: 2.0, y: 3.0, theta: 0.0 }, 1.0, 0.0);
        assert_eq!((s.x, s.y, s.theta), (3.0, 3.0, 0.0));
        let s = exact(RobotState { x: 2.0, y: 3.0, theta: FRAC_PI_2 }, 1.0, 0.0);
        assert_abs_diff_eq!(s.x, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.y, 4.0, epsilon = 1e-15);
        let s = exact(RobotState { x: 2.0, y: 3.0, theta: 0.0 }, 0.0, PI);
        assert_eq!((s.x, s.y), (2.0, 3.0));
        assert_abs_diff_eq!(s.theta.abs(), PI, epsilon = 1e-15);
    }

    #[test]
    fn scan_examples() {
        let room = OccupancyMap::empty(10.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let center = RobotState { x: 5.0, y: 5.0, theta: 0.0 };
        let mut one = [0.0];
        room.scan_into(&center.to_vec(), 100.0, &mut one);
        assert_eq!(one[0], 5.0);
        let mut four = [0.0; 4];
        room.scan_into(&center.to_vec(), 100.0, &mut four);
        for r in four {
            assert_abs_diff_eq!(r, 5.0, epsilon = 1e-12);
        }
        let near = RobotState { x: 9.0, y: 5.0, theta: 0.0 };
        room.scan_into(&near.to_vec(), 100.0, &mut one);
        assert_abs_diff_eq!(one[0], 1.0, epsilon = 1e-12);

        let mut boxed = room.clone();
        boxed.obstacles.push(Rect { min: [4.0, 4.0], max: [6.0, 6.0] });
        let s = simulate_scan(center, &boxed, 8, 100.0, &mut rng, 5.0);
        assert!(s.in_obstacle);
        assert!(s.ranges.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn obstacle_blocks_ray() {
        let mut map = OccupancyMap::empty(10.0, 10.0);
        map.obstacles.push(Rect { min: [7.0, 4.0], max: [8.0, 6.0] });
        assert_abs_diff_eq!(map.cast_ray(5.0, 5.0, 0.0, 100.0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(map.cast_ray(5.0, 5.0, PI, 100.0), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(map.cast_ray(5.0, 5.0, 0.0, 1.5), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn likelihood_examples() {
        let y = [3.0, 4.0];
        assert_abs_diff_eq!(scan_likelihood(&y, &y, 5.0).unwrap(), 1.0 / (10.0 * PI), epsilon = 1e-12);
        assert_abs_diff_eq!(scan_likelihood(&y[..1], &y[..1], 5.0).unwrap(), 1.0 / (10.0 * PI).sqrt(), epsilon = 1e-12);
        assert!(scan_likelihood(&[3.0, 4.1], &y, 5.0).unwrap() < scan_likelihood(&y, &y, 5.0).unwrap());
        let big = scan_likelihood(&[1e3; 180], &[0.0; 180], 5.0).unwrap();
        assert!(big == 0.0 && !big.is_nan());
    }

    #[test]
    fn in_obstacle_particles_get_zero_weight() {
        let world = World::default_world();
        let model = MclModel::new(&world, 36, vec![]);
        let r = world.arena.obstacles[0];
        let inside = [(r.min[0] + r.max[0]) / 2.0, (r.min[1] + r.max[1]) / 2.0, 0.0];
        assert_eq!(model.likelihood(&inside, &vec![1.0; 36]), 0.0);
    }

    #[test]
    fn default_world_shape() {
        let world = World::default_world();
        assert_eq!(world.version, WORLD_VERSION);
        assert_eq!(world.arena.obstacles.len(), 3);
        assert_eq!(world.route.waypoints.len(), 24);
    }

    #[test]
    fn route_is_completed_without_noise() {
        let mut world = World::default_world();
        world.motion = MotionNoise {
            translation_fraction: 0.0,
            rotation_fraction: 0.0,
            translation_floor: 0.0,
            rotation_floor: 0.0,
            ..Default::default()
        };
        let traj = simulate_trajectory(&world, 4, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(traj.reached_goal);
        assert!(traj.states.iter().all(|s| world.arena.is_free(s.x, s.y)));
    }

    #[test]
    fn noisy_routes_finish() {
        let world = World::default_world();
        for seed in 0..20 {
            let traj = simulate_trajectory(&world, 4, &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(traj.reached_goal, "seed {seed}");
        }
    }

    #[test]
    fn unsupported_world_version_is_rejected() {
        let text = DEFAULT_WORLD.replacen("version = 1", "version = 99", 1);
        let err = World::from_toml_str(&text, Path::new("w.toml")).unwrap_err();
        assert_eq!(err.kind(), "config");
    }

    proptest! {
        #[test]
        fn ranges_are_translation_invariant(
            x in 11.0f64..19.0, y in 11.0f64..19.0, theta in -PI..PI, dx in 0.0f64..50.0, dy in 0.0f64..50.0,
        ) {
            // a walled room built from obstacles, far from the arena boundary
            let room = |ox: f64, oy: f64| {
                let b = |x0: f64, y0: f64, x1: f64, y1: f64| Rect { min: [x0 + ox, y0 + oy], max: [x1 + ox, y1 + oy] };
                OccupancyMap {
                    width: 100.0,
                    height: 100.0,
                    obstacles: vec![
                        b(9.0, 9.0, 21.0, 10.0),
                        b(9.0, 20.0, 21.0, 21.0),
                        b(9.0, 10.0, 10.0, 20.0),
                        b(20.0, 10.0, 21.0, 20.0),
                        b(13.0, 13.0, 14.0, 17.0),
                    ],
                }
            };
            let here = room(0.0, 0.0);
            prop_assume!(here.is_free(x, y));
            let mut a = [0.0; 12];
            let mut b = [0.0; 12];
            here.scan_into(&[x, y, theta], 100.0, &mut a);
            room(dx, dy).scan_into(&[x + dx, y + dy, theta], 100.0, &mut b);
            for k in 0..12 {
                prop_assert!((a[k] - b[k]).abs() <= 1e-9 * (1.0 + a[k]));
            }
        }

        #[test]
        fn exact_motion_is_invertible(
            x in -10.0f64..10.0, y in -10.0f64..10.0, theta in -PI..PI, ds in -2.0f64..2.0, dtheta in -3.0f64..3.0,
        ) {
            let s = RobotState { x, y, theta };
            let moved = exact(s, ds, dtheta);
            let turned_back = exact(moved, 0.0, -dtheta);
            let back = exact(turned_back, -ds, 0.0);
            prop_assert!((back.x - x).abs() < 1e-9 && (back.y - y).abs() < 1e-9);
            prop_assert!(wrap_angle(back.theta - theta).abs() < 1e-9);
        }

        #[test]
        fn log_likelihood_is_finite_for_large_residuals(r in 0.0f64..1e3, n in 1usize..200) {
            let l = scan_log_likelihood(&vec![r; n], &vec![0.0; n], 5.0);
            prop_assert!(l.is_finite());
            prop_assert!(scan_likelihood(&vec![r; n], &vec![0.0; n], 5.0).unwrap() >= 0.0);
        }
    }
}
