//! Fulcrum lattices covering the particle cloud.
//!
//! Each active dimension is partitioned into equally spaced points over the
//! particle hull, widened per side by `margin_scale * sqrt(noise_scale)`. The fulcrums are
//! the cross product of those coordinates; inactive dimensions are pinned to
//! a single representative value (normally the ensemble's weighted mean).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::check_likelihood;
use crate::ssm::{ParticleEnsemble, StateSpaceModel};

pub const DEFAULT_MAX_POINTS: usize = 1_000_000;

/// Scratch for the pruned lattice walk.
struct Walk<'a> {
    terms: &'a [f64],
    order: &'a [usize],
    offsets: &'a [usize],
    k: usize,
}

/// Lattices up to this size answer radius queries by a full scan, which
/// beats the windowed search at these sizes.
const BRUTE_FORCE_LIMIT: usize = 256;

/// How a fulcrum lattice is laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// The hull is widened by `margin_scale * sqrt(noise_scale)` per side.
    pub margin_scale: f64,
    /// Per-dimension noise scale (state units squared). A single entry
    /// applies to every dimension.
    pub noise_scale: Vec<f64>,
    /// Target spacing, in noise-scale units, for the automatic point count.
    pub resolution: f64,
    /// Fixed point count per state dimension. `Some(1)` leaves the
    /// dimension unpartitioned.
    #[serde(default)]
    pub count_override: Vec<Option<usize>>,
    /// State dimensions that are partitioned.
    pub active_dims: Vec<usize>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_max_points() -> usize {
    DEFAULT_MAX_POINTS
}

impl GridSpec {
    /// A spec that partitions `active_dims` into exactly `p` points each.
    pub fn fixed(active_dims: Vec<usize>, p: usize, margin: f64) -> Self {
        let max_dim = active_dims.iter().copied().max().unwrap_or(0);
        let mut count_override = vec![None; max_dim + 1];
        for &d in &active_dims {
            count_override[d] = Some(p);
        }
        Self {
            margin_scale: margin,
            noise_scale: vec![1.0],
            resolution: 1.0,
            count_override,
            active_dims,
            max_points: DEFAULT_MAX_POINTS,
        }
    }

    pub fn noise_scale(&self, dim: usize) -> f64 {
        match self.noise_scale.as_slice() {
            [q] => *q,
            qs => qs.get(dim).copied().unwrap_or(f64::NAN),
        }
    }

    pub fn count_override(&self, dim: usize) -> Option<usize> {
        self.count_override.get(dim).copied().flatten()
    }

    pub fn margin(&self, dim: usize) -> f64 {
        self.margin_scale * self.noise_scale(dim).sqrt()
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(Error::config("grid.resolution", "must be > 0"));
        }
        if !(self.margin_scale >= 0.0) {
            return Err(Error::config("grid.margin_scale", "must be >= 0"));
        }
        if self.active_dims.is_empty() {
            return Err(Error::config("grid.active_dims", "at least one dimension must be partitioned"));
        }
        for &d in &self.active_dims {
            if d >= state_dim {
                return Err(Error::config("grid.active_dims", format!("dimension {d} out of range")));
            }
            if !(self.noise_scale(d) > 0.0) {
                return Err(Error::config("grid.noise_scale", format!("Q[{d}] must be > 0")));
            }
            if self.count_override(d) == Some(0) {
                return Err(Error::config("grid.count_override", format!("p[{d}] must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Particle hull in dimension `dim`, widened by the spec's margin.
pub fn bounding_interval(ensemble: &ParticleEnsemble, dim: usize, spec: &GridSpec) -> Interval {
    let (lo, hi) = ensemble.coords(dim).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let r = spec.margin(dim);
    Interval { lo: lo - r, hi: hi + r }
}

/// Points along dimension `dim`: the override when set, else
/// `ceil(width / (2 resolution) / sqrt(noise_scale))`, never fewer than two.
pub fn points_per_dimension(interval: &Interval, spec: &GridSpec, dim: usize) -> usize {
    if let Some(p) = spec.count_override(dim) {
        return p;
    }
    let m = (interval.len() / (2.0 * spec.resolution) / spec.noise_scale(dim).sqrt()).ceil();
    if m.is_finite() {
        (m as usize).max(2)
    } else {
        2
    }
}

/// A fulcrum lattice, optionally carrying a likelihood per point.
#[derive(Debug, Clone, PartialEq)]
pub struct FulcrumGrid {
    dim: usize,
    active_dims: Vec<usize>,
    bounds: Vec<Interval>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    points: Vec<f64>,
    likelihoods: Option<Vec<f64>>,
}

/// One fulcrum returned by a neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborQuery {
    /// The `k` closest fulcrums.
    Count(usize),
    /// Every fulcrum within this Euclidean radius.
    Radius(f64),
}

/// Builds the lattice over `ensemble`. Inactive coordinates take their value
/// from `pinned`, a full-dimension state.
pub fn build_grid(ensemble: &ParticleEnsemble, spec: &GridSpec, pinned: &[f64]) -> Result<FulcrumGrid> {
    let dim = ensemble.dim();
    spec.validate(dim)?;
    if pinned.len() != dim {
        return Err(Error::LengthMismatch { left: dim, right: pinned.len() });
    }

    let mut active_dims = Vec::new();
    let mut bounds = Vec::new();
    let mut counts = Vec::new();
    let mut spacing = Vec::new();
    for &d in &spec.active_dims {
        let interval = bounding_interval(ensemble, d, spec);
        let m = points_per_dimension(&interval, spec, d);
        if m < 2 {
            continue;
        }
        active_dims.push(d);
        bounds.push(interval);
        counts.push(m);
        spacing.push(interval.len() / (m - 1) as f64);
    }

    let total = counts.iter().fold(1u128, |acc, &m| acc.saturating_mul(m as u128));
    if total > spec.max_points as u128 {
        return Err(Error::GridTooLarge { count: total, cap: spec.max_points });
    }
    let total = total as usize;

    let mut strides = vec![1; counts.len()];
    for l in (0..counts.len().saturating_sub(1)).rev() {
        strides[l] = strides[l + 1] * counts[l + 1];
    }

    let mut points = Vec::with_capacity(total * dim);
    for idx in 0..total {
        let start = points.len();
        points.extend_from_slice(pinned);
        for (l, &d) in active_dims.iter().enumerate() {
            let m = (idx / strides[l]) % counts[l];
            points[start + d] = bounds[l].lo + m as f64 * spacing[l];
        }
    }

    Ok(FulcrumGrid { dim, active_dims, bounds, counts, spacing, strides, points, likelihoods: None })
}

/// Scores every fulcrum with the model likelihood: exactly `len()` calls.
pub fn evaluate_fulcrums<M: StateSpaceModel>(grid: &mut FulcrumGrid, model: &M, y: &[f64]) -> Result<u64> {
    let mut values = Vec::with_capacity(grid.len());
    for (i, p) in grid.points().enumerate() {
        values.push(check_likelihood(i, model.likelihood(p, y))?);
    }
    let calls = values.len() as u64;
    grid.likelihoods = Some(values);
    Ok(calls)
}

impl FulcrumGrid {
    /// Total fulcrum count, the product of the per-dimension counts.
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn active_dims(&self) -> &[usize] {
        &self.active_dims
    }

    /// Bounds per active dimension.
    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index * self.dim..(index + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn likelihoods(&self) -> Option<&[f64]> {
        self.likelihoods.as_deref()
    }

    pub fn set_likelihoods(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: values.len() });
        }
        self.likelihoods = Some(values);
        Ok(())
    }

    /// Euclidean distance over the active dimensions.
    pub fn distance(&self, query: &[f64], index: usize) -> f64 {
        let p = self.point(index);
        self.active_dims.iter().map(|&d| (query[d] - p[d]) * (query[d] - p[d])).sum::<f64>().sqrt()
    }

    /// Neighbor query; returns the neighbors sorted by `(distance, index)`
    /// and whether an empty radius query fell back to the single nearest
    /// fulcrum.
    pub fn nearest_fulcrums(&self, query: &[f64], q: NeighborQuery) -> Result<(Vec<Neighbor>, bool)> {
        let mut out = Vec::new();
        let fallback = self.nearest_into(query, q, &mut out)?;
        Ok((out, fallback))
    }

    /// As [`nearest_fulcrums`](Self::nearest_fulcrums), reusing `out`.
    pub fn nearest_into(&self, query: &[f64], q: NeighborQuery, out: &mut Vec<Neighbor>) -> Result<bool> {
        let likelihoods = self
            .likelihoods
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("fulcrum likelihoods are not set".into()))?;
        out.clear();
        match q {
            NeighborQuery::Count(k) => {
                self.k_nearest(query, k, out);
            }
            NeighborQuery::Radius(h) => {
                self.within_radius(query, h, out);
                if out.is_empty() {
                    self.k_nearest(query, 1, out);
                    fill_likelihoods(out, likelihoods);
                    return Ok(true);
                }
            }
        }
        fill_likelihoods(out, likelihoods);
        Ok(false)
    }

    /// Visits every lattice index inside the per-dimension index window.
    fn scan_window(&self, lo: &[usize], hi: &[usize], mut visit: impl FnMut(usize)) {
        let dims = self.counts.len();
        let mut cur = lo.to_vec();
        loop {
            let idx: usize = cur.iter().zip(&self.strides).map(|(m, s)| m * s).sum();
            visit(idx);
            let mut l = dims;
            loop {
                if l == 0 {
                    return;
                }
                l -= 1;
                if cur[l] < hi[l] {
                    cur[l] += 1;
                    break;
                }
                cur[l] = lo[l];
            }
        }
    }

    fn k_nearest(&self, query: &[f64], k: usize, out: &mut Vec<Neighbor>) {
        let k = k.min(self.len());
        if k > 0 {
            self.k_nearest_scan(query, k, out);
        }
    }

    /// Top `k` by `(distance, index)`. The squared distance is a sum of
    /// per-dimension terms, so a depth-first walk that visits each
    /// dimension nearest-first can prune any branch whose partial sum
    /// already exceeds the current k-th.
    fn k_nearest_scan(&self, query: &[f64], k: usize, out: &mut Vec<Neighbor>) {
        let mut terms = Vec::with_capacity(self.counts.iter().sum());
        let mut offsets = Vec::with_capacity(self.counts.len());
        for (l, &d) in self.active_dims.iter().enumerate() {
            offsets.push(terms.len());
            let x = query[d];
            terms.extend((0..self.counts[l]).map(|m| {
                let c = self.bounds[l].lo + m as f64 * self.spacing[l];
                (x - c) * (x - c)
            }));
        }
        let mut order = Vec::with_capacity(terms.len());
        for (l, &off) in offsets.iter().enumerate() {
            let t = &terms[off..off + self.counts[l]];
            let start = order.len();
            order.extend(0..self.counts[l]);
            order[start..].sort_unstable_by(|&a: &usize, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
        }
        let walk = Walk { terms: &terms, order: &order, offsets: &offsets, k };
        self.descend(&walk, 0, 0, 0.0, out);
        for n in out.iter_mut() {
            n.distance = n.distance.sqrt();
        }
    }

    fn descend(&self, walk: &Walk<'_>, l: usize, base: usize, partial: f64, out: &mut Vec<Neighbor>) {
        let k = walk.k;
        if out.len() == k && partial > out[k - 1].distance {
            return;
        }
        if l == self.counts.len() {
            let key = (partial, base);
            if out.len() == k && key >= (out[k - 1].distance, out[k - 1].index) {
                return;
            }
            let at = out.partition_point(|n| (n.distance, n.index) < key);
            if out.len() == k {
                out.pop();
            }
            out.insert(at, Neighbor { index: base, distance: partial, likelihood: 0.0 });
            return;
        }
        let off = walk.offsets[l];
        for &m in &walk.order[off..off + self.counts[l]] {
            let sum = partial + walk.terms[off + m];
            if out.len() == k && sum > out[k - 1].distance {
                // later entries along this dimension are no closer
                break;
            }
            self.descend(walk, l + 1, base + m * self.strides[l], sum, out);
        }
    }

    fn within_radius(&self, query: &[f64], h: f64, out: &mut Vec<Neighbor>) {
        if self.len() <= BRUTE_FORCE_LIMIT {
            for index in 0..self.len() {
                let distance = self.distance(query, index);
                if distance <= h {
                    out.push(Neighbor { index, distance, likelihood: 0.0 });
                }
            }
            sort_neighbors(out);
            return;
        }
        let dims = self.counts.len();
        let mut lo = vec![0; dims];
        let mut hi = vec![0; dims];
        for l in 0..dims {
            let x = query[self.active_dims[l]];
            let last = self.counts[l] - 1;
            if self.spacing[l] > 0.0 {
                let a = ((x - h - self.bounds[l].lo) / self.spacing[l]).floor() - 1.0;
                let b = ((x + h - self.bounds[l].lo) / self.spacing[l]).ceil() + 1.0;
                if b < 0.0 || a > last as f64 {
                    return;
                }
                lo[l] = a.max(0.0) as usize;
                hi[l] = (b.min(last as f64)) as usize;
            } else {
                hi[l] = last;
            }
        }
        self.scan_window(&lo, &hi, |idx| {
            let distance = self.distance(query, idx);
            if distance <= h {
                out.push(Neighbor { index: idx, distance, likelihood: 0.0 });
            }
        });
        sort_neighbors(out);
    }

    /// CSV dump: one row per fulcrum with its coordinates and likelihood.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|d| format!("x{d}")).collect();
        header.push("likelihood".into());
        w.write_record(&header)?;
        for (i, p) in self.points().enumerate() {
            let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            row.push(self.likelihoods().map_or(String::new(), |l| l[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn sort_neighbors(out: &mut [Neighbor]) {
    out.sort_unstable_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
}

fn fill_likelihoods(out: &mut [Neighbor], likelihoods: &[f64]) {
    for n in out.iter_mut() {
        n.likelihood = likelihoods[n.index];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ugm::Ugm1d;
    use proptest::prelude::*;

    fn spec_1d(a: f64, q: f64, resolution: f64) -> GridSpec {
        GridSpec {
            margin_scale: a,
            noise_scale: vec![q],
            resolution,
            count_override: vec![],
            active_dims: vec![0],
            max_points: DEFAULT_MAX_POINTS,
        }
    }

    fn ens_1d(xs: &[f64]) -> ParticleEnsemble {
        ParticleEnsemble::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn bounding_interval_examples() {
        let i = bounding_interval(&ens_1d(&[2.0, 5.0, 8.0]), 0, &spec_1d(1.0, 4.0, 1.0));
        assert_eq!(i, Interval { lo: 0.0, hi: 10.0 });
        let i = bounding_interval(&ens_1d(&[2.0, 5.0, 8.0]), 0, &spec_1d(0.0, 4.0, 1.0));
        assert_eq!(i, Interval { lo: 2.0, hi: 8.0 });
        let i = bounding_interval(&ens_1d(&[3.0]), 0, &spec_1d(1.0, 1.0, 1.0));
        assert_eq!(i, Interval { lo: 2.0, hi: 4.0 });
    }

    #[test]
    fn points_per_dimension_examples() {
        let i = Interval { lo: 0.0, hi: 10.0 };
        assert_eq!(points_per_dimension(&i, &spec_1d(1.0, 4.0, 1.0), 0), 3);
        assert_eq!(points_per_dimension(&i, &GridSpec::fixed(vec![0], 10, 1.0), 0), 10);
        let narrow = Interval { lo: 0.0, hi: 0.1 };
        assert_eq!(points_per_dimension(&narrow, &spec_1d(1.0, 1.0, 1.0), 0), 2);
    }

    #[test]
    fn one_dimensional_lattice() {
        let spec = GridSpec::fixed(vec![0], 6, 0.0);
        let grid = build_grid(&ens_1d(&[-1.0, 4.0, 9.0]), &spec, &[0.0]).unwrap();
        let xs: Vec<f64> = grid.points().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-1.0, 1.0, 3.0, 5.0, 7.0, 9.0]);
        assert_eq!(grid.spacing(), &[2.0]);
    }

    #[test]
    fn two_dimensional_product() {
        let mut spec = GridSpec::fixed(vec![0, 1], 3, 0.0);
        spec.count_override[1] = Some(2);
        let ens = ParticleEnsemble::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let grid = build_grid(&ens, &spec, &[0.5, 0.5]).unwrap();
        assert_eq!(grid.len(), 6);
        assert_eq!(grid.counts(), &[3, 2]);
    }

    #[test]
    fn planar_config_gives_one_hundred_fulcrums_with_pinned_heading() {
        let spec = GridSpec::fixed(vec![0, 1], 10, 1.0);
        let ens = ParticleEnsemble::new(3, vec![1.0, 2.0, 0.1, 3.0, 5.0, 0.3]).unwrap();
        let grid = build_grid(&ens, &spec, &[2.0, 3.5, 0.2]).unwrap();
        assert_eq!(grid.len(), 100);
        assert!(grid.points().all(|p| p[2] == 0.2));
    }

    #[test]
    fn unpartitioned_override_pins_the_dimension() {
        let mut spec = GridSpec::fixed(vec![0, 1], 4, 1.0);
        spec.count_override[1] = Some(1);
        let ens = ParticleEnsemble::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let grid = build_grid(&ens, &spec, &[0.5, 0.5]).unwrap();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid.active_dims(), &[0]);
        assert!(grid.points().all(|p| p[1] == 0.5));
    }

    #[test]
    fn grid_cap_refuses_with_count() {
        let mut spec = GridSpec::fixed(vec![0, 1], 2000, 1.0);
        spec.max_points = 1_000_000;
        let ens = ParticleEnsemble::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        match build_grid(&ens, &spec, &[0.0, 0.0]) {
            Err(Error::GridTooLarge { count, .. }) => assert_eq!(count, 4_000_000),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn evaluates_each_fulcrum_once() {
        let model = Ugm1d::default();
        let spec = GridSpec::fixed(vec![0], 2, 0.0);
        let mut grid = build_grid(&ens_1d(&[0.0, 2.0]), &spec, &[0.0]).unwrap();
        let calls = evaluate_fulcrums(&mut grid, &model, &[0.0]).unwrap();
        assert_eq!(calls, 2);
        let l = grid.likelihoods().unwrap();
        assert!((l[0] - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    fn scored_line(n: usize) -> FulcrumGrid {
        let spec = GridSpec::fixed(vec![0], n, 0.0);
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut grid = build_grid(&ens_1d(&xs), &spec, &[0.0]).unwrap();
        grid.set_likelihoods(xs.iter().map(|x| x / 10.0).collect()).unwrap();
        grid
    }

    #[test]
    fn neighbor_examples() {
        let grid = scored_line(10);
        let (n, _) = grid.nearest_fulcrums(&[4.0], NeighborQuery::Count(1)).unwrap();
        assert_eq!((n[0].index, n[0].distance), (4, 0.0));
        let (n, _) = grid.nearest_fulcrums(&[4.5], NeighborQuery::Count(2)).unwrap();
        assert_eq!(n.iter().map(|n| n.index).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(n[0].distance, n[1].distance);
        let (n, _) = grid.nearest_fulcrums(&[-3.0], NeighborQuery::Count(3)).unwrap();
        assert_eq!(n.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn empty_radius_query_falls_back_to_nearest() {
        let grid = scored_line(5);
        let (n, fallback) = grid.nearest_fulcrums(&[2.4], NeighborQuery::Radius(0.1)).unwrap();
        assert!(fallback);
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].index, 2);
    }

    fn brute_force(grid: &FulcrumGrid, q: &[f64], query: NeighborQuery) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..grid.len()).map(|i| (grid.distance(q, i), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match query {
            NeighborQuery::Count(k) => all.into_iter().take(k).map(|(_, i)| i).collect(),
            NeighborQuery::Radius(h) => all.into_iter().filter(|(d, _)| *d <= h).map(|(_, i)| i).collect(),
        }
    }

    proptest! {
        #[test]
        fn lattice_search_matches_brute_force(
            mx in 2usize..9, my in 2usize..9,
            qx in -3.0f64..12.0, qy in -3.0f64..12.0,
            k in 1usize..20, h in 0.1f64..6.0,
        ) {
            let mut spec = GridSpec::fixed(vec![0, 1], mx, 0.5);
            spec.count_override[1] = Some(my);
            let ens = ParticleEnsemble::new(2, vec![0.0, 0.0, 9.0, 7.0]).unwrap();
            let mut grid = build_grid(&ens, &spec, &[0.0, 0.0]).unwrap();
            grid.set_likelihoods(vec![1.0; grid.len()]).unwrap();
            for query in [NeighborQuery::Count(k), NeighborQuery::Radius(h)] {
                let (got, fallback) = grid.nearest_fulcrums(&[qx, qy], query).unwrap();
                let want = brute_force(&grid, &[qx, qy], query);
                if fallback {
                    prop_assert!(want.is_empty());
                } else {
                    prop_assert_eq!(got.iter().map(|n| n.index).collect::<Vec<_>>(), want);
                }
            }
        }

        #[test]
        fn grid_covers_particles_and_is_consistent(
            xs in prop::collection::vec(-50.0f64..50.0, 1..40),
            a in 0.0f64..3.0, q in 0.1f64..10.0, resolution in 0.2f64..5.0,
        ) {
            let ens = ens_1d(&xs);
            let spec = spec_1d(a, q, resolution);
            let grid = build_grid(&ens, &spec, &[0.0]).unwrap();
            let b = grid.bounds()[0];
            prop_assert!(xs.iter().all(|&x| b.contains(x)));
            let m = grid.counts()[0];
            let d = grid.spacing()[0];
            prop_assert!((d * (m - 1) as f64 - b.len()).abs() <= 1e-9 * b.len().max(1.0));
            let coords: Vec<f64> = grid.points().map(|p| p[0]).collect();
            if b.len() > 0.0 {
                prop_assert!(coords.windows(2).all(|w| w[1] > w[0]));
            }
        }

        #[test]
        fn k_nearest_matches_full_sort(
            counts in prop::collection::vec(1usize..6, 3),
            spread in prop::collection::vec(0.0f64..4.0, 3),
            q in prop::collection::vec(-3.0f64..7.0, 3),
            k in 1usize..12,
        ) {
            let states: Vec<f64> = [0.0, 0.0, 0.0].iter().chain(&spread).copied().collect();
            let ens = ParticleEnsemble::new(3, states).unwrap();
            let mut spec = GridSpec::fixed(vec![0, 1, 2], 1, 0.0);
            for (d, &c) in counts.iter().enumerate() {
                spec.count_override[d] = Some(c);
            }
            let mut grid = build_grid(&ens, &spec, &[0.0; 3]).unwrap();
            grid.set_likelihoods(vec![1.0; grid.len()]).unwrap();
            let (got, _) = grid.nearest_fulcrums(&q, NeighborQuery::Count(k)).unwrap();
            let mut all: Vec<(f64, usize)> = (0..grid.len()).map(|i| (grid.distance(&q, i), i)).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.truncate(k);
            let got: Vec<(f64, usize)> = got.iter().map(|n| (n.distance, n.index)).collect();
            prop_assert_eq!(got, all);
        }

        #[test]
        fn fixed_fulcrum_count_is_independent_of_particle_count(n in 1usize..500) {
            let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin() * 10.0).collect();
            let grid = build_grid(&ens_1d(&xs), &GridSpec::fixed(vec![0], 10, 1.0), &[0.0]).unwrap();
            prop_assert_eq!(grid.len(), 10);
        }
    }
}
