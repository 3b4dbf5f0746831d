//! Linear-in-parameters least-squares fitting of fulcrum data.
//!
//! Fits `f(x) = sum_i c_i b_i(x)` by Householder QR on a column-scaled
//! design matrix; the normal equations are never formed.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Interval;

/// Relative size below which an R diagonal marks a dependent column.
const RANK_TOL: f64 = 1e-10;

/// Floor applied before taking logs of likelihoods.
pub const LOG_FLOOR: f64 = 1e-300;

/// A named scalar basis function for [`Basis::Custom`].
#[derive(Clone)]
pub struct BasisFn {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl BasisFn {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }
}

/// Custom basis functions compare by name.
impl PartialEq for BasisFn {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl fmt::Debug for BasisFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BasisFn({})", self.name)
    }
}

/// The functions `b_1..b_k` a fit is linear in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Basis {
    /// `1, x, ..., x^degree`; degree 2 is the trinomial `c1 + c2 x + c3 x^2`.
    Polynomial { degree: usize },
    /// The single term `x^power`, e.g. `c x^2` when the form is known.
    Monomial { power: u32 },
    #[serde(skip)]
    Custom(Vec<BasisFn>),
}

impl Basis {
    pub fn trinomial() -> Self {
        Basis::Polynomial { degree: 2 }
    }

    /// Number of coefficients `k`.
    pub fn order(&self) -> usize {
        match self {
            Basis::Polynomial { degree } => degree + 1,
            Basis::Monomial { .. } => 1,
            Basis::Custom(fs) => fs.len(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Basis::Polynomial { degree } => format!("polynomial{degree}"),
            Basis::Monomial { power } => format!("monomial{power}"),
            Basis::Custom(fs) => {
                let names: Vec<&str> = fs.iter().map(|f| f.name.as_str()).collect();
                format!("custom[{}]", names.join(";"))
            }
        }
    }

    /// Writes `b_1(x)..b_k(x)` into `row`.
    pub fn eval_row(&self, x: f64, row: &mut [f64]) {
        match self {
            Basis::Polynomial { .. } => {
                let mut p = 1.0;
                for r in row.iter_mut() {
                    *r = p;
                    p *= x;
                }
            }
            Basis::Monomial { power } => row[0] = x.powi(*power as i32),
            Basis::Custom(fs) => {
                for (r, f) in row.iter_mut().zip(fs) {
                    *r = (f.f)(x);
                }
            }
        }
    }

    /// `sum_i c_i b_i(x)`.
    pub fn combine(&self, coefficients: &[f64], x: f64) -> f64 {
        match self {
            Basis::Polynomial { .. } => coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Basis::Monomial { power } => coefficients[0] * x.powi(*power as i32),
            Basis::Custom(fs) => fs.iter().zip(coefficients).map(|(f, c)| c * (f.f)(x)).sum(),
        }
    }
}

/// An explicit fitted function with its residual statistics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub basis: Basis,
    pub coefficients: Vec<f64>,
    /// `||d||_2` over the fitting data.
    pub residual_norm: f64,
    pub rms_residual: f64,
    /// Abscissa range of the fitting data.
    pub domain: Interval,
    /// Fewer than `3k` points were available.
    pub low_redundancy: bool,
}

/// A fitted value and whether it was extrapolated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitValue {
    pub value: f64,
    pub extrapolated: bool,
}

impl FitResult {
    /// A fit with known coefficients and no fitting data.
    pub fn exact(basis: Basis, coefficients: Vec<f64>) -> Self {
        Self {
            basis,
            coefficients,
            residual_norm: 0.0,
            rms_residual: 0.0,
            domain: Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY },
            low_redundancy: false,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.basis.combine(&self.coefficients, x)
    }

    pub fn evaluate(&self, x: f64) -> FitValue {
        FitValue { value: self.value(x), extrapolated: !self.domain.contains(x) }
    }
}

pub fn evaluate_fit(fit: &FitResult, x: f64) -> FitValue {
    fit.evaluate(x)
}

/// Least-squares fit of `points` in `basis`. Needs at least `k + 1` points
/// with distinct abscissae.
pub fn least_squares_fit(points: &[(f64, f64)], basis: &Basis) -> Result<FitResult> {
    let k = basis.order();
    let m = points.len();
    if k == 0 {
        return Err(Error::InvalidArgument("basis has no functions".into()));
    }
    if m < k + 1 {
        return Err(Error::TooFewPoints { required: k + 1, got: m });
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    if lo == hi {
        return Err(Error::DegenerateAbscissae { x: lo });
    }

    // column-major design matrix
    let mut a = vec![0.0; m * k];
    let mut row = vec![0.0; k];
    for (r, &(x, _)) in points.iter().enumerate() {
        basis.eval_row(x, &mut row);
        for c in 0..k {
            a[c * m + r] = row[c];
        }
    }
    let mut b: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let coefficients = solve_qr(&mut a, &mut b, m, k)?;

    let residuals = points.iter().map(|&(x, y)| y - basis.combine(&coefficients, x));
    let ss: f64 = residuals.map(|d| d * d).sum();
    Ok(FitResult {
        basis: basis.clone(),
        coefficients,
        residual_norm: ss.sqrt(),
        rms_residual: (ss / m as f64).sqrt(),
        domain: Interval { lo, hi },
        low_redundancy: m < 3 * k,
    })
}

/// Solves `min ||A c - b||` for column-major `A` (`m x k`, `m > k`) in place.
fn solve_qr(a: &mut [f64], b: &mut [f64], m: usize, k: usize) -> Result<Vec<f64>> {
    let mut scale = vec![0.0; k];
    let mut deficient = Vec::new();
    for c in 0..k {
        let col = &mut a[c * m..(c + 1) * m];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            deficient.push(c);
            scale[c] = 1.0;
        } else {
            col.iter_mut().for_each(|v| *v /= norm);
            scale[c] = norm;
        }
    }
    if !deficient.is_empty() {
        return Err(Error::RankDeficient { columns: deficient });
    }

    let mut diag = vec![0.0; k];
    for j in 0..k {
        let (head, tail) = a.split_at_mut((j + 1) * m);
        let col = &mut head[j * m..];
        let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[j] = 0.0;
            continue;
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place; beta = 2 / v'v
        col[j] -= alpha;
        let vtv: f64 = col[j..].iter().map(|v| v * v).sum();
        diag[j] = alpha;
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for c in 0..(k - j - 1) {
            let other = &mut tail[c * m..(c + 1) * m];
            let dot: f64 = col[j..].iter().zip(&other[j..]).map(|(v, o)| v * o).sum();
            for (o, v) in other[j..].iter_mut().zip(&col[j..]) {
                *o -= beta * dot * v;
            }
        }
        let dot: f64 = col[j..].iter().zip(&b[j..]).map(|(v, o)| v * o).sum();
        for (o, v) in b[j..].iter_mut().zip(&col[j..]) {
            *o -= beta * dot * v;
        }
    }

    let max_diag = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let deficient: Vec<usize> = (0..k).filter(|&j| diag[j].abs() <= RANK_TOL * max_diag).collect();
    if !deficient.is_empty() {
        return Err(Error::RankDeficient { columns: deficient });
    }

    // back substitution on R (diagonal in `diag`, strict upper part in `a`)
    let mut z = vec![0.0; k];
    for j in (0..k).rev() {
        let mut s = b[j];
        for c in (j + 1)..k {
            s -= a[c * m + j] * z[c];
        }
        z[j] = s / diag[j];
    }
    Ok(z.iter().zip(&scale).map(|(z, s)| z / s).collect())
}

/// A sequence of same-basis fits over contiguous intervals.
#[derive(Debug, Clone)]
pub struct PiecewiseFit {
    /// Ascending join points `x_1..x_{r+1}`.
    pub joins: Vec<f64>,
    pub segments: Vec<FitResult>,
}

impl PiecewiseFit {
    fn segment_for(&self, x: f64) -> usize {
        let r = self.segments.len();
        // first segment whose right join is >= x
        self.joins[1..].partition_point(|&j| j < x).min(r - 1)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.segments[self.segment_for(x)].value(x)
    }

    pub fn evaluate(&self, x: f64) -> FitValue {
        FitValue { value: self.value(x), extrapolated: x < self.joins[0] || x > self.joins[self.joins.len() - 1] }
    }
}

/// `r + 1` equally spaced join points over `[lo, hi]`.
pub fn equal_width_joins(lo: f64, hi: f64, r: usize) -> Vec<f64> {
    let width = (hi - lo) / r as f64;
    (0..=r).map(|i| if i == r { hi } else { lo + i as f64 * width }).collect()
}

/// Fits each interval `[joins[i], joins[i+1]]` separately. Points on a join
/// belong to both neighbors; every interval needs at least `k + 2` points.
pub fn piecewise_fit(points: &[(f64, f64)], basis: &Basis, joins: &[f64]) -> Result<PiecewiseFit> {
    if joins.len() < 2 || joins.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("join points must be strictly ascending, at least two".into()));
    }
    let required = basis.order() + 2;
    let mut segments = Vec::with_capacity(joins.len() - 1);
    for (index, w) in joins.windows(2).enumerate() {
        let (lo, hi) = (w[0], w[1]);
        let data: Vec<(f64, f64)> = points.iter().copied().filter(|&(x, _)| x >= lo && x <= hi).collect();
        if data.len() < required {
            return Err(Error::UnderpopulatedInterval { index, lo, hi, got: data.len(), required });
        }
        segments.push(least_squares_fit(&data, basis)?);
    }
    Ok(PiecewiseFit { joins: joins.to_vec(), segments })
}

/// `exp(-r^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)`.
#[inline]
pub fn gaussian_density(residual: f64, sigma: f64) -> f64 {
    let z = residual / sigma;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Likelihood of a scalar observation under a fitted observation function
/// with additive Gaussian noise.
#[derive(Debug, Clone)]
pub struct GaussianLikelihood {
    pub fit: FitResult,
    pub y_obs: f64,
    pub sigma: f64,
}

impl GaussianLikelihood {
    pub fn eval(&self, x: f64) -> f64 {
        gaussian_density(self.y_obs - self.fit.value(x), self.sigma)
    }
}

pub fn compose_gaussian_likelihood(fit: FitResult, y_obs: f64, sigma: f64) -> Result<GaussianLikelihood> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    Ok(GaussianLikelihood { fit, y_obs, sigma })
}

/// Elementwise natural log after flooring at [`LOG_FLOOR`].
pub fn log_linearize(likelihoods: &[f64]) -> Vec<f64> {
    likelihoods.iter().map(|&l| l.max(LOG_FLOOR).ln()).collect()
}

/// Taylor truncation bound `B h^(n+1) / (n+1)!`.
pub fn lagrange_remainder_bound(deriv_bound: f64, halfwidth: f64, order: u32) -> f64 {
    let factorial: f64 = (1..=order + 1).map(f64::from).product();
    deriv_bound * halfwidth.powi(order as i32 + 1) / factorial
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub rms_residual: f64,
    pub max_abs_residual: f64,
    /// `None` when the data has zero variance and the residuals are not zero.
    pub r_squared: Option<f64>,
}

/// Residual statistics of `f` against `points`.
pub fn residual_diagnostics(points: &[(f64, f64)], f: impl Fn(f64) -> f64) -> Result<FitDiagnostics> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { required: 1, got: 0 });
    }
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut ss_res, mut ss_tot, mut max_abs) = (0.0, 0.0, 0.0f64);
    for &(x, y) in points {
        let d = y - f(x);
        ss_res += d * d;
        ss_tot += (y - mean) * (y - mean);
        max_abs = max_abs.max(d.abs());
    }
    let r_squared = if ss_tot > 0.0 {
        Some(1.0 - ss_res / ss_tot)
    } else if ss_res == 0.0 {
        Some(1.0)
    } else {
        None
    };
    Ok(FitDiagnostics { rms_residual: (ss_res / n).sqrt(), max_abs_residual: max_abs, r_squared })
}

pub fn fit_diagnostics(fit: &FitResult, points: &[(f64, f64)]) -> Result<FitDiagnostics> {
    residual_diagnostics(points, |x| fit.value(x))
}
