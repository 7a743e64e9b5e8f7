//! Finite-size analysis: Binder cumulants, crossings between sizes,
//! extrapolation of `T_c`, scaling fits and collapses, the mean-field line,
//! and assembly of `(ε, g)` phase-diagram grids.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};
use crate::rng;

/// `U₄ = 1 − m4 / (3 m2²)`.
pub fn binder_from_moments(m2: f64, m4: f64) -> Result<f64> {
    if !(m2 > 0.0) {
        return Err(Error::param("m2", "must be positive"));
    }
    Ok(1.0 - m4 / (3.0 * m2 * m2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinderSource {
    Exact,
    MonteCarlo,
    Diagonal,
}

impl BinderSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            BinderSource::Exact => "exact",
            BinderSource::MonteCarlo => "monte-carlo",
            BinderSource::Diagonal => "diagonal",
        }
    }
}

impl fmt::Display for BinderSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinderSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BinderSource::Exact),
            "monte-carlo" => Ok(BinderSource::MonteCarlo),
            "diagonal" => Ok(BinderSource::Diagonal),
            other => Err(Error::param("source", alloc::format!("unknown Binder source `{other}`"))),
        }
    }
}

/// `U₄` against a control parameter (T or ε) for one size.
#[derive(Debug, Clone, PartialEq)]
pub struct BinderCurve {
    pub size: usize,
    pub control: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub source: BinderSource,
}

impl BinderCurve {
    /// `control` must be strictly increasing; errors are nonnegative.
    pub fn new(size: usize, control: Vec<f64>, values: Vec<f64>, errors: Vec<f64>, source: BinderSource) -> Result<Self> {
        if control.len() != values.len() || control.len() != errors.len() {
            return Err(Error::SizeMismatch { expected: control.len(), got: values.len().min(errors.len()) });
        }
        if control.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: control.len() });
        }
        if control.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("control", "must be strictly increasing"));
        }
        if errors.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::param("errors", "must be nonnegative"));
        }
        Ok(BinderCurve { size, control, values, errors, source })
    }

    /// Indices where `U₄` leaves `[0, 2/3]` by more than three error bars.
    pub fn out_of_bounds(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&k| {
                let (v, e) = (self.values[k], 3.0 * self.errors[k]);
                v < -e || v > 2.0 / 3.0 + e
            })
            .collect()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        let lex = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(a.len().cmp(&b.len()))
        };
        self.size
            .cmp(&other.size)
            .then_with(|| lex(&self.control, &other.control))
            .then_with(|| lex(&self.values, &other.values))
            .then_with(|| lex(&self.errors, &other.errors))
    }
}

/// Shape-preserving piecewise cubic (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::SizeMismatch { expected: n, got: y.len() });
        }
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        if h.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::param("x", "must be strictly increasing"));
        }
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut m = vec![0.0; n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Ok(MonotoneCubic { x: x.to_vec(), y: y.to_vec(), m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Value at `t`, clamped to the end values outside the domain.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingOptions {
    pub resamples: usize,
    /// Bisection bracket width in control units.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        CrossingOptions { resamples: 200, tolerance: 1e-5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub control: f64,
    pub error: f64,
    /// `U₄` at the crossing (mean of both interpolants) and its resampled spread.
    pub u4: f64,
    pub u4_error: f64,
    /// Resamples in which a crossing was found.
    pub resamples_found: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossingResult {
    Found(Crossing),
    /// No sign change of `U₄^A − U₄^B` on the shared range.
    NoCrossing,
    /// The curves coincide on the shared range.
    Degenerate,
}

impl CrossingResult {
    pub fn found(&self) -> Option<&Crossing> {
        match self {
            CrossingResult::Found(c) => Some(c),
            _ => None,
        }
    }
}

/// Root of the difference of two interpolants, optionally close to `near`.
fn crossing_of(
    a: &MonotoneCubic,
    b: &MonotoneCubic,
    lo: f64,
    hi: f64,
    grid: &[f64],
    tolerance: f64,
    near: Option<f64>,
) -> Option<f64> {
    let d = |t: f64| a.eval(t) - b.eval(t);
    let vals: Vec<f64> = grid.iter().map(|&t| d(t)).collect();
    let mut best: Option<(f64, usize)> = None;
    for k in 0..grid.len().saturating_sub(1) {
        let (u, v) = (vals[k], vals[k + 1]);
        let brackets = (u <= 0.0 && v >= 0.0) || (u >= 0.0 && v <= 0.0);
        if !brackets || (u == 0.0 && v == 0.0) {
            continue;
        }
        let score = match near {
            Some(t) => -libm::fabs(0.5 * (grid[k] + grid[k + 1]) - t),
            None => libm::fabs(u) + libm::fabs(v),
        };
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, k));
        }
    }
    let (_, k) = best?;
    let (mut l, mut r) = (grid[k], grid[k + 1]);
    let mut fl = vals[k];
    if fl == 0.0 {
        return Some(l);
    }
    if vals[k + 1] == 0.0 {
        return Some(r);
    }
    while r - l > tolerance {
        let mid = 0.5 * (l + r);
        let fm = d(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm < 0.0) == (fl < 0.0) {
            l = mid;
            fl = fm;
        } else {
            r = mid;
        }
    }
    let root = 0.5 * (l + r);
    (root >= lo && root <= hi).then_some(root)
}

/// Crossing of two Binder curves. Symmetric in its arguments.
pub fn find_crossing(a: &BinderCurve, b: &BinderCurve) -> Result<CrossingResult> {
    find_crossing_with(a, b, CrossingOptions::default())
}

pub fn find_crossing_with(a: &BinderCurve, b: &BinderCurve, options: CrossingOptions) -> Result<CrossingResult> {
    let (a, b) = if a.key_cmp(b) == Ordering::Greater { (b, a) } else { (a, b) };
    let lo = a.control[0].max(b.control[0]);
    let hi = a.control[a.control.len() - 1].min(b.control[b.control.len() - 1]);
    if !(hi > lo) {
        return Ok(CrossingResult::NoCrossing);
    }
    let mut grid: Vec<f64> =
        a.control.iter().chain(&b.control).copied().filter(|&t| t >= lo && t <= hi).collect();
    grid.push(lo);
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let ia = MonotoneCubic::new(&a.control, &a.values)?;
    let ib = MonotoneCubic::new(&b.control, &b.values)?;
    if grid.iter().all(|&t| libm::fabs(ia.eval(t) - ib.eval(t)) < 1e-12) {
        return Ok(CrossingResult::Degenerate);
    }
    let Some(root) = crossing_of(&ia, &ib, lo, hi, &grid, options.tolerance, None) else {
        return Ok(CrossingResult::NoCrossing);
    };
    let u4 = 0.5 * (ia.eval(root) + ib.eval(root));

    let mut r = rng::seeded(options.seed ^ 0xc055_1a9e);
    let mut roots = Vec::with_capacity(options.resamples);
    let mut u4s = Vec::with_capacity(options.resamples);
    for _ in 0..options.resamples {
        let ya: Vec<f64> = a.values.iter().zip(&a.errors).map(|(v, e)| v + e * rng::normal(&mut r)).collect();
        let yb: Vec<f64> = b.values.iter().zip(&b.errors).map(|(v, e)| v + e * rng::normal(&mut r)).collect();
        let ra = MonotoneCubic::new(&a.control, &ya)?;
        let rb = MonotoneCubic::new(&b.control, &yb)?;
        if let Some(t) = crossing_of(&ra, &rb, lo, hi, &grid, options.tolerance, Some(root)) {
            roots.push(t);
            u4s.push(0.5 * (ra.eval(t) + rb.eval(t)));
        }
    }
    let spread = |v: &[f64]| {
        if v.len() < 2 {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64)
    };
    Ok(CrossingResult::Found(Crossing {
        control: root,
        error: spread(&roots),
        u4,
        u4_error: spread(&u4s),
        resamples_found: roots.len(),
    }))
}

/// One crossing between consecutive sizes, labelled by the smaller size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPoint {
    pub size: usize,
    pub control: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub tc: f64,
    /// statistical error of the intercept
    pub error: f64,
    /// `|intercept − intercept without the largest size|`, zero with two points
    pub systematic: f64,
    pub slope: f64,
    pub chi2: f64,
}

impl Extrapolation {
    pub fn total_error(&self) -> f64 {
        libm::sqrt(self.error * self.error + self.systematic * self.systematic)
    }
}

/// Weighted least squares `y = a + b x`; returns `(a, b, σ_a, χ²)`.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64, f64) {
    let s: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = s * sxx - sx * sx;
    let a = (sxx * sy - sx * sxy) / det;
    let b = (s * sxy - sx * sy) / det;
    let chi2 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (y - a - b * x) * (y - a - b * x)).sum();
    (a, b, libm::sqrt(sxx / det), chi2)
}

/// Weighted linear fit of crossing values against `1 / L_small`.
pub fn extrapolate_tc(points: &[CrossingPoint]) -> Result<Extrapolation> {
    if points.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: points.len() });
    }
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.size);
    if pts.windows(2).any(|w| w[0].size == w[1].size) {
        return Err(Error::param("crossings", "sizes must be distinct"));
    }
    let fit = |pts: &[CrossingPoint]| {
        let x: Vec<f64> = pts.iter().map(|p| 1.0 / p.size as f64).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.control).collect();
        let weighted = pts.iter().all(|p| p.error > 0.0);
        let w: Vec<f64> = pts.iter().map(|p| if weighted { 1.0 / (p.error * p.error) } else { 1.0 }).collect();
        let (a, b, sa, chi2) = weighted_line(&x, &y, &w);
        // unit weights carry no error scale; use the residual scatter instead
        let sa = if weighted {
            sa
        } else if pts.len() > 2 {
            sa * libm::sqrt(chi2 / (pts.len() - 2) as f64)
        } else {
            0.0
        };
        (a, b, sa, chi2)
    };
    let (tc, slope, error, chi2) = fit(&pts);
    let systematic = if pts.len() >= 3 { libm::fabs(fit(&pts[..pts.len() - 1]).0 - tc) } else { 0.0 };
    Ok(Extrapolation { tc, error, systematic, slope, chi2 })
}

/// Result of the two-stage fit `U₄,c(L) = b + c L^{−ω}` then
/// `T_c(L) = T_c (1 + a L^{−ω−θ_t})` with `ω` fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub tc: f64,
    pub a: f64,
    pub omega: f64,
    pub theta_t: f64,
    pub b: f64,
    pub c: f64,
    pub residual_u4: f64,
    pub residual_tc: f64,
    /// Degrees of freedom of each stage; zero-dof fits carry no errors.
    pub dof: usize,
    /// `(σ_b, σ_c, σ_ω)` and `(σ_Tc, σ_a, σ_θ)` when `dof > 0`.
    pub errors: Option<([f64; 3], [f64; 3])>,
}

impl ScalingFit {
    /// `T_c(L)` from the fitted form.
    pub fn tc_at(&self, size: f64) -> f64 {
        self.tc * (1.0 + self.a * libm::pow(size, -self.omega - self.theta_t))
    }
}

/// Linear least squares `y ≈ p0 + p1 x` (unit weights); returns `(p0, p1, rss)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let w = vec![1.0; x.len()];
    let (a, b, _, rss) = weighted_line(x, y, &w);
    (a, b, rss)
}

/// Minimizes `f` over `[lo, hi]`: coarse scan then golden-section refinement.
fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const N: usize = 400;
    let step = (hi - lo) / N as f64;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=N {
        let x = lo + k as f64 * step;
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a < 1e-13 * (1.0 + libm::fabs(a)) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    if f(x) <= best.0 {
        x
    } else {
        best.1
    }
}

/// `σ² (JᵀJ)⁻¹` diagonal for a 3-parameter model at its optimum.
fn covariance_diag(jac: &[[f64; 3]], rss: f64, dof: usize) -> Option<[f64; 3]> {
    let mut a = [[0.0; 3]; 3];
    for row in jac {
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if !(libm::fabs(det) > 0.0) {
        return None;
    }
    let inv_diag = [
        (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det,
        (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det,
        (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det,
    ];
    let s2 = rss / dof as f64;
    Some(inv_diag.map(|v| libm::sqrt(libm::fabs(v * s2))))
}

/// Two-stage scaling fit over crossing sizes `sizes` (smaller size of each pair).
pub fn scaling_fit(sizes: &[f64], t_cross: &[f64], u4_cross: &[f64]) -> Result<ScalingFit> {
    let n = sizes.len();
    if t_cross.len() != n || u4_cross.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: t_cross.len().min(u4_cross.len()) });
    }
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if sizes.iter().any(|&l| !(l > 1.0)) {
        return Err(Error::param("sizes", "must exceed 1"));
    }
    let powered = |p: f64| sizes.iter().map(|&l| libm::pow(l, -p)).collect::<Vec<f64>>();

    let rss_u = |omega: f64| line_fit(&powered(omega), u4_cross).2;
    let omega = minimize_1d(rss_u, 0.01, 6.0);
    let (b, c, residual_u4) = line_fit(&powered(omega), u4_cross);

    let rss_t = |theta: f64| line_fit(&powered(omega + theta), t_cross).2;
    let theta_t = minimize_1d(rss_t, 0.01 - omega, 6.0);
    let (tc, tca, residual_tc) = line_fit(&powered(omega + theta_t), t_cross);
    if !(tc.is_finite() && b.is_finite() && c.is_finite()) || tc == 0.0 {
        return Err(Error::FitFailure { reason: "degenerate scaling fit", residual: residual_tc });
    }
    let a = tca / tc;
    let dof = n - 3;
    let errors = if dof > 0 {
        let ju: Vec<[f64; 3]> = sizes
            .iter()
            .map(|&l| {
                let p = libm::pow(l, -omega);
                [1.0, p, -c * p * libm::log(l)]
            })
            .collect();
        let jt: Vec<[f64; 3]> = sizes
            .iter()
            .map(|&l| {
                let p = libm::pow(l, -omega - theta_t);
                [1.0 + a * p, tc * p, -tc * a * p * libm::log(l)]
            })
            .collect();
        covariance_diag(&ju, residual_u4, dof).zip(covariance_diag(&jt, residual_tc, dof))
    } else {
        None
    };
    Ok(ScalingFit { tc, a, omega, theta_t, b, c, residual_u4, residual_tc, dof, errors })
}

/// Mean spread of several curves on a common abscissa grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseReport {
    pub collapsed: f64,
    pub uncollapsed: f64,
}

const COLLAPSE_GRID: usize = 64;

/// Average over a common grid of the standard deviation across curves.
fn spread_on_common_grid(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    let interps: Vec<MonotoneCubic> =
        xs.iter().zip(ys).map(|(x, y)| MonotoneCubic::new(x, y)).collect::<Result<_>>()?;
    let lo = interps.iter().map(|i| i.domain().0).fold(f64::NEG_INFINITY, f64::max);
    let hi = interps.iter().map(|i| i.domain().1).fold(f64::INFINITY, f64::min);
    if !(hi > lo) {
        return Err(Error::FitFailure { reason: "curves share no abscissa range", residual: hi - lo });
    }
    let k = interps.len() as f64;
    let mut total = 0.0;
    for g in 0..COLLAPSE_GRID {
        let t = lo + (hi - lo) * g as f64 / (COLLAPSE_GRID - 1) as f64;
        let v: Vec<f64> = interps.iter().map(|i| i.eval(t)).collect();
        let m = v.iter().sum::<f64>() / k;
        total += libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0));
    }
    Ok(total / COLLAPSE_GRID as f64)
}

/// Spread of `U₄` curves against `(T − T_c(L)) L^{θ_t}` versus against raw `T`.
pub fn collapse_spread(curves: &[BinderCurve], tc_by_size: &[f64], theta_t: f64) -> Result<CollapseReport> {
    if curves.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: curves.len() });
    }
    if tc_by_size.len() != curves.len() {
        return Err(Error::SizeMismatch { expected: curves.len(), got: tc_by_size.len() });
    }
    let ys: Vec<Vec<f64>> = curves.iter().map(|c| c.values.clone()).collect();
    let raw: Vec<Vec<f64>> = curves.iter().map(|c| c.control.clone()).collect();
    let scaled: Vec<Vec<f64>> = curves
        .iter()
        .zip(tc_by_size)
        .map(|(c, &tc)| {
            let f = libm::pow(c.size as f64, theta_t);
            c.control.iter().map(|t| (t - tc) * f).collect()
        })
        .collect();
    Ok(CollapseReport {
        collapsed: spread_on_common_grid(&scaled, &ys)?,
        uncollapsed: spread_on_common_grid(&raw, &ys)?,
    })
}

/// Mean-field critical temperature `g / arctanh(g)` (units of J); `1` at
/// `g = 0` and `0` for `|g| ≥ 1`.
pub fn mean_field_tc(g: f64) -> f64 {
    let g = libm::fabs(g);
    if g >= 1.0 {
        0.0
    } else if g < 1e-6 {
        1.0 - g * g / 3.0
    } else {
        g / libm::atanh(g)
    }
}

/// Mean-field `T_c` for couplings whose largest eigenvalue is `lambda`:
/// `λ · mean_field_tc(g / λ)`.
pub fn mean_field_tc_scaled(g: f64, lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 0.0;
    }
    lambda * mean_field_tc(g / lambda)
}

/// Which control parameter a phase-diagram axis holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlAxis {
    EnergyDensity,
    Temperature,
}

/// One input cell for [`assemble_phase_diagram`]; `None` marks energies with no states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub field: f64,
    pub control: f64,
    pub sx2: Option<f64>,
    pub sz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub field: f64,
    pub temperature: f64,
    pub temperature_error: f64,
    pub energy_density: Option<f64>,
    pub energy_error: Option<f64>,
    /// Always true for desk-scale sizes: not a thermodynamic-limit value.
    pub small_l_estimate: bool,
}

/// `S_x²` and `S_z` on a rectangular `(g, control)` grid, row-major by field.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagramGrid {
    pub axis: ControlAxis,
    pub ensemble: EnsembleKind,
    pub fields: Vec<f64>,
    pub controls: Vec<f64>,
    pub sx2: Vec<Option<f64>>,
    pub sz: Vec<Option<f64>>,
    pub critical: Vec<CriticalPoint>,
}

impl PhaseDiagramGrid {
    pub fn cell(&self, field_index: usize, control_index: usize) -> (Option<f64>, Option<f64>) {
        let k = field_index * self.controls.len() + control_index;
        (self.sx2[k], self.sz[k])
    }
}

/// Arranges cells on their `(g, control)` grid; every combination must appear once.
pub fn assemble_phase_diagram(
    cells: &[PhaseCell],
    axis: ControlAxis,
    ensemble: EnsembleKind,
    critical: Vec<CriticalPoint>,
) -> Result<PhaseDiagramGrid> {
    if cells.is_empty() {
        return Err(Error::RaggedGrid("no cells".into()));
    }
    let uniq = |f: fn(&PhaseCell) -> f64| {
        let mut v: Vec<f64> = cells.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let fields = uniq(|c| c.field);
    let controls = uniq(|c| c.control);
    let n = fields.len() * controls.len();
    if cells.len() != n {
        return Err(Error::RaggedGrid(alloc::format!(
            "{} cells for {} fields × {} controls",
            cells.len(),
            fields.len(),
            controls.len()
        )));
    }
    let mut sx2 = vec![None; n];
    let mut sz = vec![None; n];
    let mut seen = vec![false; n];
    for c in cells {
        let i = fields.binary_search_by(|v| v.total_cmp(&c.field)).unwrap();
        let j = controls.binary_search_by(|v| v.total_cmp(&c.control)).unwrap();
        let k = i * controls.len() + j;
        if seen[k] {
            return Err(Error::RaggedGrid(alloc::format!("duplicate cell g={} control={}", c.field, c.control)));
        }
        seen[k] = true;
        sx2[k] = c.sx2;
        sz[k] = c.sz;
    }
    Ok(PhaseDiagramGrid { axis, ensemble, fields, controls, sx2, sz, critical })
}
