//! Statistical and numerical utilities: empirical samples, density curves and
//! CDFs, Kolmogorov-Smirnov distance, histograms, adaptive quadrature, and
//! log-log scaling-exponent fits.

use crate::error::{PhaseLabError, Result};
use crate::tol;

/// A finite sample of real values, kept sorted.
#[derive(Debug, Clone)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(PhaseLabError::InvalidParameter("empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PhaseLabError::InvalidParameter(
                "sample contains non-finite values".into(),
            ));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    /// Linear-interpolation quantile, q in [0,1].
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(PhaseLabError::InvalidParameter(format!(
                "quantile must be in [0,1], got {q}"
            )));
        }
        let pos = q * (self.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        Ok(self.values[lo] * (1.0 - frac) + self.values[hi] * frac)
    }

    pub fn interquartile_range(&self) -> f64 {
        self.quantile(0.75).unwrap() - self.quantile(0.25).unwrap()
    }
}

/// A sampled density over a strictly increasing grid.
///
/// `normalization` is the trapezoid integral of the curve, computed at
/// construction so the invariant holds by definition; callers that expect a
/// specific total mass check it with `check_mass`.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    grid: Vec<f64>,
    density: Vec<f64>,
    normalization: f64,
}

impl DensityCurve {
    pub fn new(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if grid.len() != density.len() || grid.len() < 2 {
            return Err(PhaseLabError::InvalidParameter(
                "grid and density must have equal length >= 2".into(),
            ));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PhaseLabError::InvalidParameter(
                "grid must be strictly increasing".into(),
            ));
        }
        if density.iter().any(|&d| !d.is_finite() || d < -1e-12) {
            return Err(PhaseLabError::InvalidParameter(
                "density must be finite and nonnegative".into(),
            ));
        }
        let density: Vec<f64> = density.into_iter().map(|d| d.max(0.0)).collect();
        let normalization = trapezoid(&grid, &density);
        Ok(Self {
            grid,
            density,
            normalization,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Verify the trapezoid mass against an expected value.
    pub fn check_mass(&self, expected: f64, tolerance: f64) -> Result<()> {
        let diff = (self.normalization - expected).abs();
        if diff > tolerance {
            return Err(PhaseLabError::NumericalContract(format!(
                "curve mass {:.6} differs from expected {:.6} by {:.3e} (tolerance {:.1e}); \
                 widen the grid window",
                self.normalization, expected, diff, tolerance
            )));
        }
        Ok(())
    }

    /// Cumulative integral of the curve, from the left grid edge.
    pub fn cdf(&self) -> Cdf {
        let mut values = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        values.push(0.0);
        for i in 1..self.grid.len() {
            acc += 0.5 * (self.density[i] + self.density[i - 1]) * (self.grid[i] - self.grid[i - 1]);
            values.push(acc);
        }
        Cdf {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Piecewise-linear monotone CDF on a grid.
#[derive(Debug, Clone)]
pub struct Cdf {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl Cdf {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(PhaseLabError::InvalidParameter(
                "grid and values must have equal length >= 2".into(),
            ));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PhaseLabError::InvalidParameter(
                "grid must be strictly increasing".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(PhaseLabError::InvalidParameter(
                "CDF values must be non-decreasing".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Evaluate by linear interpolation, clamped to the end values.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.grid[0] {
            return self.values[0];
        }
        if x >= *self.grid.last().unwrap() {
            return self.total();
        }
        let idx = self.grid.partition_point(|&g| g <= x);
        let (x0, x1) = (self.grid[idx - 1], self.grid[idx]);
        let (y0, y1) = (self.values[idx - 1], self.values[idx]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Trapezoid rule on an arbitrary grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}

/// Kolmogorov-Smirnov distance between an empirical sample and a reference
/// CDF (which must reach total mass ~1 to be comparable).
pub fn ks_distance(sample: &EmpiricalSample, reference: &Cdf) -> Result<f64> {
    let n = sample.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in sample.values().iter().enumerate() {
        let f = reference.eval(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(worst)
}

/// Histogram of values on [lo, hi) with equal bins, as a density curve over
/// bin centers. Out-of-range values count toward the sample size, so the
/// in-range trapezoid mass reports the captured fraction.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<DensityCurve> {
    if bins < 2 || !(lo < hi) {
        return Err(PhaseLabError::InvalidParameter(
            "need bins >= 2 and lo < hi".into(),
        ));
    }
    if values.is_empty() {
        return Err(PhaseLabError::InvalidParameter("empty sample".into()));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v >= lo && v < hi {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let n = values.len() as f64;
    let grid: Vec<f64> = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    DensityCurve::new(grid, density)
}

/// Power-law fit value = prefactor * n^exponent via least squares in log-log.
#[derive(Debug, Clone, Copy)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Fit with the smallest `skip` n values excluded (transient regime).
pub fn scaling_exponent_skip(points: &[(f64, f64)], skip: usize) -> Result<ScalingFit> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < skip + 4 {
        return Err(PhaseLabError::InvalidParameter(format!(
            "need at least {} points with distinct n, got {}",
            skip + 4,
            pts.len()
        )));
    }
    let pts = &pts[skip..];
    if pts.iter().any(|&(n, v)| n <= 0.0 || v <= 0.0) {
        return Err(PhaseLabError::InvalidParameter(
            "scaling fit requires positive n and values".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let m = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    let mean_y = sy / m;
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(ScalingFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}

/// Fit with the default exclusion of the two smallest n values.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    scaling_exponent_skip(points, 2)
}

const MAX_QUAD_DEPTH: u32 = 40;

fn simpson(_f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tolerance: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(f, a, fa, m, fm, flm);
    let right = simpson(f, m, fm, b, fb, frm);
    let err = (left + right - whole) / 15.0;
    if err.abs() <= tolerance || depth >= MAX_QUAD_DEPTH {
        if depth >= MAX_QUAD_DEPTH {
            *worst = worst.max(err.abs());
        }
        return left + right + err;
    }
    adaptive_step(f, a, fa, m, fm, flm, left, tolerance / 2.0, depth + 1, worst)
        + adaptive_step(f, m, fm, b, fb, frm, right, tolerance / 2.0, depth + 1, worst)
}

/// Adaptive Simpson quadrature with absolute-error target `tolerance`.
///
/// On depth exhaustion the best estimate is reported inside the error along
/// with the achieved tolerance.
pub fn adaptive_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, tolerance: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || tolerance <= 0.0 {
        return Err(PhaseLabError::InvalidParameter(
            "quadrature needs finite bounds and positive tolerance".into(),
        ));
    }
    if a == b {
        return Ok(0.0);
    }
    let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fref = &f as &dyn Fn(f64) -> f64;
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
        return Err(PhaseLabError::InvalidParameter(
            "integrand not finite on [a,b]".into(),
        ));
    }
    let whole = simpson(fref, a, fa, b, fb, fm);
    let mut worst = 0.0f64;
    let value = adaptive_step(fref, a, fa, b, fb, fm, whole, tolerance, 0, &mut worst);
    if worst > tolerance {
        return Err(PhaseLabError::NumericalContract(format!(
            "quadrature did not converge: best estimate {value:.17e}, achieved tolerance {worst:.3e} > requested {tolerance:.3e}"
        )));
    }
    Ok(sign * value)
}

/// Convenience: quadrature with the default absolute tolerance for special
/// functions.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    adaptive_quadrature(f, a, b, tol::SI_ABS)
}
