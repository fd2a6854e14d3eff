//! Noiseless covariant phase estimation: input-state profiles on [0,1],
//! coefficient spectra, exact error functionals (tridiagonal / pentadiagonal
//! quadratic forms vs direct quadrature), exact outcome densities, and the
//! Fourier limiting distribution with its windowed tail averages.

use crate::error::{PhaseLabError, Result};
use crate::stats::{adaptive_quadrature, trapezoid, DensityCurve};
use crate::tol;
use crate::Complex;
use std::f64::consts::PI;

/// Envelope function f on [0,1] with unit L2 norm.
#[derive(Debug, Clone)]
pub enum ProfileFunction {
    /// f(x) = 1.
    Uniform,
    /// f(x) = sqrt(2) sin(pi x).
    Sine,
    /// Linear interpolation of samples on a strictly increasing grid covering
    /// [0,1]; renormalized to unit L2 norm at construction.
    Samples { x: Vec<f64>, f: Vec<f64> },
}

impl ProfileFunction {
    /// Build from samples, verifying the grid and renormalizing.
    pub fn from_samples(x: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if x.len() != f.len() || x.len() < 2 {
            return Err(PhaseLabError::InvalidParameter(
                "need matching x/f columns with at least 2 rows".into(),
            ));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PhaseLabError::InvalidParameter(
                "profile grid must be strictly increasing".into(),
            ));
        }
        if (x[0] - 0.0).abs() > 1e-9 || (x[x.len() - 1] - 1.0).abs() > 1e-9 {
            return Err(PhaseLabError::InvalidParameter(
                "profile grid must cover [0,1]".into(),
            ));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(PhaseLabError::InvalidParameter(
                "profile values must be finite".into(),
            ));
        }
        let norm_sq = piecewise_linear_l2_sq(&x, &f);
        if norm_sq <= 1e-24 {
            return Err(PhaseLabError::InvalidParameter(
                "profile is identically zero".into(),
            ));
        }
        let scale = norm_sq.sqrt().recip();
        let f = f.into_iter().map(|v| v * scale).collect();
        Ok(Self::Samples { x, f })
    }

    /// Load a two-column (x, f(x)) plain-text file; comma or whitespace
    /// separated, `#` lines ignored.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if parts.len() != 2 {
                return Err(PhaseLabError::InvalidParameter(format!(
                    "profile file line {}: expected two columns, got {}",
                    lineno + 1,
                    parts.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    PhaseLabError::InvalidParameter(format!(
                        "profile file line {}: cannot parse '{s}'",
                        lineno + 1
                    ))
                })
            };
            xs.push(parse(parts[0])?);
            fs.push(parse(parts[1])?);
        }
        Self::from_samples(xs, fs)
    }

    /// Evaluate f at x in [0,1].
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Uniform => 1.0,
            Self::Sine => std::f64::consts::SQRT_2 * (PI * x).sin(),
            Self::Samples { x: xs, f } => {
                if x <= xs[0] {
                    return f[0];
                }
                if x >= xs[xs.len() - 1] {
                    return f[f.len() - 1];
                }
                let idx = xs.partition_point(|&g| g <= x);
                let (x0, x1) = (xs[idx - 1], xs[idx]);
                let (y0, y1) = (f[idx - 1], f[idx]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Uniform samples of f on [0,1] (count must be >= 2).
    pub fn sample_uniform(&self, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| self.eval(i as f64 / (count - 1) as f64))
            .collect()
    }

    /// L2 normalization defect |integral(f^2) - 1|.
    pub fn norm_defect(&self) -> f64 {
        match self {
            // integral of 1 and of 2 sin^2(pi x) over [0,1] are both exactly 1.
            Self::Uniform | Self::Sine => 0.0,
            Self::Samples { x, f } => (piecewise_linear_l2_sq(x, f) - 1.0).abs(),
        }
    }

    /// Whether f vanishes at both endpoints (Dirichlet boundary condition).
    pub fn is_dirichlet(&self) -> bool {
        self.eval(0.0).abs() <= tol::DIRICHLET && self.eval(1.0).abs() <= tol::DIRICHLET
    }
}

/// Coefficient vector a_0..a_n of the input state, unit norm.
#[derive(Debug, Clone)]
pub struct InputSpectrum {
    coefficients: Vec<Complex>,
}

/// Exact integral of the square of the linear interpolant of (x, f).
fn piecewise_linear_l2_sq(x: &[f64], f: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..x.len() {
        let h = x[i] - x[i - 1];
        let (a, b) = (f[i - 1], f[i]);
        acc += h / 3.0 * (a * a + a * b + b * b);
    }
    acc
}

impl InputSpectrum {
    pub fn new(coefficients: Vec<Complex>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(PhaseLabError::InvalidParameter("empty spectrum".into()));
        }
        let norm_sq: f64 = coefficients.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tol::UNIT_NORM {
            return Err(PhaseLabError::InvalidState(format!(
                "spectrum squared norm = {norm_sq}, expected 1"
            )));
        }
        Ok(Self { coefficients })
    }

    /// Normalize arbitrary coefficients; rejects the zero vector.
    pub fn from_unnormalized(coefficients: Vec<Complex>) -> Result<(Self, f64)> {
        let norm_sq: f64 = coefficients.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq <= 1e-24 {
            return Err(PhaseLabError::InvalidParameter(
                "spectrum coefficients are all (numerically) zero".into(),
            ));
        }
        let norm = norm_sq.sqrt();
        let scaled = coefficients
            .into_iter()
            .map(|z| z / Complex::new(norm, 0.0))
            .collect();
        Ok((Self {
            coefficients: scaled,
        }, norm))
    }

    pub fn coefficients(&self) -> &[Complex] {
        &self.coefficients
    }

    /// Highest index n (spectrum has n+1 coefficients).
    pub fn n(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Amplitude sum  A(phi) = sum_m a_m e^{i m phi}  via phase recurrence.
    pub fn amplitude(&self, phi: f64) -> Complex {
        let step = Complex::from_polar(1.0, phi);
        let mut phase = Complex::new(1.0, 0.0);
        let mut acc = Complex::new(0.0, 0.0);
        for &a in &self.coefficients {
            acc += a * phase;
            phase *= step;
        }
        acc
    }

    /// Outcome density |A(phi)|^2 / 2 pi.
    pub fn density_at(&self, phi: f64) -> f64 {
        self.amplitude(phi).norm_sqr() / (2.0 * PI)
    }

    /// Autocorrelation c_d = sum_m a_{m+d} conj(a_m), d = 0..n.
    pub fn autocorrelation(&self) -> Vec<Complex> {
        let n = self.coefficients.len();
        (0..n)
            .map(|d| {
                (0..n - d)
                    .map(|m| self.coefficients[m + d] * self.coefficients[m].conj())
                    .sum()
            })
            .collect()
    }
}

/// Exact interval probabilities of the outcome density, from the spectrum's
/// autocorrelation: the density is the finite Fourier series
/// (1/2pi) sum_d c_d e^{i d phi}, integrable in closed form.
#[derive(Debug, Clone)]
pub struct ExactOutcomeCdf {
    c: Vec<Complex>,
}

impl ExactOutcomeCdf {
    pub fn new(a: &InputSpectrum) -> Self {
        Self {
            c: a.autocorrelation(),
        }
    }

    /// P{phi in [u, v]} for -pi <= u <= v <= pi.
    pub fn interval_probability(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(-PI, PI);
        let v = v.clamp(-PI, PI);
        if v <= u {
            return 0.0;
        }
        let mut p = (v - u) / (2.0 * PI) * self.c[0].re;
        for (d, &cd) in self.c.iter().enumerate().skip(1) {
            let df = d as f64;
            let integral = (Complex::from_polar(1.0, df * v) - Complex::from_polar(1.0, df * u))
                / Complex::new(0.0, 2.0 * PI * df);
            p += 2.0 * (cd * integral).re;
        }
        p.clamp(0.0, 1.0)
    }
}

/// Error weight as a function of the estimation error phi.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKernel {
    /// sin^2(phi / 2) — the tridiagonal quadratic form.
    HalfAngle,
    /// sin^2(phi) — the pentadiagonal quadratic form.
    FullAngle,
}

impl ErrorKernel {
    pub fn eval(&self, phi: f64) -> f64 {
        match self {
            Self::HalfAngle => (phi / 2.0).sin().powi(2),
            Self::FullAngle => phi.sin().powi(2),
        }
    }

    /// Coefficient offset of the banded quadratic form (1 or 2).
    fn band(&self) -> usize {
        match self {
            Self::HalfAngle => 1,
            Self::FullAngle => 2,
        }
    }
}

/// a_m = f(m/n)/sqrt(n+1), renormalized; also returns the renormalization
/// factor (1 + O(1/n) for smooth unit-norm f).
pub fn spectrum_from_profile(f: &ProfileFunction, n: usize) -> Result<(InputSpectrum, f64)> {
    if n < 1 {
        return Err(PhaseLabError::InvalidParameter("n must be >= 1".into()));
    }
    let scale = ((n + 1) as f64).sqrt().recip();
    let coeffs: Vec<Complex> = (0..=n)
        .map(|m| Complex::new(f.eval(m as f64 / n as f64) * scale, 0.0))
        .collect();
    InputSpectrum::from_unnormalized(coeffs)
}

/// <a|T|a> with the banded error form: 1/2 - (1/2) Re sum_m a_{m+band} conj(a_m).
pub fn error_quadratic_form(a: &InputSpectrum, kernel: ErrorKernel) -> f64 {
    let band = kernel.band();
    let coeffs = a.coefficients();
    let cross: Complex = if coeffs.len() > band {
        (0..coeffs.len() - band)
            .map(|m| coeffs[m + band] * coeffs[m].conj())
            .sum()
    } else {
        Complex::new(0.0, 0.0)
    };
    0.5 - 0.5 * cross.re
}

/// Optimal input spectrum a_m = C sin(pi m / (n+1)) and its minimum half-angle
/// error 1/2 (1 - cos(pi/(n+1))), the smallest eigenvalue of the n x n
/// tridiagonal error form restricted to a_0 = 0.
pub fn optimal_state(n: usize) -> Result<(InputSpectrum, f64)> {
    if n < 1 {
        return Err(PhaseLabError::InvalidParameter("n must be >= 1".into()));
    }
    let coeffs: Vec<Complex> = (0..=n)
        .map(|m| Complex::new((PI * m as f64 / (n + 1) as f64).sin(), 0.0))
        .collect();
    let (spectrum, _) = InputSpectrum::from_unnormalized(coeffs)?;
    let min_error = 0.5 * (1.0 - (PI / (n + 1) as f64).cos());
    Ok((spectrum, min_error))
}

/// Uniform grid of `points` values covering (-pi, pi], cell-centered so the
/// periodic trapezoid/rectangle rule is spectrally exact.
pub fn phi_grid(points: usize) -> Vec<f64> {
    let step = 2.0 * PI / points as f64;
    (0..points).map(|i| -PI + (i as f64 + 0.5) * step).collect()
}

/// Outcome density |sum a_m e^{i m phi}|^2 / 2pi on a grid in (-pi, pi].
pub fn outcome_density(a: &InputSpectrum, grid: &[f64]) -> Result<DensityCurve> {
    if grid.iter().any(|&g| !(-PI..=PI).contains(&g)) {
        return Err(PhaseLabError::InvalidParameter(
            "phi grid must lie within (-pi, pi]".into(),
        ));
    }
    let density: Vec<f64> = grid.iter().map(|&phi| a.density_at(phi)).collect();
    DensityCurve::new(grid.to_vec(), density)
}

/// Average error by direct quadrature of kernel x density over the circle.
///
/// Uses an equally spaced periodic rule with enough points to integrate the
/// degree-(n + 2) trigonometric polynomial exactly; agrees with
/// `error_quadratic_form` to roundoff.
pub fn average_error_exact(a: &InputSpectrum, kernel: ErrorKernel) -> f64 {
    let points = (2 * a.n() + 8).next_power_of_two().max(256);
    let step = 2.0 * PI / points as f64;
    let mut acc = 0.0;
    for i in 0..points {
        let phi = -PI + (i as f64 + 0.5) * step;
        acc += kernel.eval(phi) * a.density_at(phi);
    }
    acc * step
}

fn simpson_weights(count: usize) -> Vec<f64> {
    // count must be odd.
    let mut w = vec![0.0; count];
    w[0] = 1.0;
    w[count - 1] = 1.0;
    for (i, wi) in w.iter_mut().enumerate().take(count - 1).skip(1) {
        *wi = if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    w
}

/// Dense sampling of f used by the Fourier quadratures.
pub struct SampledProfile {
    values: Vec<f64>,
    weights: Vec<f64>,
    step: f64,
}

impl SampledProfile {
    pub fn new(f: &ProfileFunction) -> Self {
        Self::with_samples(f, tol::PROFILE_SAMPLES)
    }

    pub fn with_samples(f: &ProfileFunction, count: usize) -> Self {
        let count = if count % 2 == 0 { count + 1 } else { count };
        let values = f.sample_uniform(count);
        let weights = simpson_weights(count);
        let step = 1.0 / (count - 1) as f64;
        Self {
            values,
            weights,
            step,
        }
    }

    /// F f(t) = (1/sqrt(2 pi)) integral_0^1 e^{i x t} f(x) dx by composite
    /// Simpson with a phase recurrence over the uniform x grid.
    pub fn fourier_at(&self, t: f64) -> Complex {
        let rot = Complex::from_polar(1.0, self.step * t);
        let mut phase = Complex::new(1.0, 0.0);
        let mut acc = Complex::new(0.0, 0.0);
        for (v, w) in self.values.iter().zip(&self.weights) {
            acc += phase * Complex::new(v * w, 0.0);
            phase *= rot;
        }
        acc * Complex::new(self.step / 3.0 / (2.0 * PI).sqrt(), 0.0)
    }
}

/// |F f(t)|^2 on a t grid.
pub fn fourier_density(f: &ProfileFunction, t_grid: &[f64]) -> Result<DensityCurve> {
    let sampled = SampledProfile::new(f);
    let density: Vec<f64> = t_grid
        .iter()
        .map(|&t| sampled.fourier_at(t).norm_sqr())
        .collect();
    DensityCurve::new(t_grid.to_vec(), density)
}

/// Default symmetric t grid of `points` values over [-window, window].
pub fn t_grid(window: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -window + 2.0 * window * i as f64 / (points - 1) as f64)
        .collect()
}

/// Finite-n and limiting interval probabilities of the rescaled error.
#[derive(Debug, Clone, Copy)]
pub struct LimitingComparison {
    /// Exact P{a/n <= error <= b/n} at finite n.
    pub exact: f64,
    /// Limit value integral_a^b |F f(t)|^2 dt.
    pub fourier: f64,
}

/// P{a/n <= estimation error <= b/n}, exact at finite n, next to its n -> oo
/// Fourier limit.
pub fn limiting_distribution_noiseless(
    f: &ProfileFunction,
    n: usize,
    a: f64,
    b: f64,
) -> Result<LimitingComparison> {
    if a >= b {
        return Err(PhaseLabError::InvalidParameter("need a < b".into()));
    }
    let (spectrum, _) = spectrum_from_profile(f, n)?;
    let cdf = ExactOutcomeCdf::new(&spectrum);
    let exact = cdf.interval_probability(a / n as f64, b / n as f64);

    let sampled = SampledProfile::new(f);
    let fourier = adaptive_quadrature(|t| sampled.fourier_at(t).norm_sqr(), a, b, 1e-9)?;
    Ok(LimitingComparison { exact, fourier })
}

/// Dirichlet-profile error asymptote: the n^2-rescaled half-angle average
/// error tends to (1/4) integral |f'(x)|^2 dx; this returns integral |f'|^2.
pub fn dirichlet_error_asymptote(f: &ProfileFunction) -> Result<f64> {
    let at_zero = f.eval(0.0).abs();
    let at_one = f.eval(1.0).abs();
    if at_zero > tol::DIRICHLET || at_one > tol::DIRICHLET {
        return Err(PhaseLabError::NotDirichlet { at_zero, at_one });
    }
    match f {
        ProfileFunction::Sine => {
            // f' = sqrt(2) pi cos(pi x); integral of square is pi^2.
            Ok(adaptive_quadrature(
                |x| 2.0 * PI * PI * (PI * x).cos().powi(2),
                0.0,
                1.0,
                1e-12,
            )?)
        }
        _ => {
            let count = tol::PROFILE_SAMPLES;
            let h = 1.0 / (count - 1) as f64;
            let v = f.sample_uniform(count);
            let xs: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
            Ok(derivative_l2_sq(&xs, &v))
        }
    }
}

/// Trapezoid integral of |v'|^2 on a uniform grid, with central finite
/// differences in the interior and one-sided differences at the ends.
pub(crate) fn derivative_l2_sq(xs: &[f64], v: &[f64]) -> f64 {
    let count = v.len();
    let h = xs[1] - xs[0];
    let mut dsq = vec![0.0; count];
    for i in 0..count {
        let d = if i == 0 {
            (v[1] - v[0]) / h
        } else if i == count - 1 {
            (v[count - 1] - v[count - 2]) / h
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * h)
        };
        dsq[i] = d * d;
    }
    trapezoid(xs, &dsq)
}

/// Windowed tail averages A± of t^2 |F f(t)|^2 over [R1, R1+R2] and its
/// mirror; they quantify the non-Dirichlet boundary contribution.
pub fn a_plus_minus(f: &ProfileFunction, r1: f64, r2: f64) -> Result<(f64, f64)> {
    if r1 <= 0.0 || r2 <= 0.0 {
        return Err(PhaseLabError::InvalidParameter(
            "need positive window parameters".into(),
        ));
    }
    let sampled = SampledProfile::new(f);
    let window = |lo: f64, hi: f64| -> f64 {
        // Composite Simpson with ~64 points per oscillation period.
        let period = 2.0 * PI;
        let mut count = ((hi - lo) / period * 64.0).ceil() as usize + 1;
        if count % 2 == 0 {
            count += 1;
        }
        let h = (hi - lo) / (count - 1) as f64;
        let w = simpson_weights(count);
        let mut acc = 0.0;
        for i in 0..count {
            let t = lo + i as f64 * h;
            acc += w[i] * t * t * sampled.fourier_at(t).norm_sqr();
        }
        acc * h / 3.0
    };
    let a_plus = window(r1, r1 + r2) / r2;
    let a_minus = window(-r1 - r2, -r1) / r2;
    Ok((a_plus, a_minus))
}

/// Sine integral Si(x) = integral_0^x sin(t)/t dt by adaptive quadrature.
pub fn si_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(PhaseLabError::InvalidParameter(format!(
            "Si argument must be finite, got {x}"
        )));
    }
    adaptive_quadrature(
        |t| {
            if t.abs() < 1e-150 {
                1.0
            } else {
                t.sin() / t
            }
        },
        0.0,
        x,
        tol::SI_ABS,
    )
}
