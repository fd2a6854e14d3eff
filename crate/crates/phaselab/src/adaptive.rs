//! The one-qubit adaptive phase estimator: bit-by-bit binary-expansion
//! measurement with feedback, its exact noiseless outcome distribution, the
//! per-step flip model under dephasing, and Monte Carlo machinery for the
//! limiting distribution of the rescaled error.

use crate::channel::reduce_angle;
use crate::covariant::si_function;
use crate::error::{PhaseLabError, Result};
use crate::stats::{histogram, DensityCurve};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Noise specification for a protocol run.
#[derive(Debug, Clone, Copy)]
pub enum NoiseSpec {
    /// Fixed per-use dephasing probability.
    ExactP(f64),
    /// Schedule p = epsilon / n with n the total number of channel uses.
    Schedule(f64),
}

/// Protocol parameters: N+1 measurement steps, n = 2^{N+1} - 1 channel uses.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolConfig {
    pub n_exponent: usize,
    pub theta_true: f64,
    pub noise: NoiseSpec,
}

impl ProtocolConfig {
    pub fn new(n_exponent: usize, theta_true: f64, noise: NoiseSpec) -> Result<Self> {
        if n_exponent > 30 {
            return Err(PhaseLabError::InvalidParameter(
                "N must be <= 30".into(),
            ));
        }
        match noise {
            NoiseSpec::ExactP(p) if !(0.0..=1.0).contains(&p) => {
                return Err(PhaseLabError::InvalidParameter(format!(
                    "p must be in [0,1], got {p}"
                )))
            }
            NoiseSpec::Schedule(eps) if eps < 0.0 || !eps.is_finite() => {
                return Err(PhaseLabError::InvalidParameter(format!(
                    "epsilon must be nonnegative, got {eps}"
                )))
            }
            _ => {}
        }
        Ok(Self {
            n_exponent,
            theta_true: reduce_angle(theta_true),
            noise,
        })
    }

    /// Total channel uses n = 2^{N+1} - 1 (always recomputed, never stored).
    pub fn n_uses(&self) -> u64 {
        (1u64 << (self.n_exponent + 1)) - 1
    }

    pub fn steps(&self) -> usize {
        self.n_exponent + 1
    }

    pub fn p(&self) -> f64 {
        match self.noise {
            NoiseSpec::ExactP(p) => p,
            NoiseSpec::Schedule(eps) => eps / self.n_uses() as f64,
        }
    }
}

/// One protocol run: measured bits, flip bookkeeping, final estimate.
#[derive(Debug, Clone)]
pub struct ProtocolTranscript {
    pub bits: Vec<u8>,
    pub flips: Vec<u8>,
    pub estimate: f64,
}

/// Per-step flip probabilities of the dephasing reduction.
#[derive(Debug, Clone)]
pub struct FlipModel {
    probs: Vec<f64>,
}

impl FlipModel {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Probability of measuring the bit 1 after m channel uses and a feedback
/// rotation: (1-p)^m sin^2((m theta + feedback)/2) + (1 - (1-p)^m)/2.
pub fn step_outcome_probability(theta: f64, p: f64, m: u64, feedback: f64) -> f64 {
    let survival = (1.0 - p).powi(m as i32);
    let coherent = ((m as f64 * theta + feedback) / 2.0).sin().powi(2);
    survival * coherent + (1.0 - survival) / 2.0
}

/// Estimate from the bit string: theta_hat = sum_k A_k 2^{k-1-N} pi,
/// reduced to (-pi, pi].
fn estimate_from_bits(bits: &[u8], n_exponent: usize) -> f64 {
    let y: u64 = bits
        .iter()
        .enumerate()
        .map(|(i, &b)| (b as u64) << i)
        .sum();
    reduce_angle(2.0 * PI * y as f64 / (1u64 << (n_exponent + 1)) as f64)
}

/// Feedback angle before step k (1-based): -(sum_{j<k} A_j 2^{j-k}) pi.
fn feedback_angle(bits: &[u8], k: usize) -> f64 {
    let mut acc = 0.0;
    for (j, &b) in bits.iter().enumerate().take(k - 1) {
        if b == 1 {
            acc += (2.0f64).powi(j as i32 + 1 - k as i32);
        }
    }
    -acc * PI
}

/// One run of the adaptive protocol. Deterministic given (seed, trial): the
/// RNG is a counter-based stream keyed by the trial index.
pub fn run_protocol1(cfg: &ProtocolConfig, seed: u64, trial: u64) -> ProtocolTranscript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    run_protocol1_with_rng(cfg, &mut rng)
}

/// Protocol run on a caller-supplied RNG. The dephasing is sampled through
/// its exact flip decomposition: the coherent bit XOR an independent flip
/// with probability (1 - (1-p)^m)/2, which reproduces the step outcome law
/// and exposes the flips for bookkeeping.
pub fn run_protocol1_with_rng(cfg: &ProtocolConfig, rng: &mut impl Rng) -> ProtocolTranscript {
    let steps = cfg.steps();
    let p = cfg.p();
    let mut bits = vec![0u8; steps];
    let mut flips = vec![0u8; steps];
    for k in 1..=steps {
        let m = 1u64 << (cfg.n_exponent + 1 - k);
        let feedback = feedback_angle(&bits, k);
        let coherent_p = ((m as f64 * cfg.theta_true + feedback) / 2.0).sin().powi(2);
        let flip_p = 0.5 * (1.0 - (1.0 - p).powi(m as i32));
        let coherent_bit = u8::from(rng.gen::<f64>() < coherent_p);
        let flip = u8::from(rng.gen::<f64>() < flip_p);
        bits[k - 1] = coherent_bit ^ flip;
        flips[k - 1] = flip;
    }
    let estimate = estimate_from_bits(&bits, cfg.n_exponent);
    ProtocolTranscript {
        bits,
        flips,
        estimate,
    }
}

/// Exhaustive noisy branch probabilities of the protocol over the 2^{N+1}
/// outcome grid indexed by y (theta_hat = 2 pi y / 2^{N+1}).
pub fn protocol1_exhaustive_distribution(theta: f64, n_exponent: usize, p: f64) -> Vec<f64> {
    let steps = n_exponent + 1;
    let outcomes = 1usize << steps;
    let mut probs = vec![0.0; outcomes];
    let mut bits = vec![0u8; steps];
    for y in 0..outcomes {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = (y >> i & 1) as u8;
        }
        let mut prob = 1.0;
        for k in 1..=steps {
            let m = 1u64 << (n_exponent + 1 - k);
            let p1 = step_outcome_probability(theta, p, m, feedback_angle(&bits, k));
            prob *= if bits[k - 1] == 1 { p1 } else { 1.0 - p1 };
        }
        probs[y] = prob;
    }
    probs
}

/// Exact noiseless outcome distribution over the 2^{N+1} grid: the squared
/// Dirichlet kernel |D_d(theta - 2 pi y/d)|^2 / d^2 with d = 2^{N+1}.
pub fn protocol3_distribution(theta: f64, n_exponent: usize) -> Vec<f64> {
    let d = 1usize << (n_exponent + 1);
    let df = d as f64;
    (0..d)
        .map(|y| {
            let delta = theta - 2.0 * PI * y as f64 / df;
            let half = delta / 2.0;
            if half.sin().abs() < 1e-14 {
                // Removable singularity on the grid.
                1.0
            } else {
                ((df * half).sin() / (df * half.sin())).powi(2)
            }
        })
        .collect()
}

/// Per-step flip probabilities (1 - (1-p)^{2^{N-k+1}})/2, k = 1..N+1.
pub fn flip_model(p: f64, n_exponent: usize) -> Result<FlipModel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PhaseLabError::InvalidParameter(format!(
            "p must be in [0,1], got {p}"
        )));
    }
    let probs = (1..=n_exponent + 1)
        .map(|k| {
            let m = (n_exponent + 1 - k) as u32;
            0.5 * (1.0 - (1.0 - p).powi(1 << m))
        })
        .collect();
    Ok(FlipModel { probs })
}

/// Large-N flip probabilities under the schedule p = eps/n:
/// (1 - e^{-eps 2^{-k}})/2.
pub fn flip_model_limit(epsilon: f64, steps: usize) -> Vec<f64> {
    (1..=steps)
        .map(|k| 0.5 * (1.0 - (-epsilon * (2.0f64).powi(-(k as i32))).exp()))
        .collect()
}

// --- fast sine integral for Monte Carlo inner loops ------------------------

/// Si(x) with absolute error below ~1e-8: Taylor series for |x| <= 20,
/// optimally truncated asymptotic auxiliary expansion beyond. The slow
/// quadrature-exact version lives next to the other special functions.
pub fn si_fast(x: f64) -> f64 {
    let ax = x.abs();
    let value = if ax <= 20.0 {
        // Si(x) = sum_k (-1)^k x^{2k+1} / ((2k+1) (2k+1)!)
        let x2 = ax * ax;
        let mut sin_term = ax; // x^{2k+1} / (2k+1)!
        let mut sum = ax;
        for k in 1..=60 {
            let two_k = 2.0 * k as f64;
            sin_term *= -x2 / (two_k * (two_k + 1.0));
            sum += sin_term / (two_k + 1.0);
            if sin_term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        // Si(x) = pi/2 - f(x) cos x - g(x) sin x with the asymptotic series
        // f = (1/x) sum (-1)^k (2k)!/x^{2k}, g = (1/x^2) sum (-1)^k (2k+1)!/x^{2k},
        // truncated at the smallest term.
        let x2 = ax * ax;
        let mut f_term = 1.0;
        let mut g_term = 1.0;
        let mut f_sum = 1.0;
        let mut g_sum = 1.0;
        for k in 1..=40 {
            let two_k = 2.0 * k as f64;
            let next_f = -f_term * (two_k - 1.0) * two_k / x2;
            let next_g = -g_term * two_k * (two_k + 1.0) / x2;
            if next_f.abs() >= f_term.abs() {
                break;
            }
            f_term = next_f;
            g_term = next_g;
            f_sum += f_term;
            g_sum += g_term;
        }
        PI / 2.0 - f_sum / ax * ax.cos() - g_sum / x2 * ax.sin()
    };
    if x < 0.0 {
        -value
    } else {
        value
    }
}

/// Antiderivative of sin^2(w)/w^2: Si(2w) - sin^2(w)/w.
fn sinc_sq_antiderivative(w: f64) -> f64 {
    if w.abs() < 1e-8 {
        return w;
    }
    si_fast(2.0 * w) - w.sin().powi(2) / w
}

/// Inverse-CDF sampler for the limiting noiseless rescaled error, whose
/// density is (1 - cos z) / (pi z^2). The center |z| <= z1 uses a cumulative
/// table; the 1/z^2 tail uses Pareto sampling with a cosine rejection step.
pub struct Z0Sampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    z1: f64,
    central_mass: f64,
}

impl Z0Sampler {
    pub fn new() -> Self {
        let z1 = 100.0 * PI;
        let points = 1 << 17;
        let step = 2.0 * z1 / points as f64;
        let density = |z: f64| {
            if z.abs() < 1e-8 {
                1.0 / (2.0 * PI)
            } else {
                (1.0 - z.cos()) / (PI * z * z)
            }
        };
        let mut grid = Vec::with_capacity(points + 1);
        let mut cdf = Vec::with_capacity(points + 1);
        let mut acc = 0.0;
        let mut prev = density(-z1);
        grid.push(-z1);
        cdf.push(0.0);
        for i in 1..=points {
            let z = -z1 + i as f64 * step;
            let d = density(z);
            acc += 0.5 * (d + prev) * step;
            prev = d;
            grid.push(z);
            cdf.push(acc);
        }
        Z0Sampler {
            grid,
            cdf,
            z1,
            central_mass: acc,
        }
    }

    /// Mass outside the table per side, from the exact tail integral.
    fn tail_mass_per_side(&self) -> f64 {
        (1.0 - self.central_mass) / 2.0
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let tail = self.tail_mass_per_side();
        let u: f64 = rng.gen();
        if u < tail || u > 1.0 - tail {
            let sign = if u < tail { -1.0 } else { 1.0 };
            // Tail density (1 - cos z)/(pi z^2) <= 2/(pi z^2): sample the
            // envelope (Pareto) and thin with (1 - cos z)/2.
            loop {
                let z = self.z1 / rng.gen::<f64>();
                if rng.gen::<f64>() < (1.0 - z.cos()) / 2.0 {
                    return sign * z;
                }
            }
        }
        // Scale u into the central table range.
        let target = (u - tail) / (1.0 - 2.0 * tail) * self.central_mass;
        let idx = self.cdf.partition_point(|&c| c < target).max(1);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.grid[idx - 1] + frac * (self.grid[idx] - self.grid[idx - 1])
    }
}

impl Default for Z0Sampler {
    fn default() -> Self {
        Self::new()
    }
}

/// One Monte Carlo draw of the limiting error decomposition: the noiseless
/// part z0 and the flip-induced lattice shift zeta (always a multiple of
/// 2 pi, accumulated as (-1)^{A_k} 2^k X_k pi over steps).
pub fn sample_error_decomposition(
    epsilon: f64,
    steps: usize,
    sampler: &Z0Sampler,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let z0 = sampler.sample(rng);
    let zeta = 2.0 * PI * sample_zeta_lattice(epsilon, steps, rng) as f64;
    (z0, zeta)
}

/// The integer zeta / 2 pi: sum_k (-1)^{A_k} 2^{k-1} X_k with uniform A and
/// the schedule-limit flips.
fn sample_zeta_lattice(epsilon: f64, steps: usize, rng: &mut impl Rng) -> i64 {
    let flips = flip_model_limit(epsilon, steps);
    let mut z: i64 = 0;
    for (k, &q) in flips.iter().enumerate() {
        if rng.gen::<f64>() < q {
            let sign = if rng.gen::<bool>() { 1 } else { -1 };
            z += sign * (1i64 << k);
        }
    }
    z
}

/// Monte Carlo estimate (with standard error) of the limiting probability
/// P{a <= rescaled error <= b}: the flip-shifted window integral of
/// sin^2 y / y^2 / 2pi, averaged over flip configurations.
pub fn limiting_probability_noisy(
    epsilon: f64,
    a: f64,
    b: f64,
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if a >= b {
        return Err(PhaseLabError::InvalidParameter("need a < b".into()));
    }
    if trials < 10_000 {
        return Err(PhaseLabError::InvalidParameter(
            "need at least 10^4 trials for a meaningful error bar".into(),
        ));
    }
    let (sum, sum_sq) = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let zeta = 2.0 * PI * sample_zeta_lattice(epsilon, steps, &mut rng) as f64;
            // integral_a^b sin^2 y/(y + zeta)^2 dy = integral over the
            // shifted window of sin^2 w / w^2 (zeta is a multiple of 2 pi).
            let v = (sinc_sq_antiderivative(b + zeta) - sinc_sq_antiderivative(a + zeta))
                / (2.0 * PI);
            (v, v * v)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
    Ok((mean, (var / trials as f64).sqrt()))
}

/// Histogram of the rescaled circular error n(theta_hat - theta) over
/// protocol runs with theta uniform per trial.
pub fn empirical_limiting_distribution(
    epsilon: f64,
    n_exponent: usize,
    trials: usize,
    bins: usize,
    window: f64,
    seed: u64,
) -> Result<DensityCurve> {
    let errors = rescaled_errors(epsilon, n_exponent, trials, seed)?;
    histogram(&errors, bins, -window, window)
}

/// Rescaled circular errors n(theta_hat - theta), theta uniform per trial.
pub fn rescaled_errors(
    epsilon: f64,
    n_exponent: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = ((1u64 << (n_exponent + 1)) - 1) as f64;
    (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let theta = PI * (2.0 * rng.gen::<f64>() - 1.0);
            let cfg = ProtocolConfig::new(n_exponent, theta, NoiseSpec::Schedule(epsilon))?;
            let t = run_protocol1_with_rng(&cfg, &mut rng);
            Ok(n * reduce_angle(t.estimate - theta))
        })
        .collect()
}

/// Asymptotic rescaled mean-square error eps pi^2 + Si(2 pi)/pi.
pub fn average_error_asymptote(epsilon: f64) -> Result<f64> {
    if epsilon < 0.0 {
        return Err(PhaseLabError::InvalidParameter(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    Ok(epsilon * PI * PI + si_function(2.0 * PI)? / PI)
}
