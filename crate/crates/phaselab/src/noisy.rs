//! Covariant estimation under p = eps/n dephasing: branch coefficients,
//! the branch multiplication polynomials, the Poisson-mixture average error
//! and limiting density, and a brute-force total-spin projection oracle that
//! validates the branch-polynomial approximation on small qubit counts.

use crate::covariant::{derivative_l2_sq, ErrorKernel, ProfileFunction, SampledProfile};
use crate::error::{PhaseLabError, Result};
use crate::stats::DensityCurve;
use crate::tol;
use crate::Complex;
use std::collections::BTreeMap;

/// Dephasing-event branch: k pinched qubits, ell of them read as one, and
/// spin defect t (total spin j = n/2 - t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BranchIndex {
    pub k: usize,
    pub ell: usize,
    pub t: usize,
}

impl BranchIndex {
    pub fn new(k: usize, ell: usize, t: usize) -> Result<Self> {
        if ell > k || t > k {
            return Err(PhaseLabError::InvalidParameter(format!(
                "branch index needs ell <= k and t <= k, got k={k}, ell={ell}, t={t}"
            )));
        }
        Ok(Self { k, ell, t })
    }
}

/// Truncated Poisson(eps) weights e^{-eps} eps^k / k!.
#[derive(Debug, Clone)]
pub struct PoissonMixture {
    epsilon: f64,
    weights: Vec<f64>,
}

impl PoissonMixture {
    /// Truncate at the smallest k_max with tail mass below the tolerance.
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(PhaseLabError::InvalidParameter(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        let mut weights = Vec::new();
        let mut w = (-epsilon).exp();
        let mut mass = 0.0;
        let mut k = 0usize;
        while mass < 1.0 - tol::POISSON_TAIL {
            weights.push(w);
            mass += w;
            k += 1;
            w *= epsilon / k as f64;
            if k > 500 {
                return Err(PhaseLabError::NumericalContract(
                    "Poisson truncation did not converge".into(),
                ));
            }
        }
        Ok(Self { epsilon, weights })
    }

    /// Truncate at a fixed k_max, rejecting insufficient mass.
    pub fn with_k_max(epsilon: f64, k_max: usize) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(PhaseLabError::InvalidParameter(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        let mut weights = Vec::with_capacity(k_max + 1);
        let mut w = (-epsilon).exp();
        for k in 0..=k_max {
            weights.push(w);
            w *= epsilon / (k + 1) as f64;
        }
        let mass: f64 = weights.iter().sum();
        if mass < 1.0 - tol::POISSON_TAIL {
            return Err(PhaseLabError::NumericalContract(format!(
                "Poisson mass {mass} at k_max = {k_max} below 1 - {:.0e}",
                tol::POISSON_TAIL
            )));
        }
        Ok(Self { epsilon, weights })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k_max(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0f64;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Falling factorial a (a-1) ... (a-len+1) as f64.
fn falling(a: usize, len: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..len {
        acc *= (a - i) as f64;
    }
    acc
}

/// Branch amplitude b_{n,m|k,ell}: the square root of the hypergeometric
/// probability that the k pinched qubits read ell ones against m ones in n.
pub fn b_coefficient(n: usize, m: usize, k: usize, ell: usize) -> Result<f64> {
    if m > n || ell > k || k > n {
        return Err(PhaseLabError::InvalidParameter(format!(
            "need m <= n and ell <= k <= n, got n={n}, m={m}, k={k}, ell={ell}"
        )));
    }
    if m < ell || n - m < k - ell {
        return Ok(0.0);
    }
    Ok((falling(m, ell) * falling(n - m, k - ell) / falling(n, k)).sqrt())
}

/// Polynomial on [0,1], stored as a sum of nonnegative Bernstein-type terms
/// c x^a (1-x)^b, which evaluates without cancellation.
#[derive(Debug, Clone)]
pub struct BranchPolynomial {
    terms: Vec<(f64, usize, usize)>,
    degree: usize,
}

impl BranchPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, a, b)| c * x.powi(a as i32) * (1.0 - x).powi(b as i32))
            .sum()
    }

    /// Monomial-basis coefficients (expanded on demand; subject to the usual
    /// cancellation at high degree — prefer `eval`).
    pub fn coefficients(&self) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.degree + 1];
        for &(c, a, b) in &self.terms {
            for v in 0..=b {
                let sign = if v % 2 == 0 { 1.0 } else { -1.0 };
                coeffs[a + v] += c * sign * binomial(b, v);
            }
        }
        coeffs
    }
}

/// Branch multiplication polynomial
/// q(x) = sum_u C(ell,u) C(k-ell,t-u) x^{2 ell + t - 2u} (1-x)^{2(k-ell) - t + 2u},
/// u from max(0, t-k+ell) to min(t, ell).
///
/// Summing q over t = 0..k gives x^ell (1-x)^{k-ell}, so the branch family
/// conserves probability mass exactly.
pub fn t_operator_polynomial(idx: BranchIndex) -> BranchPolynomial {
    let BranchIndex { k, ell, t } = idx;
    let mut terms = Vec::new();
    let u_lo = t.saturating_sub(k - ell);
    let u_hi = t.min(ell);
    for u in u_lo..=u_hi {
        let c = binomial(ell, u) * binomial(k - ell, t - u);
        if c > 0.0 {
            let xp = 2 * ell + t - 2 * u;
            let op = 2 * (k - ell) + 2 * u - t;
            terms.push((c, xp, op));
        }
    }
    BranchPolynomial {
        terms,
        degree: 2 * k,
    }
}

/// Unnormalized branch envelope g(x) = sqrt(q(x)) f(x) on a uniform grid;
/// its squared L2 norm is the branch weight.
#[derive(Debug, Clone)]
pub struct BranchProfile {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

/// Pointwise g = sqrt(q) f on a uniform grid of `count` samples.
pub fn apply_sqrt_t(
    f: &ProfileFunction,
    idx: BranchIndex,
    count: usize,
) -> Result<BranchProfile> {
    let q = t_operator_polynomial(idx);
    let x: Vec<f64> = (0..count).map(|i| i as f64 / (count - 1) as f64).collect();
    let mut g = Vec::with_capacity(count);
    for &xi in &x {
        let qi = q.eval(xi);
        if qi < -1e-12 {
            return Err(PhaseLabError::NumericalContract(format!(
                "branch polynomial negative at x = {xi}: q = {qi:.3e}"
            )));
        }
        g.push(qi.max(0.0).sqrt() * f.eval(xi));
    }
    Ok(BranchProfile { x, g })
}

/// Average error of the noisy covariant estimator.
#[derive(Debug, Clone, Copy)]
pub struct NoisyError {
    /// Large-n branch formula (1/4n^2) sum_k w_k sum_{t,ell} C(k,ell)
    /// integral |(sqrt(q) f)'|^2; only defined for Dirichlet profiles.
    pub asymptotic: Option<f64>,
    /// Exact-binomial-weighted quadratic form over branch spectra at finite n.
    pub finite_n: f64,
}

fn quadratic_form_unnormalized(g: &[Complex], kernel: ErrorKernel) -> f64 {
    let band = match kernel {
        ErrorKernel::HalfAngle => 1,
        ErrorKernel::FullAngle => 2,
    };
    let norm_sq: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    let cross: Complex = if g.len() > band {
        (0..g.len() - band).map(|m| g[m + band] * g[m].conj()).sum()
    } else {
        Complex::new(0.0, 0.0)
    };
    0.5 * norm_sq - 0.5 * cross.re
}

/// Poisson/binomial-weighted average error over dephasing branches.
pub fn noisy_average_error(
    f: &ProfileFunction,
    mix: &PoissonMixture,
    n: usize,
    kernel: ErrorKernel,
) -> Result<NoisyError> {
    if n < 1 {
        return Err(PhaseLabError::InvalidParameter("n must be >= 1".into()));
    }

    // Asymptotic branch formula (Dirichlet profiles only).
    let asymptotic = if f.is_dirichlet() {
        let count = tol::PROFILE_SAMPLES;
        let mut total = 0.0;
        for (k, &w) in mix.weights().iter().enumerate() {
            let mut branch_sum = 0.0;
            for ell in 0..=k {
                let choose = binomial(k, ell);
                for t in 0..=k {
                    let idx = BranchIndex::new(k, ell, t)?;
                    let branch = apply_sqrt_t(f, idx, count)?;
                    branch_sum += choose * derivative_l2_sq(&branch.x, &branch.g);
                }
            }
            total += w * branch_sum;
        }
        Some(total / (4.0 * (n as f64).powi(2)))
    } else {
        None
    };

    // Finite-n path: exact binomial weights over k, branch spectra
    // a_m sqrt(q(m/n)) with the unnormalized error form.
    let p = mix.epsilon() / n as f64;
    if p > 1.0 {
        return Err(PhaseLabError::InvalidParameter(format!(
            "schedule gives p = {p} > 1 at n = {n}"
        )));
    }
    let (base, _) = crate::covariant::spectrum_from_profile(f, n)?;
    let coeffs = base.coefficients();
    let mut finite = 0.0;
    for k in 0..=mix.k_max().min(n) {
        let w = binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
        if w == 0.0 {
            continue;
        }
        let mut branch_sum = 0.0;
        for ell in 0..=k {
            let choose = binomial(k, ell);
            for t in 0..=k {
                let q = t_operator_polynomial(BranchIndex::new(k, ell, t)?);
                let g: Vec<Complex> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, &a)| {
                        let qv = q.eval(m as f64 / n as f64).max(0.0);
                        a * Complex::new(qv.sqrt(), 0.0)
                    })
                    .collect();
                branch_sum += choose * quadratic_form_unnormalized(&g, kernel);
            }
        }
        finite += w * branch_sum;
    }
    Ok(NoisyError {
        asymptotic,
        finite_n: finite,
    })
}

/// Poisson-weighted limiting density of the rescaled error: the branch sum of
/// |F(sqrt(q) f)(t)|^2 over (k, ell, t).
pub fn noisy_limiting_density(
    f: &ProfileFunction,
    mix: &PoissonMixture,
    t_grid: &[f64],
) -> Result<DensityCurve> {
    // 2049 Simpson samples keep the phase-quadrature error below 1e-5
    // relative for |t| <= 400 while the branch triple sum stays affordable.
    let count = 2049;
    let mut density = vec![0.0; t_grid.len()];
    for (k, &w) in mix.weights().iter().enumerate() {
        for ell in 0..=k {
            let choose = binomial(k, ell);
            for t in 0..=k {
                let idx = BranchIndex::new(k, ell, t)?;
                let branch = apply_sqrt_t(f, idx, count)?;
                let profile = ProfileFunction::Samples {
                    x: branch.x,
                    f: branch.g,
                };
                let sampled = SampledProfile::with_samples(&profile, count);
                for (slot, &tv) in density.iter_mut().zip(t_grid) {
                    *slot += w * choose * sampled.fourier_at(tv).norm_sqr();
                }
            }
        }
    }
    DensityCurve::new(t_grid.to_vec(), density)
}

// ---------------------------------------------------------------------------
// Brute-force total-spin oracle (n <= 12).
// ---------------------------------------------------------------------------

/// Weight-m subspace of n qubits: bitmasks with m ones, indexed densely.
struct WeightSubspace {
    n: usize,
    masks: Vec<u32>,
    index: BTreeMap<u32, usize>,
}

impl WeightSubspace {
    fn new(n: usize, m: usize) -> Self {
        let mut masks = Vec::new();
        for mask in 0..(1u32 << n) {
            if mask.count_ones() as usize == m {
                masks.push(mask);
            }
        }
        let index = masks.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        Self { n, masks, index }
    }

    fn dim(&self) -> usize {
        self.masks.len()
    }

    /// Apply J^2 = sum_{i<j} SWAP_ij + n(4-n)/4 restricted to this subspace.
    fn apply_j_squared(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = self.masks.first().map(|b| b.count_ones() as usize).unwrap_or(0);
        let pairs = n * (n - 1) / 2;
        let unequal = m * (n - m);
        let diag = n as f64 * (4 - n as i64) as f64 / 4.0 + (pairs - unequal) as f64;
        let mut out: Vec<f64> = v.iter().map(|&x| diag * x).collect();
        for (row, &mask) in self.masks.iter().enumerate() {
            let amp = v[row];
            if amp == 0.0 {
                continue;
            }
            // Swap each (one, zero) position pair.
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    for j in 0..n {
                        if mask >> j & 1 == 0 {
                            let swapped = mask & !(1 << i) | (1 << j);
                            out[self.index[&swapped]] += amp;
                        }
                    }
                }
            }
        }
        out
    }
}

/// Overlap coefficient d_{n,j,m,k,ell} = b * || P_j psi || where psi is the
/// pinched-readout product state |1..1 0..0> (x) |symmetric(n-k, m-ell)> and
/// P_j projects onto the total-spin-j eigenspace (j given as 2j to stay
/// integral for odd n).
pub fn d_coefficient_oracle(
    n: usize,
    two_j: usize,
    m: usize,
    k: usize,
    ell: usize,
) -> Result<f64> {
    if n > tol::ORACLE_MAX_QUBITS {
        return Err(PhaseLabError::InvalidParameter(format!(
            "oracle limited to n <= {}, got {n}",
            tol::ORACLE_MAX_QUBITS
        )));
    }
    if m > n || ell > k || k > n || two_j > n || (n - two_j) % 2 != 0 {
        return Err(PhaseLabError::InvalidParameter(format!(
            "invalid oracle indices n={n}, 2j={two_j}, m={m}, k={k}, ell={ell}"
        )));
    }
    let b = b_coefficient(n, m, k, ell)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    // Spin defect beyond what k pinched qubits (or the weight) allow.
    let t = (n - two_j) / 2;
    if t > k.min(m).min(n - m) {
        return Ok(0.0);
    }

    let space = WeightSubspace::new(n, m);
    // psi: first ell qubits |1>, next k-ell qubits |0>, symmetric remainder.
    let rem = n - k;
    let rem_ones = m - ell;
    let amp = binomial(rem, rem_ones).sqrt().recip();
    let mut v = vec![0.0; space.dim()];
    let head: u32 = (1u32 << ell) - 1;
    for tail in 0..(1u32 << rem) {
        if tail.count_ones() as usize == rem_ones {
            let mask = head | (tail << k);
            v[space.index[&mask]] += amp;
        }
    }

    // Lagrange filter onto the eigenvalue j(j+1) over the subspace spectrum
    // { j'(j'+1) : |n/2 - m| <= j' <= n/2 }.
    let spin_eig = |two: usize| two as f64 * (two as f64 + 2.0) / 4.0;
    let target = spin_eig(two_j);
    let two_j_min = (n as i64 - 2 * m as i64).unsigned_abs() as usize;
    let mut two = two_j_min;
    while two <= n {
        if two != two_j {
            let other = spin_eig(two);
            let w = space.apply_j_squared(&v);
            let scale = (target - other).recip();
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = (wi - other * *vi) * scale;
            }
        }
        two += 2;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(b * norm)
}

/// File-backed cache for oracle values, keyed by (n, 2j, m, k, ell).
pub struct OracleCache {
    path: std::path::PathBuf,
    map: BTreeMap<String, f64>,
    dirty: bool,
}

impl OracleCache {
    pub fn open(path: &std::path::Path) -> Result<Self> {
        let map = if path.exists() {
            serde_json::from_str(&std::fs::read_to_string(path)?)?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            path: path.to_path_buf(),
            map,
            dirty: false,
        })
    }

    pub fn d_coefficient(
        &mut self,
        n: usize,
        two_j: usize,
        m: usize,
        k: usize,
        ell: usize,
    ) -> Result<f64> {
        let key = format!("{n},{two_j},{m},{k},{ell}");
        if let Some(&v) = self.map.get(&key) {
            return Ok(v);
        }
        let v = d_coefficient_oracle(n, two_j, m, k, ell)?;
        self.map.insert(key, v);
        self.dirty = true;
        Ok(v)
    }

    pub fn save(&mut self) -> Result<()> {
        if self.dirty {
            if let Some(parent) = self.path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&self.path, serde_json::to_string_pretty(&self.map)?)?;
            self.dirty = false;
        }
        Ok(())
    }
}

/// Worst-case gap sup_m |d^2 - q(m/n)| for a branch at size n; the quantity
/// whose decrease in n validates the branch-polynomial approximation.
pub fn branch_polynomial_gap(n: usize, idx: BranchIndex, cache: &mut OracleCache) -> Result<f64> {
    let two_j = n
        .checked_sub(2 * idx.t)
        .ok_or_else(|| PhaseLabError::InvalidParameter("t too large for n".into()))?;
    let q = t_operator_polynomial(idx);
    let mut worst = 0.0f64;
    for m in 0..=n {
        let d = cache.d_coefficient(n, two_j, m, idx.k, idx.ell)?;
        let gap = (d * d - q.eval(m as f64 / n as f64)).abs();
        worst = worst.max(gap);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariant::{fourier_density, spectrum_from_profile, t_grid};
    use approx::assert_abs_diff_eq;

    fn cache() -> OracleCache {
        let path = std::env::temp_dir().join("phaselab-oracle-cache-unit.json");
        OracleCache::open(&path).unwrap()
    }

    #[test]
    fn poisson_truncation() {
        let mix = PoissonMixture::new(2.0).unwrap();
        assert!(mix.mass() >= 1.0 - 1e-8);
        assert!(mix.k_max() <= 30);
        let fixed = PoissonMixture::with_k_max(2.0, 30).unwrap();
        assert!(fixed.mass() >= 1.0 - 1e-8);
        assert!(PoissonMixture::with_k_max(4.0, 3).is_err());
    }

    #[test]
    fn b_coefficient_examples() {
        // k = 0: empty product.
        for m in 0..=5 {
            assert_abs_diff_eq!(b_coefficient(5, m, 0, 0).unwrap(), 1.0, epsilon = 1e-15);
        }
        // k = 1, ell = 1: sqrt(m/n).
        for m in 0..=6 {
            assert_abs_diff_eq!(
                b_coefficient(6, m, 1, 1).unwrap(),
                (m as f64 / 6.0).sqrt(),
                epsilon = 1e-15
            );
        }
        // n=4, m=2, k=2, ell=1: sqrt(2*2/(4*3)).
        assert_abs_diff_eq!(
            b_coefficient(4, 2, 2, 1).unwrap(),
            (1.0f64 / 3.0).sqrt(),
            epsilon = 1e-15
        );
        // Out-of-range weights vanish.
        assert_abs_diff_eq!(b_coefficient(4, 1, 3, 2).unwrap(), 0.0, epsilon = 1e-15);
        assert!(b_coefficient(4, 5, 1, 0).is_err());
    }

    #[test]
    fn b_squared_is_hypergeometric_mass() {
        // sum_ell C(k,ell) is NOT the weight; the b^2 already contain the
        // hypergeometric probabilities, so sum over ell of C(k,ell) b^2 = 1.
        for &(n, m, k) in &[(6usize, 3usize, 2usize), (8, 2, 3), (10, 7, 4)] {
            let total: f64 = (0..=k)
                .map(|ell| binomial(k, ell) * b_coefficient(n, m, k, ell).unwrap().powi(2))
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn branch_polynomial_examples() {
        // k = 0: identity.
        let q = t_operator_polynomial(BranchIndex::new(0, 0, 0).unwrap());
        assert_abs_diff_eq!(q.eval(0.37), 1.0, epsilon = 1e-15);

        // k = 1, ell = 0, t = 0: (1-x)^2.
        let q = t_operator_polynomial(BranchIndex::new(1, 0, 0).unwrap());
        assert_abs_diff_eq!(q.eval(0.3), 0.49, epsilon = 1e-15);

        // k = 1, ell = 1, t = 1: x(1-x).
        let q = t_operator_polynomial(BranchIndex::new(1, 1, 1).unwrap());
        assert_abs_diff_eq!(q.eval(0.25), 0.1875, epsilon = 1e-15);
    }

    #[test]
    fn branch_polynomials_conserve_mass() {
        // sum_t q_{t,k,ell}(x) = x^ell (1-x)^{k-ell}.
        for k in 0..=4usize {
            for ell in 0..=k {
                for i in 0..=20 {
                    let x = i as f64 / 20.0;
                    let total: f64 = (0..=k)
                        .map(|t| {
                            t_operator_polynomial(BranchIndex::new(k, ell, t).unwrap()).eval(x)
                        })
                        .sum();
                    let want = x.powi(ell as i32) * (1.0 - x).powi((k - ell) as i32);
                    assert_abs_diff_eq!(total, want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn branch_polynomials_bounded() {
        for k in 0..=4usize {
            for ell in 0..=k {
                for t in 0..=k {
                    let q = t_operator_polynomial(BranchIndex::new(k, ell, t).unwrap());
                    for i in 0..=100 {
                        let x = i as f64 / 100.0;
                        let v = q.eval(x);
                        assert!((-1e-12..=1.0 + 1e-12).contains(&v), "q({x}) = {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn sqrt_t_preserves_dirichlet_zeros() {
        let idx = BranchIndex::new(2, 1, 1).unwrap();
        let branch = apply_sqrt_t(&ProfileFunction::Sine, idx, 257).unwrap();
        assert_abs_diff_eq!(branch.g[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(branch.g[256], 0.0, epsilon = 1e-15);

        // Identity branch leaves f unchanged.
        let id = BranchIndex::new(0, 0, 0).unwrap();
        let same = apply_sqrt_t(&ProfileFunction::Sine, id, 257).unwrap();
        for (i, &x) in same.x.iter().enumerate() {
            assert_abs_diff_eq!(same.g[i], ProfileFunction::Sine.eval(x), epsilon = 1e-12);
        }

        // k=1, ell=0, t=0 multiplies by (1-x).
        let br = apply_sqrt_t(&ProfileFunction::Sine, BranchIndex::new(1, 0, 0).unwrap(), 257)
            .unwrap();
        for (i, &x) in br.x.iter().enumerate() {
            assert_abs_diff_eq!(
                br.g[i],
                (1.0 - x) * ProfileFunction::Sine.eval(x),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn noisy_error_reduces_to_noiseless() {
        let n = 64usize;
        let mix = PoissonMixture::new(1e-12).unwrap();
        let err = noisy_average_error(&ProfileFunction::Sine, &mix, n, ErrorKernel::HalfAngle)
            .unwrap();
        let (spectrum, _) = spectrum_from_profile(&ProfileFunction::Sine, n).unwrap();
        let noiseless = crate::covariant::error_quadratic_form(&spectrum, ErrorKernel::HalfAngle);
        assert_abs_diff_eq!(err.finite_n, noiseless, epsilon = 1e-9);

        let asym = err.asymptotic.unwrap();
        let noiseless_asym = crate::covariant::dirichlet_error_asymptote(&ProfileFunction::Sine)
            .unwrap()
            / (4.0 * (n as f64).powi(2));
        assert_abs_diff_eq!(asym, noiseless_asym, epsilon = 1e-9);
    }

    #[test]
    fn noisy_error_finite_and_monotone_in_noise() {
        let n = 128usize;
        let quiet = PoissonMixture::new(0.25).unwrap();
        let loud = PoissonMixture::new(1.0).unwrap();
        let e_quiet =
            noisy_average_error(&ProfileFunction::Sine, &quiet, n, ErrorKernel::HalfAngle)
                .unwrap();
        let e_loud =
            noisy_average_error(&ProfileFunction::Sine, &loud, n, ErrorKernel::HalfAngle)
                .unwrap();
        let base = crate::covariant::dirichlet_error_asymptote(&ProfileFunction::Sine).unwrap()
            / (4.0 * (n as f64).powi(2));
        assert!(e_quiet.asymptotic.unwrap() >= base - 1e-15);
        assert!(e_loud.asymptotic.unwrap() > e_quiet.asymptotic.unwrap());
        assert!(e_loud.finite_n > e_quiet.finite_n);
        // Uniform profile has no asymptotic path.
        let u = noisy_average_error(&ProfileFunction::Uniform, &loud, n, ErrorKernel::HalfAngle)
            .unwrap();
        assert!(u.asymptotic.is_none());
    }

    #[test]
    fn noisy_density_reduces_and_normalizes() {
        let grid = t_grid(tol::FOURIER_WINDOW, 2049);
        let mix0 = PoissonMixture::new(1e-12).unwrap();
        let noisy = noisy_limiting_density(&ProfileFunction::Sine, &mix0, &grid).unwrap();
        let clean = fourier_density(&ProfileFunction::Sine, &grid).unwrap();
        for (a, b) in noisy.density().iter().zip(clean.density()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }

        let mix1 = PoissonMixture::new(1.0).unwrap();
        let wide = t_grid(400.0, 2049);
        let curve = noisy_limiting_density(&ProfileFunction::Uniform, &mix1, &wide).unwrap();
        assert!((curve.normalization() - 1.0).abs() < 2e-3, "mass {}", curve.normalization());
        assert!(curve.density().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn oracle_k0_is_top_spin() {
        let mut c = cache();
        for &(n, m) in &[(4usize, 2usize), (6, 3), (5, 1)] {
            // k = 0: the symmetric state is pure spin n/2.
            assert_abs_diff_eq!(c.d_coefficient(n, n, m, 0, 0).unwrap(), 1.0, epsilon = 1e-10);
            if n >= 2 * 1 + (n as i64 - 2 * m as i64).unsigned_abs() as usize {
                let lower = n - 2;
                assert_abs_diff_eq!(
                    c.d_coefficient(n, lower, m, 0, 0).unwrap(),
                    0.0,
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn oracle_two_qubit_example() {
        // |10> = (triplet + singlet)/sqrt(2): c = 1/sqrt(2), b = sqrt(1/2).
        let d = d_coefficient_oracle(2, 2, 1, 1, 1).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-12);
        let d_singlet = d_coefficient_oracle(2, 0, 1, 1, 1).unwrap();
        assert_abs_diff_eq!(d_singlet, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn oracle_branch_completeness() {
        let mut c = cache();
        for &(n, k, ell, m) in &[(6usize, 1usize, 1usize, 3usize), (6, 2, 1, 2), (8, 2, 2, 5)] {
            let b = b_coefficient(n, m, k, ell).unwrap();
            let mut total = 0.0;
            let two_j_min = (n as i64 - 2 * m as i64).unsigned_abs() as usize;
            let mut two_j = two_j_min;
            while two_j <= n {
                let d = c.d_coefficient(n, two_j, m, k, ell).unwrap();
                total += d * d;
                two_j += 2;
            }
            assert_abs_diff_eq!(total, b * b, epsilon = 1e-10);
        }
    }

    #[test]
    fn oracle_k1_matches_polynomial_exactly() {
        let mut c = cache();
        for ell in 0..=1usize {
            for t in 0..=1usize {
                let idx = BranchIndex::new(1, ell, t).unwrap();
                let gap = branch_polynomial_gap(8, idx, &mut c).unwrap();
                assert!(gap <= 1e-10, "k=1 ell={ell} t={t} gap {gap}");
            }
        }
    }

    #[test]
    fn oracle_k2_gap_shrinks() {
        let mut c = cache();
        let idx = BranchIndex::new(2, 1, 1).unwrap();
        let g6 = branch_polynomial_gap(6, idx, &mut c).unwrap();
        let g12 = branch_polynomial_gap(12, idx, &mut c).unwrap();
        assert!(g12 < g6, "gap did not shrink: {g6} -> {g12}");
        c.save().unwrap();
    }

    #[test]
    fn oracle_guards() {
        assert!(d_coefficient_oracle(13, 13, 6, 1, 0).is_err());
        assert!(d_coefficient_oracle(6, 5, 3, 1, 0).is_err()); // parity
        assert_abs_diff_eq!(
            // t = 2 > k = 1: unreachable sector.
            d_coefficient_oracle(6, 2, 3, 1, 1).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let mut c = OracleCache::open(&path).unwrap();
        let v = c.d_coefficient(4, 4, 2, 1, 1).unwrap();
        c.save().unwrap();
        let mut c2 = OracleCache::open(&path).unwrap();
        assert_abs_diff_eq!(c2.d_coefficient(4, 4, 2, 1, 1).unwrap(), v, epsilon = 0.0);
    }
}
