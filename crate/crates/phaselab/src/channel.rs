//! The dephasing phase channel on a qubit, its Choi matrix and derivative,
//! and closed-form outputs for sequential and GHZ-parallel strategies.
//!
//! The channel is
//!   L(rho) = (1-p) U rho U^dag + p |0><0| rho |0><0| + p |1><1| rho |1><1|
//! with U = diag(e^{i theta/2}, e^{-i theta/2}). The phase unitary commutes
//! with the pinching, so noise-before and noise-after orderings coincide.

use crate::error::{PhaseLabError, Result};
use crate::linalg::{CMatrix, CVector, DensityMatrix};
use crate::Complex;
use std::f64::consts::PI;

/// Reduce an angle to (-pi, pi].
pub fn reduce_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta % two_pi;
    if t <= -PI {
        t += two_pi;
    } else if t > PI {
        t -= two_pi;
    }
    t
}

/// Phase and dephasing probability of a single channel use.
#[derive(Debug, Clone, Copy)]
pub struct ChannelParams {
    theta: f64,
    p: f64,
}

impl ChannelParams {
    pub fn new(theta: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(PhaseLabError::InvalidParameter(format!(
                "dephasing probability must be in [0,1], got {p}"
            )));
        }
        if !theta.is_finite() {
            return Err(PhaseLabError::InvalidParameter(format!(
                "phase must be finite, got {theta}"
            )));
        }
        Ok(Self {
            theta: reduce_angle(theta),
            p,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Per-use noise level p(n) = epsilon / n.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSchedule {
    epsilon: f64,
}

impl NoiseSchedule {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(PhaseLabError::InvalidParameter(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// p(n) = epsilon/n, valid once n >= epsilon.
    pub fn p_at(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(PhaseLabError::InvalidParameter("n must be >= 1".into()));
        }
        let p = self.epsilon / n as f64;
        if p > 1.0 {
            return Err(PhaseLabError::InvalidParameter(format!(
                "schedule gives p = {p} > 1 at n = {n}; need n >= epsilon"
            )));
        }
        Ok(p)
    }
}

fn phase_unitary(theta: f64) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_vec(vec![
        Complex::from_polar(1.0, theta / 2.0),
        Complex::from_polar(1.0, -theta / 2.0),
    ]))
}

/// One use of the channel on a qubit state.
pub fn apply_channel(params: ChannelParams, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != 2 {
        return Err(PhaseLabError::DimensionMismatch(format!(
            "channel acts on qubits, got dimension {}",
            rho.dim()
        )));
    }
    let u = phase_unitary(params.theta);
    let rotated = &u * rho.matrix() * u.adjoint();
    let mut out = rotated.scale(1.0 - params.p);
    // Pinching keeps the diagonal; it is unaffected by the phase unitary.
    out[(0, 0)] += Complex::new(params.p, 0.0) * rho.matrix()[(0, 0)];
    out[(1, 1)] += Complex::new(params.p, 0.0) * rho.matrix()[(1, 1)];
    DensityMatrix::new(out)
}

fn coherent_plus_state(total_phase: f64) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = CVector::from_vec(vec![
        Complex::from_polar(s, total_phase / 2.0),
        Complex::from_polar(s, -total_phase / 2.0),
    ]);
    &v * v.adjoint()
}

fn survival_mixture(total_phase: f64, survival: f64) -> Result<DensityMatrix> {
    let out = coherent_plus_state(total_phase).scale(survival)
        + CMatrix::identity(2, 2).scale((1.0 - survival) / 2.0);
    DensityMatrix::new(out)
}

/// m sequential uses on |+>: (1-p)^m coherent state plus maximally mixed rest.
pub fn sequential_output(params: ChannelParams, m: usize) -> Result<DensityMatrix> {
    if m == 0 {
        return Err(PhaseLabError::InvalidParameter("m must be >= 1".into()));
    }
    let survival = (1.0 - params.p).powi(m as i32);
    survival_mixture(m as f64 * params.theta, survival)
}

/// n parallel uses on the n-qubit GHZ state, written in the two-dimensional
/// {|0..0>, |1..1>} block basis.
pub fn ghz_parallel_output(params: ChannelParams, n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(PhaseLabError::InvalidParameter("n must be >= 1".into()));
    }
    let survival = (1.0 - params.p).powi(n as i32);
    survival_mixture(n as f64 * params.theta, survival)
}

/// Choi matrix C (trace 2) and its phase derivative D.
///
/// C = (2-p)|Phi><Phi| + p|Phi_perp><Phi_perp| where |Phi> is the phase-rotated
/// maximally entangled state; D = (1-p)(|Phi_perp><Phi| + h.c.).
pub fn choi_matrix(params: ChannelParams) -> (CMatrix, CMatrix) {
    let half = params.theta / 2.0;
    let zero = Complex::new(0.0, 0.0);
    // |Phi> = (e^{i theta/2}|00> + e^{-i theta/2}|11>)/sqrt(2)
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = CVector::from_vec(vec![
        Complex::from_polar(s, half),
        zero,
        zero,
        Complex::from_polar(s, -half),
    ]);
    // |Phi_perp> = d|Phi>/d(theta/2) / i = (e^{i theta/2}|00> - e^{-i theta/2}|11>)/sqrt(2)
    let phi_perp = CVector::from_vec(vec![
        Complex::from_polar(s, half),
        zero,
        zero,
        -Complex::from_polar(s, -half),
    ]);
    let c = (&phi * phi.adjoint()).scale(2.0 - params.p)
        + (&phi_perp * phi_perp.adjoint()).scale(params.p);
    // D = dC/dtheta = i(1-p)(|Phi_perp><Phi| - |Phi><Phi_perp|).
    let cross = (phi_perp.map(|z| Complex::new(0.0, 1.0) * z)) * phi.adjoint();
    let d = (&cross + cross.adjoint()).scale(1.0 - params.p);
    (c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, hermitian_eig, kron, max_abs, partial_trace_multi, PureState};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn plus_density() -> DensityMatrix {
        DensityMatrix::from_pure(&PureState::plus())
    }

    fn random_density(seed: u64) -> DensityMatrix {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw = CMatrix::from_fn(2, 2, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let psd = &raw * raw.adjoint();
        let tr = psd.trace().re;
        DensityMatrix::new(psd.scale(1.0 / tr)).unwrap()
    }

    #[test]
    fn angle_reduction() {
        assert_abs_diff_eq!(reduce_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(reduce_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(reduce_angle(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(reduce_angle(2.0 * PI + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(0.0, -0.1).is_err());
        assert!(ChannelParams::new(0.0, 1.1).is_err());
        assert!(ChannelParams::new(f64::NAN, 0.5).is_err());
        assert!(NoiseSchedule::new(-1.0).is_err());
        let sched = NoiseSchedule::new(2.0).unwrap();
        assert!(sched.p_at(1).is_err());
        assert_abs_diff_eq!(sched.p_at(8).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn noiseless_channel_is_unitary_conjugation() {
        let rho = random_density(11);
        let params = ChannelParams::new(1.1, 0.0).unwrap();
        let out = apply_channel(params, &rho).unwrap();
        let u = phase_unitary(1.1);
        let want = &u * rho.matrix() * u.adjoint();
        assert!(max_abs(&(out.matrix() - want)) <= 1e-12);
    }

    #[test]
    fn full_dephasing_of_plus_is_maximally_mixed() {
        let params = ChannelParams::new(0.9, 1.0).unwrap();
        let out = apply_channel(params, &plus_density()).unwrap();
        assert!(max_abs(&(out.matrix() - CMatrix::identity(2, 2).scale(0.5))) <= 1e-12);
    }

    #[test]
    fn matches_kraus_form() {
        // Kraus set {sqrt(1-p) U, sqrt(p)|0><0|, sqrt(p)|1><1|}.
        let theta = PI / 2.0;
        let p: f64 = 0.3;
        let rho = plus_density();
        let u = phase_unitary(theta).scale((1.0 - p).sqrt());
        let k0 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(p.sqrt(), 0.), c(0., 0.)]));
        let k1 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0., 0.), c(p.sqrt(), 0.)]));
        let want = &u * rho.matrix() * u.adjoint()
            + &k0 * rho.matrix() * k0.adjoint()
            + &k1 * rho.matrix() * k1.adjoint();
        let got = apply_channel(ChannelParams::new(theta, p).unwrap(), &rho).unwrap();
        assert!(max_abs(&(got.matrix() - want)) <= 1e-12);
    }

    #[test]
    fn sequential_consistency() {
        let params = ChannelParams::new(0.7, 0.1).unwrap();
        // m = 1 agrees with a single channel use.
        let one = sequential_output(params, 1).unwrap();
        let direct = apply_channel(params, &plus_density()).unwrap();
        assert!(max_abs(&(one.matrix() - direct.matrix())) <= 1e-12);

        // m = 5 agrees with five iterated uses.
        let mut rho = plus_density();
        for _ in 0..5 {
            rho = apply_channel(params, &rho).unwrap();
        }
        let closed = sequential_output(params, 5).unwrap();
        assert!(max_abs(&(closed.matrix() - rho.matrix())) <= 1e-12);
    }

    #[test]
    fn sequential_noiseless_is_pure() {
        let params = ChannelParams::new(0.3, 0.0).unwrap();
        let out = sequential_output(params, 7).unwrap();
        let purity = (out.matrix() * out.matrix()).trace().re;
        assert_abs_diff_eq!(purity, 1.0, epsilon = 1e-12);
        // Off-diagonal phase is e^{i m theta}.
        let od = out.matrix()[(0, 1)];
        assert_abs_diff_eq!(od.arg(), reduce_angle(7.0 * 0.3), epsilon = 1e-12);
    }

    #[test]
    fn ghz_matches_full_tensor_simulation() {
        // Apply the channel to each qubit of the GHZ state at n = 3 and
        // compare the {|000>, |111>} block.
        let n = 3;
        let theta: f64 = 0.4;
        let p: f64 = 0.2;
        let params = ChannelParams::new(theta, p).unwrap();
        let dim = 1 << n;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut ghz = CVector::zeros(dim);
        ghz[0] = c(s, 0.);
        ghz[dim - 1] = c(s, 0.);
        let mut rho = &ghz * ghz.adjoint();

        // Channel on qubit q via Kraus operators embedded with Kronecker products.
        let u = phase_unitary(theta).scale((1.0 - p).sqrt());
        let k0 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(p.sqrt(), 0.), c(0., 0.)]));
        let k1 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0., 0.), c(p.sqrt(), 0.)]));
        for q in 0..n {
            let embed = |k: &CMatrix| {
                let mut op = CMatrix::identity(1, 1);
                for i in 0..n {
                    let factor = if i == q { k.clone() } else { CMatrix::identity(2, 2) };
                    op = kron(&op, &factor);
                }
                op
            };
            let (eu, e0, e1) = (embed(&u), embed(&k0), embed(&k1));
            rho = &eu * &rho * eu.adjoint() + &e0 * &rho * e0.adjoint() + &e1 * &rho * e1.adjoint();
        }

        let block = CMatrix::from_fn(2, 2, |i, j| {
            let a = if i == 0 { 0 } else { dim - 1 };
            let b = if j == 0 { 0 } else { dim - 1 };
            rho[(a, b)]
        });
        let got = ghz_parallel_output(params, n).unwrap();
        assert!(max_abs(&(got.matrix() - block)) <= 1e-12);
    }

    #[test]
    fn ghz_edge_cases() {
        let params = ChannelParams::new(0.8, 1.0).unwrap();
        let out = ghz_parallel_output(params, 4).unwrap();
        assert!(max_abs(&(out.matrix() - CMatrix::identity(2, 2).scale(0.5))) <= 1e-12);

        let params = ChannelParams::new(0.8, 0.37).unwrap();
        let one = ghz_parallel_output(params, 1).unwrap();
        let direct = apply_channel(params, &plus_density()).unwrap();
        assert!(max_abs(&(one.matrix() - direct.matrix())) <= 1e-12);
    }

    #[test]
    fn choi_spectrum_and_trace() {
        for &p in &[0.0, 0.3, 0.7, 1.0] {
            let (cmat, d) = choi_matrix(ChannelParams::new(0.5, p).unwrap());
            assert_abs_diff_eq!(cmat.trace().re, 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d.trace().norm(), 0.0, epsilon = 1e-12);
            let eig = hermitian_eig(&cmat).unwrap();
            let mut want = vec![2.0 - p, p, 0.0, 0.0];
            want.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (got, want) in eig.values.iter().zip(&want) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn choi_rank_one_at_p0() {
        let (cmat, _) = choi_matrix(ChannelParams::new(1.2, 0.0).unwrap());
        let eig = hermitian_eig(&cmat).unwrap();
        assert_abs_diff_eq!(eig.values[0], 2.0, epsilon = 1e-12);
        assert!(eig.values[1].abs() <= 1e-12);
    }

    #[test]
    fn choi_derivative_matches_finite_difference() {
        let h = 1e-4;
        for &p in &[0.1, 0.6] {
            let theta = 0.9;
            let (_, d) = choi_matrix(ChannelParams::new(theta, p).unwrap());
            let (cp, _) = choi_matrix(ChannelParams::new(theta + h, p).unwrap());
            let (cm, _) = choi_matrix(ChannelParams::new(theta - h, p).unwrap());
            let fd = (cp - cm).scale(1.0 / (2.0 * h));
            assert!(max_abs(&(d - fd)) <= 1e-6);
        }
    }

    #[test]
    fn choi_agrees_with_channel_action() {
        // C = sum_{ij} |i><j| (x) L(|i><j|), scaled so Tr C = 2.
        let params = ChannelParams::new(0.5, 0.3).unwrap();
        let (cmat, _) = choi_matrix(params);
        let mut built = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let mut e = CMatrix::zeros(2, 2);
                e[(i, j)] = c(1.0, 0.0);
                let u = phase_unitary(params.theta());
                let mut out = (&u * &e * u.adjoint()).scale(1.0 - params.p());
                out[(0, 0)] += c(params.p(), 0.0) * e[(0, 0)];
                out[(1, 1)] += c(params.p(), 0.0) * e[(1, 1)];
                let mut basis = CMatrix::zeros(2, 2);
                basis[(i, j)] = c(1.0, 0.0);
                built += kron(&basis, &out);
            }
        }
        assert!(max_abs(&(cmat - built)) <= 1e-12);
    }

    #[test]
    fn choi_partial_trace_of_d_vanishes() {
        // Tr_out D = 0, the property behind additivity of the product bound.
        let (_, d) = choi_matrix(ChannelParams::new(0.4, 0.25).unwrap());
        let reduced = partial_trace_multi(&d, &[2, 2], &[0]).unwrap();
        assert!(linalg::max_abs(&reduced) <= 1e-12);
    }

    proptest! {
        #[test]
        fn trace_preserved(theta in -3.0f64..3.0, p in 0.0f64..1.0, seed in 0u64..1000) {
            let rho = random_density(seed);
            let out = apply_channel(ChannelParams::new(theta, p).unwrap(), &rho).unwrap();
            prop_assert!((out.matrix().trace().re - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn phase_covariance(theta in -3.0f64..3.0, phi in -3.0f64..3.0, p in 0.0f64..1.0, seed in 0u64..1000) {
            let rho = random_density(seed);
            let params = ChannelParams::new(theta, p).unwrap();
            let u = phase_unitary(phi);
            let rotated = DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
            let lhs = apply_channel(params, &rotated).unwrap();
            let rhs = apply_channel(params, &rho).unwrap();
            let rhs = &u * rhs.matrix() * u.adjoint();
            prop_assert!(max_abs(&(lhs.matrix() - rhs)) <= 1e-12);
        }

        #[test]
        fn choi_psd_on_grid(idx in 0usize..101) {
            let p = idx as f64 / 100.0;
            let (cmat, _) = choi_matrix(ChannelParams::new(0.3, p).unwrap());
            let eig = hermitian_eig(&cmat).unwrap();
            prop_assert!(*eig.values.last().unwrap() >= -1e-10);
        }

        #[test]
        fn sequential_matches_iteration(m in 1usize..64, p in 0.0f64..1.0) {
            let params = ChannelParams::new(0.31, p).unwrap();
            let mut rho = plus_density();
            for _ in 0..m {
                rho = apply_channel(params, &rho).unwrap();
            }
            let closed = sequential_output(params, m).unwrap();
            prop_assert!(max_abs(&(closed.matrix() - rho.matrix())) <= 1e-11);
        }
    }
}
