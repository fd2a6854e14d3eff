//! Small dense complex linear algebra shared by every other module:
//! Hermitian eigendecomposition, Kronecker products, partial traces,
//! operator norm and pseudo-inverse on support.
//!
//! Everything here is dense; the largest dimension used anywhere in the
//! crate is the 924-dimensional weight subspace of the 12-qubit oracle.

use nalgebra::{DMatrix, DVector};

use crate::error::{PhaseLabError, Result};
use crate::tol;
use crate::Complex;

pub type CMatrix = DMatrix<Complex>;
pub type CVector = DVector<Complex>;

/// Max entrywise |M - M^dag|.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

fn require_hermitian(m: &CMatrix, tolerance: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(PhaseLabError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = max_asymmetry(m);
    if asym > tolerance {
        return Err(PhaseLabError::NonHermitian {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order; `vectors` holds the matching
/// orthonormal eigenvectors as columns.
#[derive(Debug)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEig {
    /// Rebuild V diag(values) V^dag; used by the reconstruction contract.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let lambda = CMatrix::from_diagonal(&CVector::from_iterator(
            n,
            self.values.iter().map(|&v| Complex::new(v, 0.0)),
        ));
        &self.vectors * lambda * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with a contract check on the reconstruction.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEig> {
    require_hermitian(m, tol::HERMITICITY)?;
    // Symmetrize so the backend sees an exactly Hermitian input.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    let out = HermitianEig { values, vectors };
    let err = max_abs(&(m - out.reconstruct()));
    if err > tol::EIG_RECONSTRUCTION {
        return Err(PhaseLabError::NumericalContract(format!(
            "eigendecomposition reconstruction error {err:.3e} exceeds {:.1e}",
            tol::EIG_RECONSTRUCTION
        )));
    }
    Ok(out)
}

/// Max entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kronecker product in the usual row-major factor order.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Partial trace over one factor of a bipartite operator on A (x) B.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep_first: bool) -> Result<CMatrix> {
    let keep = if keep_first { vec![0] } else { vec![1] };
    partial_trace_multi(m, &[dims.0, dims.1], &keep)
}

/// Partial trace over an arbitrary subset of tensor factors.
///
/// `dims` lists the factor dimensions in Kronecker order and `keep` the
/// indices of the factors to retain (ascending).
pub fn partial_trace_multi(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(PhaseLabError::DimensionMismatch(format!(
            "operator is {}x{}, factor dimensions multiply to {}",
            m.nrows(),
            m.ncols(),
            total
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(PhaseLabError::InvalidParameter(
            "keep indices must be ascending and in range".into(),
        ));
    }
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Strides of each factor in the flattened index.
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let unflatten = |mut combo: usize, factors: &[usize]| -> usize {
        let mut index = 0;
        for &f in factors.iter().rev() {
            index += (combo % dims[f]) * strides[f];
            combo /= dims[f];
        }
        index
    };

    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for row_kept in 0..kept_dim {
        let row_base = unflatten(row_kept, keep);
        for col_kept in 0..kept_dim {
            let col_base = unflatten(col_kept, keep);
            let mut sum = Complex::new(0.0, 0.0);
            for t in 0..traced_dim {
                let offset = unflatten(t, &traced);
                sum += m[(row_base + offset, col_base + offset)];
            }
            out[(row_kept, col_kept)] = sum;
        }
    }
    Ok(out)
}

/// Operator norm of a Hermitian matrix (largest absolute eigenvalue).
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    let eig = hermitian_eig(m)?;
    Ok(eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Moore-Penrose inverse of a Hermitian PSD matrix restricted to its support.
///
/// Eigenvalues below `cutoff` (absolute) are treated as zero.
pub fn pseudo_inverse_on_support(m: &CMatrix, cutoff: f64) -> Result<CMatrix> {
    let eig = hermitian_eig(m)?;
    let n = eig.values.len();
    let inv = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        eig.values.iter().map(|&v| {
            if v.abs() > cutoff {
                Complex::new(1.0 / v, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        }),
    ));
    Ok(&eig.vectors * inv * eig.vectors.adjoint())
}

/// Density matrix with validated invariants.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let asym = max_asymmetry(&matrix);
        if asym > tol::DENSITY_MATRIX {
            return Err(PhaseLabError::NonHermitian {
                max_asymmetry: asym,
            });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol::DENSITY_MATRIX || trace.im.abs() > tol::DENSITY_MATRIX {
            return Err(PhaseLabError::InvalidState(format!(
                "trace = {trace}, expected 1"
            )));
        }
        let eig = hermitian_eig(&matrix)?;
        if let Some(min) = eig.values.last() {
            if *min < tol::PSD_FLOOR {
                return Err(PhaseLabError::InvalidState(format!(
                    "negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    pub fn from_pure(state: &PureState) -> Self {
        let v = state.amplitudes();
        Self {
            matrix: v * v.adjoint(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

/// Normalized pure state.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tol::UNIT_NORM {
            return Err(PhaseLabError::InvalidState(format!(
                "squared norm = {norm_sq}, expected 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// |+> on a qubit.
    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: CVector::from_vec(vec![Complex::new(s, 0.0), Complex::new(s, 0.0)]),
        }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
        let raw = CMatrix::from_fn(n, n, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        (&raw + raw.adjoint()).scale(0.5)
    }

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    #[test]
    fn eig_identity_and_paulis() {
        let eye = CMatrix::identity(2, 2);
        let eig = hermitian_eig(&eye).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-12);

        let eig = hermitian_eig(&pauli_z()).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], -1.0, epsilon = 1e-12);

        let eig = hermitian_eig(&pauli_x()).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], -1.0, epsilon = 1e-12);
        // Eigenvector of +1 must be |+> up to phase.
        let v = eig.vectors.column(0);
        assert_abs_diff_eq!(v[0].norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
        assert_abs_diff_eq!((v[0] - v[1]).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        match hermitian_eig(&m) {
            Err(PhaseLabError::NonHermitian { max_asymmetry }) => {
                assert!(max_asymmetry > 0.5);
            }
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }

    #[test]
    fn eig_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[2usize, 5, 16, 64] {
            let m = random_hermitian(n, &mut rng);
            let eig = hermitian_eig(&m).unwrap();
            assert!(max_abs(&(&m - eig.reconstruct())) <= 1e-9);
            // Orthonormal columns.
            let gram = eig.vectors.adjoint() * &eig.vectors;
            assert!(max_abs(&(gram - CMatrix::identity(n, n))) <= 1e-10);
        }
    }

    #[test]
    fn partial_trace_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let full = kron(&a, &b);
        let got = partial_trace(&full, (2, 3), true).unwrap();
        let want = a.scale(1.0) * b.trace();
        assert!(max_abs(&(got - want)) <= 1e-12);
    }

    #[test]
    fn partial_trace_bell_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = CVector::from_vec(vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]);
        let rho = &bell * bell.adjoint();
        let reduced = partial_trace(&rho, (2, 2), false).unwrap();
        assert!(max_abs(&(reduced - CMatrix::identity(2, 2).scale(0.5))) <= 1e-12);
    }

    #[test]
    fn partial_trace_preserves_trace_and_adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_hermitian(6, &mut rng);
        let tr_b = partial_trace(&m, (2, 3), true).unwrap();
        assert_abs_diff_eq!(tr_b.trace().re, m.trace().re, epsilon = 1e-10);

        // Tr((A (x) I) M) = Tr(A Tr_B(M)).
        let a = random_hermitian(2, &mut rng);
        let lhs = (kron(&a, &CMatrix::identity(3, 3)) * &m).trace();
        let rhs = (&a * &tr_b).trace();
        assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-10);
        assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-10);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = CMatrix::identity(5, 5);
        assert!(partial_trace(&m, (2, 3), true).is_err());
    }

    #[test]
    fn partial_trace_middle_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(2, &mut rng);
        let cmat = random_hermitian(2, &mut rng);
        let full = kron(&kron(&a, &b), &cmat);
        let got = partial_trace_multi(&full, &[2, 2, 2], &[0, 2]).unwrap();
        let want = kron(&a, &cmat) * b.trace();
        assert!(max_abs(&(got - want)) <= 1e-12);
    }

    #[test]
    fn operator_norm_examples() {
        let scaled = CMatrix::identity(3, 3).scale(-2.5);
        assert_abs_diff_eq!(operator_norm(&scaled).unwrap(), 2.5, epsilon = 1e-12);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3., 0.), c(-5., 0.)]));
        assert_abs_diff_eq!(operator_norm(&d).unwrap(), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(operator_norm(&pauli_x()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn operator_norm_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_hermitian(8, &mut rng);
        let u = hermitian_eig(&random_hermitian(8, &mut rng)).unwrap().vectors;
        let rotated = &u * &m * u.adjoint();
        assert_abs_diff_eq!(
            operator_norm(&rotated).unwrap(),
            operator_norm(&m).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn pseudo_inverse_examples() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2., 0.), c(0., 0.)]));
        let pinv = pseudo_inverse_on_support(&d, 1e-12).unwrap();
        assert_abs_diff_eq!(pinv[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pinv[(1, 1)].re, 0.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(4, &mut rng);
        let psd = &h * h.adjoint(); // full rank almost surely
        let inv = pseudo_inverse_on_support(&psd, 1e-12).unwrap();
        assert!(max_abs(&(&psd * &inv - CMatrix::identity(4, 4))) <= 1e-9);
        assert!(max_abs(&(&psd * &inv * &psd - &psd)) <= 1e-8);

        // A projector is its own pseudo-inverse.
        let v = CVector::from_vec(vec![c(0.6, 0.), c(0.8, 0.)]);
        let proj = &v * v.adjoint();
        let pinv = pseudo_inverse_on_support(&proj, 1e-12).unwrap();
        assert!(max_abs(&(pinv - proj)) <= 1e-10);
    }

    #[test]
    fn density_matrix_invariants() {
        assert!(DensityMatrix::new(CMatrix::identity(2, 2).scale(0.5)).is_ok());
        assert!(DensityMatrix::new(CMatrix::identity(2, 2)).is_err());
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.5, 0.), c(-0.5, 0.)]));
        assert!(DensityMatrix::new(neg).is_err());
    }
}
