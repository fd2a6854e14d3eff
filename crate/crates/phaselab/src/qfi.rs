//! SLD and RLD quantum Fisher information: a generic SLD calculator for
//! parameterized density-matrix families, the Choi-based RLD route for the
//! dephasing phase channel, and the n-use additivity bound.

use crate::channel::{choi_matrix, ghz_parallel_output, sequential_output, ChannelParams};
use crate::error::{PhaseLabError, Result};
use crate::linalg::{
    hermitian_eig, max_asymmetry, operator_norm, partial_trace_multi, pseudo_inverse_on_support,
    CMatrix, DensityMatrix,
};
use crate::tol;

/// A density matrix together with its derivative along the parameter.
#[derive(Debug, Clone)]
pub struct StateFamilyPoint {
    rho: DensityMatrix,
    drho: CMatrix,
}

impl StateFamilyPoint {
    pub fn new(rho: DensityMatrix, drho: CMatrix) -> Result<Self> {
        if drho.nrows() != rho.dim() || drho.ncols() != rho.dim() {
            return Err(PhaseLabError::DimensionMismatch(format!(
                "drho is {}x{}, rho is {}x{}",
                drho.nrows(),
                drho.ncols(),
                rho.dim(),
                rho.dim()
            )));
        }
        let asym = max_asymmetry(&drho);
        if asym > tol::HERMITICITY {
            return Err(PhaseLabError::NonHermitian {
                max_asymmetry: asym,
            });
        }
        let tr = drho.trace();
        if tr.norm() > tol::HERMITICITY {
            return Err(PhaseLabError::InvalidState(format!(
                "drho has trace {tr}, expected 0"
            )));
        }
        Ok(Self { rho, drho })
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn drho(&self) -> &CMatrix {
        &self.drho
    }
}

/// SLD quantum Fisher information J = sum 2|<i|drho|j>|^2 / (li + lj) over
/// eigenpairs of rho with li + lj above the support cutoff.
///
/// Rejects families whose derivative has weight entirely outside the support
/// of rho (no SLD operator exists there).
pub fn sld_qfi(point: &StateFamilyPoint) -> Result<f64> {
    let eig = hermitian_eig(point.rho().matrix())?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = tol::SUPPORT_CUTOFF * lambda_max.max(1.0e-300);
    // drho in the eigenbasis of rho.
    let d_eig = eig.vectors.adjoint() * point.drho() * &eig.vectors;
    let n = eig.values.len();
    let mut qfi = 0.0;
    let mut leak_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            let denom = eig.values[i].max(0.0) + eig.values[j].max(0.0);
            let w = d_eig[(i, j)].norm_sqr();
            if denom > cutoff {
                qfi += 2.0 * w / denom;
            } else {
                leak_sq += w;
            }
        }
    }
    let leak = leak_sq.sqrt();
    if leak > tol::SLD_SUPPORT_LEAK {
        return Err(PhaseLabError::SupportViolation { leak });
    }
    Ok(qfi)
}

/// RLD channel QFI closed form 2(1-p)^2 / (p(2-p)).
pub fn rld_channel_qfi_closed(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(PhaseLabError::InvalidParameter(format!(
            "p must be in [0,1], got {p}"
        )));
    }
    if p == 0.0 {
        return Err(PhaseLabError::RldDivergence);
    }
    Ok(2.0 * (1.0 - p).powi(2) / (p * (2.0 - p)))
}

/// RLD QFI from an explicit Choi pair: 2 ||Tr_out (D C^+ D)||.
///
/// `dims` lists the tensor factors of the Choi space and `input_factors`
/// the (ascending) indices of the input factors kept by the partial trace.
pub fn rld_qfi_from_choi(
    c: &CMatrix,
    d: &CMatrix,
    dims: &[usize],
    input_factors: &[usize],
) -> Result<f64> {
    let eig = hermitian_eig(c)?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let c_pinv = pseudo_inverse_on_support(c, tol::SUPPORT_CUTOFF * lambda_max.max(1e-300))?;
    let core = d * c_pinv * d;
    let reduced = partial_trace_multi(&core, dims, input_factors)?;
    Ok(2.0 * operator_norm(&reduced)?)
}

/// RLD channel QFI computed through the Choi matrix; matches the closed form.
pub fn rld_channel_qfi_numeric(params: ChannelParams) -> Result<f64> {
    if params.p() == 0.0 {
        return Err(PhaseLabError::RldDivergence);
    }
    let (c, d) = choi_matrix(params);
    rld_qfi_from_choi(&c, &d, &[2, 2], &[0])
}

/// n-use RLD bound n * 2(1-p)^2/(p(2-p)); additivity of the channel RLD QFI.
pub fn n_use_rld_bound(p: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(PhaseLabError::InvalidParameter("n must be >= 1".into()));
    }
    Ok(n as f64 * rld_channel_qfi_closed(p)?)
}

/// SLD QFI of m sequential uses on |+>: m^2 (1-p)^{2m}.
pub fn sequential_sld_qfi(p: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(PhaseLabError::InvalidParameter("m must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(PhaseLabError::InvalidParameter(format!(
            "p must be in [0,1], got {p}"
        )));
    }
    Ok((m as f64).powi(2) * (1.0 - p).powi(2 * m as i32))
}

/// GHZ family point with the analytic phase derivative, in the 2x2 block basis.
pub fn ghz_family_point(params: ChannelParams, n: usize) -> Result<StateFamilyPoint> {
    let rho = ghz_parallel_output(params, n)?;
    let s = (1.0 - params.p()).powi(n as i32);
    // Off-diagonal of rho is (s/2) e^{i n theta}; only it depends on theta.
    let phase = crate::Complex::from_polar(s / 2.0, n as f64 * params.theta());
    let scale = crate::Complex::new(0.0, n as f64);
    let mut drho = CMatrix::zeros(2, 2);
    drho[(0, 1)] = scale * phase;
    drho[(1, 0)] = drho[(0, 1)].conj();
    StateFamilyPoint::new(rho, drho)
}

/// GHZ family point with a central finite-difference derivative of step h.
pub fn ghz_family_point_fd(params: ChannelParams, n: usize, h: f64) -> Result<StateFamilyPoint> {
    let rho = ghz_parallel_output(params, n)?;
    let plus = ghz_parallel_output(ChannelParams::new(params.theta() + h, params.p())?, n)?;
    let minus = ghz_parallel_output(ChannelParams::new(params.theta() - h, params.p())?, n)?;
    let mut drho = (plus.into_matrix() - minus.into_matrix()).scale(1.0 / (2.0 * h));
    // Strip rounding noise: symmetrize and remove the residual trace.
    drho = (&drho + drho.adjoint()).scale(0.5);
    let dim = drho.nrows();
    let shift = drho.trace() / crate::Complex::new(dim as f64, 0.0);
    for i in 0..dim {
        drho[(i, i)] -= shift;
    }
    StateFamilyPoint::new(rho, drho)
}

/// Sequential-strategy family point (m uses on |+>) with analytic derivative.
pub fn sequential_family_point(params: ChannelParams, m: usize) -> Result<StateFamilyPoint> {
    let rho = sequential_output(params, m)?;
    let s = (1.0 - params.p()).powi(m as i32);
    let phase = crate::Complex::from_polar(s / 2.0, m as f64 * params.theta());
    let scale = crate::Complex::new(0.0, m as f64);
    let mut drho = CMatrix::zeros(2, 2);
    drho[(0, 1)] = scale * phase;
    drho[(1, 0)] = drho[(0, 1)].conj();
    StateFamilyPoint::new(rho, drho)
}
