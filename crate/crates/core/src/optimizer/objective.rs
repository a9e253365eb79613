//! Rate and MSE forms of the link objective.

use crate::error::{Error, Result};
use crate::linalg::{c, identity, trace, CMat, HpdFactor};
use crate::interference::NoiseCovariance;

/// `log₂ det(I + ĤWW^HĤ^H Σ⁻¹)` in bits/s/Hz.
///
/// Evaluated as `log₂ det(I + M^H M)` with `M = L⁻¹ĤW`, `Σ = LL^H`, which keeps
/// the argument Hermitian positive definite.
pub fn achievable_se(h_hat: &CMat, w: &CMat, sigma: &NoiseCovariance) -> Result<f64> {
    achievable_se_raw(h_hat, w, &sigma.sigma)
}

pub fn achievable_se_raw(h_hat: &CMat, w: &CMat, sigma: &CMat) -> Result<f64> {
    let l = HpdFactor::new(sigma)?;
    let m = l.solve_lower(&(h_hat * w));
    let gram = identity(m.ncols()) + m.adjoint() * &m;
    Ok(HpdFactor::new(&gram)?.ln_det().max(0.0) / std::f64::consts::LN_2)
}

/// `J = Z^H(ĤWW^HĤ^H + Σ)Z − Z^HĤW − W^HĤ^HZ + I`.
pub fn mse_matrix(z: &CMat, w: &CMat, h_hat: &CMat, sigma: &CMat) -> CMat {
    let hw = h_hat * w;
    let zh_hw = z.adjoint() * &hw;
    let j = &zh_hw * zh_hw.adjoint() + z.adjoint() * sigma * z - &zh_hw - zh_hw.adjoint() + identity(w.ncols());
    (&j + j.adjoint()) * c(0.5, 0.0)
}

/// `tr(ΩJ) − ln det Ω − N_s`, the weighted-MSE surrogate.
pub fn wmmse_objective(omega: &CMat, j: &CMat) -> Result<f64> {
    let ln_det = HpdFactor::new(omega)
        .map_err(|_| Error::Numerical("weight matrix is not positive definite".into()))?
        .ln_det();
    Ok(trace(&(omega * j)).re - ln_det - omega.nrows() as f64)
}
