//! Interference-plus-noise covariance of the estimated-channel link.
//!
//! With `Ĥ = R̂ΦĜ` the received signal is `y = ĤWs + n̂`, where `n̂` collects
//! the channel-error leakage and thermal noise. Two covariance variants exist:
//! the design variant the optimizer sees (no knowledge of `ΔM`, includes the
//! second-order `ΔRΦΔG` power), and the evaluation variant used for reporting
//! (first-order error terms plus the mismatch leakage `R̂ΦΔM`).

use crate::error::{Error, Result};
use crate::error_model::ChannelSet;
use crate::linalg::{c, fro_norm, fro_norm_sq, hermitian_eigen, scale_columns, scaled_identity, trace, CMat, CVec};
use crate::rng::{complex_normal_matrix, derive_seed, rng_from_seed};

const UNIT_MODULUS_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceVariant {
    Design,
    Evaluation,
}

/// `Σ` together with its additive components.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    pub variant: CovarianceVariant,
    pub sigma: CMat,
    /// `ΔH_M W W^H ΔH_M^H`; zero in the design variant.
    pub mismatch: CMat,
    /// `σ_R² tr(ĜWW^HĜ^H) I`.
    pub delta_r: CMat,
    /// `σ_G² tr(WW^H) R̂R̂^H`.
    pub delta_g: CMat,
    /// `N_R σ_G² σ_R² tr(WW^H) I`; zero in the evaluation variant.
    pub cross: CMat,
    /// `σ² I`.
    pub thermal: CMat,
}

impl NoiseCovariance {
    fn assemble(variant: CovarianceVariant, mismatch: CMat, delta_r: CMat, delta_g: CMat, cross: CMat, thermal: CMat) -> Result<Self> {
        let sigma = &mismatch + &delta_r + &delta_g + &cross + &thermal;
        let out = Self { variant, sigma, mismatch, delta_r, delta_g, cross, thermal };
        out.verify()?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// Hermitian and PSD check; a failure means a broken input, not roundoff.
    pub fn verify(&self) -> Result<()> {
        let scale = fro_norm(&self.sigma).max(f64::MIN_POSITIVE);
        let skew = fro_norm(&(&self.sigma - self.sigma.adjoint()));
        if !(skew < 1e-10 * scale) {
            return Err(Error::Numerical(format!("covariance is not Hermitian (skew {skew:.3e})")));
        }
        let floor = self.thermal[(0, 0)].re;
        let (vals, _) = hermitian_eigen(&self.sigma);
        let min = vals.first().copied().unwrap_or(floor);
        if min < floor - PSD_TOL * scale.max(1.0) {
            return Err(Error::Numerical(format!("covariance eigenvalue {min:.3e} below noise floor {floor:.3e}")));
        }
        Ok(())
    }
}

/// `R Φ G` with `Φ = diag(phi)`.
pub fn cascade(r: &CMat, phi: &CVec, g: &CMat) -> CMat {
    scale_columns(r, phi) * g
}

pub fn check_unit_modulus(phi: &CVec) -> Result<()> {
    match phi.iter().position(|z| (z.norm() - 1.0).abs() >= UNIT_MODULUS_TOL) {
        None => Ok(()),
        Some(n) => Err(Error::Numerical(format!("phase shift {n} has modulus {}", phi[n].norm()))),
    }
}

/// `E{XZX^H}` for `X = X̂ + ΔX`, `ΔX = R_n^{1/2} E (R_m^T)^{1/2}` with white `E` of the given variance:
/// `X̂ZX̂^H + variance·tr(Z R_m^T)·R_n`.
pub fn error_product_expectation(x_hat: &CMat, z: &CMat, r_n: &CMat, r_m: &CMat, variance: f64) -> Result<CMat> {
    let (rows, cols) = x_hat.shape();
    if z.shape() != (cols, cols) || r_n.shape() != (rows, rows) || r_m.shape() != (cols, cols) {
        return Err(Error::Dimension(format!(
            "X̂ is {rows}x{cols}, Z is {:?}, R_n is {:?}, R_m is {:?}",
            z.shape(),
            r_n.shape(),
            r_m.shape()
        )));
    }
    let t = trace(&(z * r_m.transpose()));
    Ok(x_hat * z * x_hat.adjoint() + r_n * (t * variance))
}

fn gram(a: &CMat) -> CMat {
    a * a.adjoint()
}

fn shared_terms(set: &ChannelSet, w: &CMat, phi: &CVec, noise: f64) -> Result<(CMat, CMat, CMat, f64)> {
    check_unit_modulus(phi)?;
    if phi.len() != set.n_ris() || w.nrows() != set.n_tx() {
        return Err(Error::Dimension(format!(
            "phi has {} entries and W has {} rows for a {}x{} Tx-RIS channel",
            phi.len(),
            w.nrows(),
            set.n_ris(),
            set.n_tx()
        )));
    }
    let n = set.n_rx();
    let p = fro_norm_sq(w);
    let gw = &set.g_hat * w;
    let delta_r = scaled_identity(n, set.var_r * fro_norm_sq(&gw));
    let delta_g = gram(&set.r_hat) * c(set.var_g * p, 0.0);
    Ok((delta_r, delta_g, scaled_identity(n, noise), p))
}

/// Covariance the optimizer works with; excludes the unknown mismatch.
pub fn sigma_design(set: &ChannelSet, w: &CMat, phi: &CVec, noise: f64) -> Result<NoiseCovariance> {
    let (delta_r, delta_g, thermal, p) = shared_terms(set, w, phi, noise)?;
    let n = set.n_rx();
    let cross = scaled_identity(n, set.n_ris() as f64 * set.var_g * set.var_r * p);
    NoiseCovariance::assemble(CovarianceVariant::Design, CMat::zeros(n, n), delta_r, delta_g, cross, thermal)
}

/// Covariance used to score a design against the mismatched ground truth.
pub fn sigma_eval(set: &ChannelSet, w: &CMat, phi: &CVec, noise: f64) -> Result<NoiseCovariance> {
    let (delta_r, delta_g, thermal, _) = shared_terms(set, w, phi, noise)?;
    let n = set.n_rx();
    let leak = cascade(&set.r_hat, phi, &set.mismatch) * w;
    NoiseCovariance::assemble(CovarianceVariant::Evaluation, gram(&leak), delta_r, delta_g, CMat::zeros(n, n), thermal)
}

/// Sample covariance of `n̂ = (H − Ĥ)Ws + n` with fresh `ΔG`, `ΔR`, `s`, `n` per draw.
///
/// With `exact` the second-order products `ΔRΦΔG` and `ΔRΦΔM` are kept;
/// otherwise only the first-order leakage terms are simulated.
pub fn empirical_covariance(set: &ChannelSet, w: &CMat, phi: &CVec, noise: f64, draws: usize, seed: u64, exact: bool) -> CMat {
    let n = set.n_rx();
    let ns = w.ncols();
    let mut rng = rng_from_seed(derive_seed(seed, &[exact as u64]));
    let rphi = scale_columns(&set.r_hat, phi);
    let phi_g = scale_columns(&set.g_hat.transpose(), phi).transpose();
    let phi_m = scale_columns(&set.mismatch.transpose(), phi).transpose();
    let leak = &rphi * &set.mismatch * w;
    let mut acc = CMat::zeros(n, n);
    for _ in 0..draws.max(1) {
        let dr = complex_normal_matrix(&mut rng, n, set.n_ris(), set.var_r);
        let dg = complex_normal_matrix(&mut rng, set.n_ris(), set.n_tx(), set.var_g);
        let s = complex_normal_matrix(&mut rng, ns, 1, 1.0);
        let thermal = complex_normal_matrix(&mut rng, n, 1, noise);
        let mut dh = &dr * &phi_g + &rphi * &dg;
        if exact {
            let phi_dg = scale_columns(&dg.transpose(), phi).transpose();
            dh += &dr * (phi_dg + &phi_m);
        }
        let v = (dh * w + &leak) * s + thermal;
        acc += &v * v.adjoint();
    }
    acc / c(draws.max(1) as f64, 0.0)
}
