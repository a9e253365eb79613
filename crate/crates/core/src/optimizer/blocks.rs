//! Exact block minimizers for the receiver, weight and precoder.

use crate::error::{Error, Result};
use crate::linalg::{c, fro_norm_sq, hermitian_eigen, hermitian_part, identity, trace, CMat, HpdFactor};

/// MMSE receiver `Z = (ĤWW^HĤ^H + Σ)⁻¹ĤW`.
pub fn update_z(h_hat: &CMat, w: &CMat, sigma: &CMat) -> Result<CMat> {
    let hw = h_hat * w;
    let cov = &hw * hw.adjoint() + sigma;
    Ok(HpdFactor::new(&cov)?.solve(&hw))
}

/// `Ω = J⁻¹`.
pub fn update_omega(j: &CMat) -> Result<CMat> {
    HpdFactor::new(j)
        .map(|f| f.inverse())
        .map_err(|_| Error::Numerical("MSE matrix is singular; solver state is broken".into()))
}

/// Inputs of the precoder update that stay fixed while `W` moves.
#[derive(Debug, Clone, Copy)]
pub struct PrecoderInputs<'a> {
    pub h_hat: &'a CMat,
    pub g_hat: &'a CMat,
    pub r_hat: &'a CMat,
    pub z: &'a CMat,
    pub omega: &'a CMat,
    pub var_g: f64,
    pub var_r: f64,
    pub p_tx: f64,
}

/// Precoder together with the power multiplier that produced it.
#[derive(Debug, Clone)]
pub struct PrecoderUpdate {
    pub w: CMat,
    pub eta: f64,
}

/// Bisection settings for the power multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSearch {
    /// Relative width at which the bracket is accepted.
    pub rel_tol: f64,
    pub growth: f64,
    pub max_doublings: usize,
}

impl Default for EtaSearch {
    fn default() -> Self {
        Self { rel_tol: 1e-13, growth: 2.0, max_doublings: 200 }
    }
}

/// `W(η) = U(Λ + η)⁻¹U^H B` from the eigenpairs of the (PSD) quadratic term.
struct EtaMap {
    vals: Vec<f64>,
    vecs: CMat,
    /// `U^H B` rows.
    proj: CMat,
    weights: Vec<f64>,
    zero: f64,
}

impl EtaMap {
    fn new(m: &CMat, b: &CMat) -> Self {
        let (vals, vecs) = hermitian_eigen(m);
        let proj = vecs.adjoint() * b;
        let weights = proj.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect();
        let top = vals.last().copied().unwrap_or(0.0).max(0.0);
        Self { vals, vecs, proj, weights, zero: 1e-12 * top }
    }

    fn gain(&self, i: usize, eta: f64) -> Option<f64> {
        let lam = self.vals[i].max(0.0) + eta;
        if eta == 0.0 && self.vals[i] <= self.zero {
            None
        } else {
            Some(1.0 / lam)
        }
    }

    /// `‖W(η)‖²`; at `η = 0` null-space directions are dropped when unexcited
    /// and make the power infinite otherwise.
    fn power(&self, eta: f64) -> f64 {
        let mut p = 0.0;
        for (i, &wt) in self.weights.iter().enumerate() {
            match self.gain(i, eta) {
                Some(g) => p += wt * g * g,
                None if wt > 0.0 && wt > 1e-24 * self.weights.iter().sum::<f64>() => return f64::INFINITY,
                None => {}
            }
        }
        p
    }

    fn precoder(&self, eta: f64) -> CMat {
        let mut scaled = self.proj.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            let g = self.gain(i, eta).unwrap_or(0.0);
            row *= c(g, 0.0);
        }
        &self.vecs * scaled
    }
}

/// The quadratic term and right-hand side of the precoder update.
pub fn precoder_system(inp: &PrecoderInputs<'_>) -> (CMat, CMat) {
    let zo = inp.z * inp.omega;
    let b = inp.h_hat.adjoint() * &zo;
    let t_z = trace(&(inp.omega * inp.z.adjoint() * inp.z)).re;
    let rz = inp.r_hat.adjoint() * inp.z;
    let t_rz = trace(&(inp.omega * rz.adjoint() * &rz)).re;
    let n_ris = inp.g_hat.nrows() as f64;
    let mut m = &b * inp.z.adjoint() * inp.h_hat;
    m += inp.g_hat.adjoint() * inp.g_hat * c(inp.var_r * t_z, 0.0);
    m += identity(m.nrows()) * c(inp.var_g * t_rz + n_ris * inp.var_g * inp.var_r * t_z, 0.0);
    (hermitian_part(&m), b)
}

/// Power-constrained precoder minimizing the weighted MSE for fixed `Z`, `Ω`.
pub fn update_w(inp: &PrecoderInputs<'_>, search: &EtaSearch) -> Result<PrecoderUpdate> {
    if !(inp.p_tx > 0.0) {
        return Err(Error::Config(format!("transmit power must be positive, got {}", inp.p_tx)));
    }
    let (m, b) = precoder_system(inp);
    let map = EtaMap::new(&m, &b);
    if map.power(0.0) <= inp.p_tx {
        return Ok(PrecoderUpdate { w: map.precoder(0.0), eta: 0.0 });
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while map.power(hi) > inp.p_tx {
        hi *= search.growth;
        doublings += 1;
        if doublings > search.max_doublings || !hi.is_finite() {
            return Err(Error::Numerical("power multiplier bracket not found".into()));
        }
    }
    let mut lo = if doublings == 0 { 0.0 } else { hi / search.growth };
    while hi - lo > search.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if map.power(mid) > inp.p_tx {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut w = map.precoder(hi);
    // Remove the last sliver of bisection slack so the constraint is tight.
    let p = fro_norm_sq(&w);
    if p > inp.p_tx {
        w *= c((inp.p_tx / p).sqrt(), 0.0);
    }
    Ok(PrecoderUpdate { w, eta: hi })
}

/// `‖W(η)‖²` for a given multiplier; exposed for monotonicity checks.
pub fn precoder_power(inp: &PrecoderInputs<'_>, eta: f64) -> f64 {
    let (m, b) = precoder_system(inp);
    EtaMap::new(&m, &b).power(eta)
}
