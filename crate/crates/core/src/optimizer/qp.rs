//! Reduction of the phase subproblem to `min φ^H A φ − 2Re(d^T φ)` on the unit torus.

use crate::linalg::{hermitian_part, CMat, CVec};

/// Quadratic `A` and linear `d` terms of the phase subproblem.
#[derive(Debug, Clone)]
pub struct PhaseQp {
    pub a: CMat,
    pub d: CVec,
}

impl PhaseQp {
    pub fn objective(&self, phi: &CVec) -> f64 {
        qp_objective(&self.a, &self.d, phi)
    }
}

/// `A = (R̂^H Z Ω Z^H R̂) ∘ (Ĝ W W^H Ĝ^H)^T`, `d_n = (Ĝ W Ω Z^H R̂)_{nn}`.
pub fn build_qp(g_hat: &CMat, r_hat: &CMat, w: &CMat, z: &CMat, omega: &CMat) -> PhaseQp {
    let zr = z.adjoint() * r_hat;
    let left = zr.adjoint() * omega * &zr;
    let gw = g_hat * w;
    let right = &gw * gw.adjoint();
    let a = hermitian_part(&left.component_mul(&right.transpose()));
    let gwo = &gw * omega;
    let d = CVec::from_fn(g_hat.nrows(), |n, _| gwo.row(n).transpose().dot(&zr.column(n)));
    PhaseQp { a, d }
}

/// `φ^H A φ − 2Re(d^T φ)`.
pub fn qp_objective(a: &CMat, d: &CVec, phi: &CVec) -> f64 {
    let quad = phi.dotc(&(a * phi)).re;
    let lin = d.transpose() * phi;
    quad - 2.0 * lin[(0, 0)].re
}
