//! Alternating-direction penalty method for the unit-modulus QP.
//!
//! Splits `φ` into a free copy and a unit-modulus copy `φ₀` tied by
//! `φ = φ₀`. Each sweep projects `u + ρφ` onto the unit circle, solves the
//! regularized linear system for `φ`, then updates the multiplier. The penalty
//! grows only when the residual stalls.

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, CMat, CVec, HpdFactor};

use super::qp::qp_objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdpmParams {
    pub epsilon: f64,
    /// Required residual contraction before the penalty is left alone.
    pub delta1: f64,
    /// Penalty growth factor.
    pub delta2: f64,
    /// Multiplier magnitude that triggers rescaling.
    pub kappa: f64,
    pub max_iters: usize,
    /// Eigenvalues below this fraction of `λ_max` count as zero when picking `ρ⁰`.
    pub zero_eig_rel: f64,
}

impl Default for AdpmParams {
    fn default() -> Self {
        Self { epsilon: 1e-6, delta1: 0.95, delta2: 1.05, kappa: 1e3, max_iters: 500, zero_eig_rel: 1e-12 }
    }
}

impl AdpmParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.delta1 > 0.0
            && self.delta1 < 1.0
            && self.delta2 > 1.0
            && self.kappa > 0.0
            && self.max_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid ADPM parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdpmResult {
    /// Unit-modulus phases.
    pub phi: CVec,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub rho_final: f64,
    /// Penalty after each iteration; non-decreasing.
    pub rho_history: Vec<f64>,
}

fn project(v: &CVec, fallback: &CVec) -> CVec {
    CVec::from_fn(v.len(), |n, _| {
        let z = v[n];
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            fallback[n] / fallback[n].norm()
        }
    })
}

/// `ρ⁰ = √(λ_min⁺ λ_max)` with the smallest nonzero eigenvalue; 1 when `A = 0`.
pub fn initial_penalty(a: &CMat, zero_rel: f64) -> f64 {
    let (vals, _) = hermitian_eigen(a);
    let max = vals.last().copied().unwrap_or(0.0);
    if !(max > 0.0) {
        return 1.0;
    }
    let min = vals.iter().copied().find(|&v| v > zero_rel * max).unwrap_or(max);
    (min * max).sqrt()
}

pub fn adpm_solve(a: &CMat, d: &CVec, params: &AdpmParams, phi_init: &CVec) -> Result<AdpmResult> {
    params.validate()?;
    let n = d.len();
    if a.shape() != (n, n) || phi_init.len() != n {
        return Err(Error::Dimension(format!("A is {:?}, d has {n} entries, init has {}", a.shape(), phi_init.len())));
    }
    let ones = CVec::from_element(n, c(1.0, 0.0));
    let start = project(phi_init, &ones);
    let rhs_lin = d.map(|z| z.conj() * 2.0);

    let mut rho = initial_penalty(a, params.zero_eig_rel);
    let mut factor = HpdFactor::new(&(a * c(2.0, 0.0) + CMat::identity(n, n) * c(rho, 0.0)))?;
    let mut u = CVec::zeros(n);
    let mut phi = start.clone();
    let mut phi0 = start.clone();
    let mut prev_residual = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut best = (qp_objective(a, d, &start), start.clone());
    let mut rho_history = Vec::new();

    for it in 1..=params.max_iters {
        let gamma = &u + &phi * c(rho, 0.0);
        phi0 = project(&gamma, &phi0);
        phi = factor.solve_vec(&(&phi0 * c(rho, 0.0) - &u + &rhs_lin));
        let gap = &phi - &phi0;
        residual = gap.norm();
        u += gap * c(rho, 0.0);
        let umax = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if umax > params.kappa {
            u /= c(umax, 0.0);
        }

        let f0 = qp_objective(a, d, &phi0);
        if f0 < best.0 {
            best = (f0, phi0.clone());
        }
        if residual <= params.epsilon {
            rho_history.push(rho);
            return Ok(AdpmResult { phi: phi0, iterations: it, residual, converged: true, rho_final: rho, rho_history });
        }
        if residual > params.delta1 * prev_residual {
            rho *= params.delta2;
            factor = HpdFactor::new(&(a * c(2.0, 0.0) + CMat::identity(n, n) * c(rho, 0.0)))?;
        }
        rho_history.push(rho);
        prev_residual = residual;
    }
    Ok(AdpmResult {
        phi: best.1,
        iterations: params.max_iters,
        residual,
        converged: false,
        rho_final: rho,
        rho_history,
    })
}
