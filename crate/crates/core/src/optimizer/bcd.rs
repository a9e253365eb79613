//! Outer block-coordinate loop over `Z`, `Ω`, `W` and the RIS phases.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::error_model::ChannelSet;
use crate::interference::{cascade, sigma_design, sigma_eval};
use crate::linalg::{c, cis, fro_norm_sq, hermitian_eigen, CMat, CVec};
use crate::rng::rng_from_seed;

use super::adpm::{adpm_solve, AdpmParams};
use super::blocks::{update_omega, update_w, update_z, EtaSearch, PrecoderInputs};
use super::objective::{achievable_se, mse_matrix, wmmse_objective};
use super::qp::build_qp;

/// Transmit power, noise power and stream count, all in linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub p_tx: f64,
    pub noise: f64,
    pub n_s: usize,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_tx > 0.0 && self.p_tx.is_finite()) {
            return Err(Error::Config(format!("transmit power must be positive, got {}", self.p_tx)));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise power must be positive, got {}", self.noise)));
        }
        if self.n_s == 0 {
            return Err(Error::Config("n_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub r_max: usize,
    pub epsilon: f64,
    pub eta: EtaSearch,
    pub adpm: AdpmParams,
    /// Keep the previous phases when the phase step raises the surrogate.
    pub phase_safeguard: bool,
    /// Slack allowed before the safeguard triggers.
    pub monotone_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            r_max: 100,
            epsilon: 1e-3,
            eta: EtaSearch::default(),
            adpm: AdpmParams::default(),
            phase_safeguard: true,
            monotone_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_max == 0 {
            return Err(Error::Config("r_max must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) || !(self.eta.rel_tol > 0.0) || !(self.eta.growth > 1.0) || !(self.monotone_tol >= 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        self.adpm.validate()
    }
}

/// One outer iteration of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub outer_iter: usize,
    /// `−ln 2 · SE_design` at the end of the iteration.
    pub objective: f64,
    pub se_design: f64,
    pub se_eval: f64,
    pub adpm_iters: usize,
    pub adpm_residual: f64,
    pub eta: f64,
    /// Surrogate value before the iteration and after the `Z`, `Ω`, `W`, `φ` steps.
    pub substeps: [f64; 5],
    pub phase_rejected: bool,
}

#[derive(Debug, Clone)]
pub struct BeamformingState {
    pub w: CMat,
    pub phi: CVec,
    pub z: CMat,
    pub omega: CMat,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub outer_iters: usize,
    pub se_design: f64,
    pub se_eval: f64,
    pub eta: f64,
    pub adpm_failures: usize,
}

impl BeamformingState {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }

    /// Largest increase of the surrogate across the `Z`, `Ω`, `W` steps.
    pub fn worst_block_increase(&self) -> f64 {
        self.trace
            .iter()
            .flat_map(|r| (0..3).map(move |i| r.substeps[i + 1] - r.substeps[i]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["outer_iter", "objective", "se_design", "se_eval", "adpm_iters", "adpm_residual", "eta"])?;
        for r in &self.trace {
            wr.write_record([
                r.outer_iter.to_string(),
                format!("{:e}", r.objective),
                format!("{:e}", r.se_design),
                format!("{:e}", r.se_eval),
                r.adpm_iters.to_string(),
                format!("{:e}", r.adpm_residual),
                format!("{:e}", r.eta),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Uniformly random unit-modulus phases.
pub fn random_phases(n: usize, seed: u64) -> CVec {
    let mut rng = rng_from_seed(seed);
    CVec::from_fn(n, |_, _| cis(rng.random_range(0.0..std::f64::consts::TAU)))
}

/// Equal power on the strongest right singular directions of `Ĥ`, `‖W‖² = P`.
pub fn initial_precoder(h_hat: &CMat, n_s: usize, p_tx: f64) -> CMat {
    let n_tx = h_hat.ncols();
    let (vals, vecs) = hermitian_eigen(&(h_hat.adjoint() * h_hat));
    let top = vals.last().copied().unwrap_or(0.0);
    let rank = vals.iter().filter(|&&v| v > 1e-12 * top && top > 0.0).count();
    let streams = n_s.min(rank).max(1).min(n_tx);
    let mut w = CMat::zeros(n_tx, n_s);
    for s in 0..streams.min(n_s) {
        w.set_column(s, &vecs.column(n_tx - 1 - s));
    }
    let p = fro_norm_sq(&w);
    w * c((p_tx / p).sqrt(), 0.0)
}

/// Everything the design loop evaluates at a point `(W, φ)`.
struct Point {
    h_hat: CMat,
    sigma: CMat,
}

fn point(set: &ChannelSet, w: &CMat, phi: &CVec, link: &LinkParams) -> Result<Point> {
    Ok(Point { h_hat: cascade(&set.r_hat, phi, &set.g_hat), sigma: sigma_design(set, w, phi, link.noise)?.sigma })
}

fn surrogate(p: &Point, w: &CMat, z: &CMat, omega: &CMat) -> Result<f64> {
    wmmse_objective(omega, &mse_matrix(z, w, &p.h_hat, &p.sigma))
}

/// Design SE and evaluation SE at `(W, φ)`.
pub fn evaluate(set: &ChannelSet, w: &CMat, phi: &CVec, link: &LinkParams) -> Result<(f64, f64)> {
    let h_hat = cascade(&set.r_hat, phi, &set.g_hat);
    let design = achievable_se(&h_hat, w, &sigma_design(set, w, phi, link.noise)?)?;
    let eval = achievable_se(&h_hat, w, &sigma_eval(set, w, phi, link.noise)?)?;
    Ok((design, eval))
}

/// Joint precoder and phase design on the estimated channels.
///
/// Only `Ĝ`, `R̂` and the error variances drive the updates; the mismatch
/// enters solely through the reported evaluation SE.
pub fn bcd_solve(set: &ChannelSet, link: &LinkParams, cfg: &SolverConfig, seed: u64) -> Result<BeamformingState> {
    link.validate()?;
    cfg.validate()?;
    let mut phi = random_phases(set.n_ris(), seed);
    let mut w = initial_precoder(&cascade(&set.r_hat, &phi, &set.g_hat), link.n_s, link.p_tx);
    let mut here = point(set, &w, &phi, link)?;
    let mut z = update_z(&here.h_hat, &w, &here.sigma)?;
    let mut omega = update_omega(&mse_matrix(&z, &w, &here.h_hat, &here.sigma))?;
    let mut prev_obj = -std::f64::consts::LN_2 * evaluate(set, &w, &phi, link)?.0;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut eta = 0.0;
    let mut adpm_failures = 0;
    let mut last = (0.0, 0.0);

    for r in 1..=cfg.r_max {
        let mut sub = [0.0; 5];
        sub[0] = surrogate(&here, &w, &z, &omega)?;

        z = update_z(&here.h_hat, &w, &here.sigma)?;
        sub[1] = surrogate(&here, &w, &z, &omega)?;

        omega = update_omega(&mse_matrix(&z, &w, &here.h_hat, &here.sigma))?;
        sub[2] = surrogate(&here, &w, &z, &omega)?;

        let upd = update_w(
            &PrecoderInputs {
                h_hat: &here.h_hat,
                g_hat: &set.g_hat,
                r_hat: &set.r_hat,
                z: &z,
                omega: &omega,
                var_g: set.var_g,
                var_r: set.var_r,
                p_tx: link.p_tx,
            },
            &cfg.eta,
        )?;
        w = upd.w;
        eta = upd.eta;
        here = point(set, &w, &phi, link)?;
        sub[3] = surrogate(&here, &w, &z, &omega)?;

        let qp = build_qp(&set.g_hat, &set.r_hat, &w, &z, &omega);
        let sol = adpm_solve(&qp.a, &qp.d, &cfg.adpm, &phi)?;
        if !sol.converged {
            adpm_failures += 1;
        }
        let candidate = point(set, &w, &sol.phi, link)?;
        let cand_obj = surrogate(&candidate, &w, &z, &omega)?;
        let rejected = cfg.phase_safeguard && cand_obj > sub[3] + cfg.monotone_tol * sub[3].abs().max(1.0);
        if rejected {
            sub[4] = sub[3];
        } else {
            phi = sol.phi;
            here = candidate;
            sub[4] = cand_obj;
        }

        let (se_design, se_eval) = evaluate(set, &w, &phi, link)?;
        last = (se_design, se_eval);
        let obj = -std::f64::consts::LN_2 * se_design;
        trace.push(TraceRow {
            outer_iter: r,
            objective: obj,
            se_design,
            se_eval,
            adpm_iters: sol.iterations,
            adpm_residual: sol.residual,
            eta,
            substeps: sub,
            phase_rejected: rejected,
        });
        if (obj - prev_obj).abs() < cfg.epsilon {
            converged = true;
            break;
        }
        prev_obj = obj;
    }

    Ok(BeamformingState {
        w,
        phi,
        z,
        omega,
        outer_iters: trace.len(),
        trace,
        converged,
        se_design: last.0,
        se_eval: last.1,
        eta,
        adpm_failures,
    })
}
