//! Weighted-MMSE joint beamforming: block updates, phase QP and the outer loop.

pub mod adpm;
pub mod bcd;
pub mod blocks;
pub mod objective;
pub mod qp;

pub use adpm::{adpm_solve, AdpmParams, AdpmResult};
pub use bcd::{bcd_solve, evaluate, BeamformingState, LinkParams, SolverConfig, TraceRow};
pub use blocks::{update_omega, update_w, update_z, EtaSearch, PrecoderInputs, PrecoderUpdate};
pub use objective::{achievable_se, mse_matrix, wmmse_objective};
pub use qp::{build_qp, qp_objective, PhaseQp};
