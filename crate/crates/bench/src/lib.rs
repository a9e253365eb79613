//! Fixtures shared by the benchmarks in `benches/`.

use risbeam::config::{Family, SystemConfig};
use risbeam::error_model::{ChannelModel, ChannelSet};
use risbeam::experiments::{build_channel_set, TrialSeeds};
use risbeam::linalg::CMat;
use risbeam::optimizer::{build_qp, PhaseQp};
use risbeam::rng::{complex_normal_matrix, rng_from_seed};

/// Channels of one desk-scale trial.
pub fn desk_set(model: ChannelModel, tau: f64) -> (SystemConfig, ChannelSet) {
    let mut cfg = SystemConfig::default();
    cfg.errors.tau_g = tau;
    cfg.errors.tau_r = tau;
    let seeds = TrialSeeds::derive(0, Family::SeVsTau, tau, 0);
    let set = build_channel_set(&cfg, model, &seeds).expect("default config builds");
    (cfg, set)
}

/// A phase subproblem of the given RIS size with random precoder and receiver.
pub fn random_qp(n_ris: usize, seed: u64) -> PhaseQp {
    let mut rng = rng_from_seed(seed);
    let g = complex_normal_matrix(&mut rng, n_ris, 16, 1.0);
    let r = complex_normal_matrix(&mut rng, 4, n_ris, 1.0);
    let w = complex_normal_matrix(&mut rng, 16, 4, 1.0);
    let z = complex_normal_matrix(&mut rng, 4, 4, 1.0);
    build_qp(&g, &r, &w, &z, &CMat::identity(4, 4))
}
