//! Model mismatch and synthetic channel-estimation errors.
//!
//! The ground-truth Tx–RIS channel is always the spherical-wave `G_N`. A
//! structured model `G_i` (near, piece-wise or far) leaves a deterministic
//! mismatch `ΔM = G_N − G_i`, and the estimate is `Ĝ = G_i − ΔG` with
//! `ΔG ~ CN(0, σ_G²·I ⊗ I)`. The RIS–Rx link has no structural mismatch:
//! `R̂ = R − ΔR`.

use std::fmt;

use crate::channel::{build_far_field, build_near_field, build_piecewise, path_coefficient, ChannelOptions};
use crate::error::{Error, Result};
use crate::geometry::SceneGeometry;
use crate::linalg::{fro_norm_sq, CMat};
use crate::rng::{complex_normal_matrix, derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelModel {
    Near,
    Piecewise(usize),
    Far,
}

impl ChannelModel {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelModel::Near => "near",
            ChannelModel::Piecewise(_) => "piecewise",
            ChannelModel::Far => "far",
        }
    }

    /// Partition size used in output tables: 0 for near, 1 for far, `K` for piece-wise.
    pub fn k_label(&self) -> usize {
        match self {
            ChannelModel::Near => 0,
            ChannelModel::Piecewise(k) => *k,
            ChannelModel::Far => 1,
        }
    }

    /// Partition the scene geometry must be built with.
    pub fn partition(&self) -> usize {
        match self {
            ChannelModel::Piecewise(k) => *k,
            _ => 1,
        }
    }

    pub fn parse(name: &str, k: usize) -> Result<Self> {
        match name {
            "near" => Ok(ChannelModel::Near),
            "far" => Ok(ChannelModel::Far),
            "piecewise" => Ok(ChannelModel::Piecewise(k)),
            other => Err(Error::Config(format!("unknown channel model `{other}` (near, piecewise, far)"))),
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelModel::Piecewise(k) => write!(f, "piecewise(K={k})"),
            m => f.write_str(m.name()),
        }
    }
}

/// What the normalized CEE `τ` is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeeNormalization {
    /// `τ = E‖ΔG‖² / ‖G_i‖²`, so `σ² = τ·‖G_i‖² / (rows·cols)`.
    ModelEnergy,
    /// `τ = E‖ΔG‖² / E‖G_i − ΔG‖²`, so `σ² = τ·‖G_i‖² / ((1−τ)·rows·cols)`.
    EstimateEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSpec {
    pub tau_g: f64,
    pub tau_r: f64,
    pub normalization: CeeNormalization,
    pub seed: u64,
}

impl ErrorSpec {
    pub fn perfect(seed: u64) -> Self {
        Self { tau_g: 0.0, tau_r: 0.0, normalization: CeeNormalization::ModelEnergy, seed }
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau_g)?;
        check_tau(self.tau_r)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::Config(format!("tau must be in [0,1), got {tau}")))
    }
}

/// Matrix with i.i.d. circularly-symmetric CN(0, variance) entries.
pub fn sample_matrix_gaussian(rows: usize, cols: usize, variance: f64, seed: u64) -> Result<CMat> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Config(format!("variance must be non-negative, got {variance}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok(complex_normal_matrix(&mut rng, rows, cols, variance))
}

/// Per-entry error variance that realizes the normalized CEE `tau`.
pub fn calibrate_variance(g_struct: &CMat, tau: f64, normalization: CeeNormalization) -> Result<f64> {
    check_tau(tau)?;
    let n = (g_struct.nrows() * g_struct.ncols()) as f64;
    if n == 0.0 {
        return Err(Error::Dimension("empty channel matrix".into()));
    }
    let energy = fro_norm_sq(g_struct);
    Ok(match normalization {
        CeeNormalization::ModelEnergy => tau * energy / n,
        CeeNormalization::EstimateEnergy => tau * energy / ((1.0 - tau) * n),
    })
}

/// Empirical normalized CEE of one draw, measured the same way as `normalization`.
pub fn normalized_cee(g_struct: &CMat, delta: &CMat, normalization: CeeNormalization) -> f64 {
    let err = fro_norm_sq(delta);
    match normalization {
        CeeNormalization::ModelEnergy => err / fro_norm_sq(g_struct),
        CeeNormalization::EstimateEnergy => err / fro_norm_sq(&(g_struct - delta)),
    }
}

/// Ground truth, structured model, mismatch and estimates for one trial.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub model: ChannelModel,
    /// Ground-truth spherical-wave Tx–RIS channel.
    pub g_true: CMat,
    /// Structured model channel `G_i`.
    pub g_model: CMat,
    /// `ΔM = G_N − G_i`.
    pub mismatch: CMat,
    pub g_hat: CMat,
    pub delta_g: CMat,
    pub r_true: CMat,
    pub r_hat: CMat,
    pub delta_r: CMat,
    pub var_g: f64,
    pub var_r: f64,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.g_true.ncols()
    }

    pub fn n_ris(&self) -> usize {
        self.g_true.nrows()
    }

    pub fn n_rx(&self) -> usize {
        self.r_true.nrows()
    }
}

/// Gains that bring the center-to-center path coefficients to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainScale {
    pub tx_ris: f64,
    pub ris_rx: f64,
}

impl GainScale {
    pub const UNIT: GainScale = GainScale { tx_ris: 1.0, ris_rx: 1.0 };

    pub fn reference(geom: &SceneGeometry) -> Self {
        Self {
            tx_ris: 1.0 / path_coefficient(geom.d_tr, geom.lambda),
            ris_rx: 1.0 / path_coefficient(geom.d_rr, geom.lambda),
        }
    }
}

/// Structured model channel `G_i` for the given model.
pub fn model_channel(geom: &SceneGeometry, model: ChannelModel, opts: &ChannelOptions) -> Result<CMat> {
    match model {
        ChannelModel::Near => build_near_field(geom),
        ChannelModel::Far => Ok(build_far_field(geom, opts)),
        ChannelModel::Piecewise(k) => {
            if k != geom.k {
                return Err(Error::Config(format!("model K = {k} but the scene is partitioned with K = {}", geom.k)));
            }
            build_piecewise(geom, opts)
        }
    }
}

/// Builds the full channel set for one trial.
///
/// `r_true` is the ground-truth RIS–Rx channel before gain scaling.
pub fn make_channel_set(
    geom: &SceneGeometry,
    r_true: &CMat,
    model: ChannelModel,
    opts: &ChannelOptions,
    scale: GainScale,
    spec: &ErrorSpec,
) -> Result<ChannelSet> {
    spec.validate()?;
    if r_true.ncols() != geom.n_ris() {
        return Err(Error::Dimension(format!("R has {} columns, RIS has {} elements", r_true.ncols(), geom.n_ris())));
    }
    let g_true = build_near_field(geom)?.scale(scale.tx_ris);
    let g_model = match model {
        ChannelModel::Near => g_true.clone(),
        _ => model_channel(geom, model, opts)?.scale(scale.tx_ris),
    };
    let mismatch = match model {
        ChannelModel::Near => CMat::zeros(g_true.nrows(), g_true.ncols()),
        _ => &g_true - &g_model,
    };
    let r_true = r_true.scale(scale.ris_rx);

    let var_g = calibrate_variance(&g_model, spec.tau_g, spec.normalization)?;
    let var_r = calibrate_variance(&r_true, spec.tau_r, spec.normalization)?;
    let delta_g = sample_matrix_gaussian(g_model.nrows(), g_model.ncols(), var_g, derive_seed(spec.seed, &[0]))?;
    let delta_r = sample_matrix_gaussian(r_true.nrows(), r_true.ncols(), var_r, derive_seed(spec.seed, &[1]))?;
    let g_hat = &g_model - &delta_g;
    let r_hat = &r_true - &delta_r;

    Ok(ChannelSet { model, g_true, g_model, mismatch, g_hat, delta_g, r_true, r_hat, delta_r, var_g, var_r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_ris_rx, PathParams};
    use crate::geometry::{build_scene, ArraySpec, Position3D, SceneSpec};
    use crate::linalg::{c, fro_norm};

    fn scene(k: usize) -> SceneGeometry {
        let lambda = 0.01;
        let d = lambda / 2.0;
        build_scene(&SceneSpec {
            lambda,
            tx: ArraySpec::ula(8, d, Position3D::new(10.0, -20.0, 5.0)),
            ris: ArraySpec::upa(8, 8, d, Position3D::new(0.0, 0.0, 10.0)),
            rx: ArraySpec::ula(4, d, Position3D::new(100.0, 50.0, 5.0)),
            k,
        })
        .unwrap()
    }

    fn set(model: ChannelModel, tau: f64, seed: u64) -> ChannelSet {
        let g = scene(model.partition());
        let r = build_ris_rx(&g, &PathParams { paths: vec![PathParams::los(&g)] }).unwrap();
        let spec = ErrorSpec { tau_g: tau, tau_r: tau, normalization: CeeNormalization::ModelEnergy, seed };
        make_channel_set(&g, &r, model, &ChannelOptions::default(), GainScale::reference(&g), &spec).unwrap()
    }

    #[test]
    fn zero_variance_sample_is_zero() {
        let m = sample_matrix_gaussian(3, 4, 0.0, 9).unwrap();
        assert!(m.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_matrix_gaussian(3, 3, 2.0, 11).unwrap(), sample_matrix_gaussian(3, 3, 2.0, 11).unwrap());
        assert_ne!(sample_matrix_gaussian(3, 3, 2.0, 11).unwrap(), sample_matrix_gaussian(3, 3, 2.0, 12).unwrap());
        assert!(sample_matrix_gaussian(1, 1, -1.0, 1).is_err());
    }

    #[test]
    fn unit_variance_second_moment() {
        let m = sample_matrix_gaussian(100_000, 1, 1.0, 5).unwrap();
        let mean_sq = fro_norm_sq(&m) / 1e5;
        assert!((mean_sq - 1.0).abs() < 0.02, "{mean_sq}");
        let re_var = m.iter().map(|z| z.re * z.re).sum::<f64>() / 1e5;
        assert!((re_var - 0.5).abs() < 0.01);
    }

    #[test]
    fn calibration_closed_forms() {
        let g = CMat::from_element(3, 5, c(0.6, 0.8));
        assert_eq!(calibrate_variance(&g, 0.0, CeeNormalization::ModelEnergy).unwrap(), 0.0);
        assert_eq!(calibrate_variance(&g, 0.0, CeeNormalization::EstimateEnergy).unwrap(), 0.0);
        assert!((calibrate_variance(&g, 0.5, CeeNormalization::EstimateEnergy).unwrap() - 1.0).abs() < 1e-12);
        assert!((calibrate_variance(&g, 0.5, CeeNormalization::ModelEnergy).unwrap() - 0.5).abs() < 1e-12);
        let err = calibrate_variance(&g, 1.0, CeeNormalization::ModelEnergy).unwrap_err();
        assert!(err.to_string().contains("tau must be in [0,1)"));
    }

    #[test]
    fn calibrated_tau_is_recovered_by_resampling() {
        let g = scene(1);
        let gn = build_near_field(&g).unwrap().scale(GainScale::reference(&g).tx_ris);
        for norm in [CeeNormalization::ModelEnergy, CeeNormalization::EstimateEnergy] {
            let tau = 0.3;
            let var = calibrate_variance(&gn, tau, norm).unwrap();
            let draws = 10_000;
            let mut rng = rng_from_seed(77);
            let (mut num, mut den) = (0.0, 0.0);
            for _ in 0..draws {
                let dg = complex_normal_matrix(&mut rng, gn.nrows(), gn.ncols(), var);
                num += fro_norm_sq(&dg);
                den += match norm {
                    CeeNormalization::ModelEnergy => fro_norm_sq(&gn),
                    CeeNormalization::EstimateEnergy => fro_norm_sq(&(&gn - &dg)),
                };
            }
            let empirical = num / den;
            assert!((empirical / tau - 1.0).abs() < 0.02, "{norm:?}: {empirical}");
        }
    }

    #[test]
    fn near_model_without_error_is_exact() {
        let s = set(ChannelModel::Near, 0.0, 1);
        assert_eq!(s.g_hat, s.g_true);
        assert!(s.mismatch.iter().all(|z| z.norm() == 0.0));
        assert_eq!(s.r_hat, s.r_true);
        assert_eq!(s.var_g, 0.0);
    }

    #[test]
    fn far_model_has_mismatch() {
        let s = set(ChannelModel::Far, 0.0, 1);
        assert!(fro_norm(&s.mismatch) > 0.0);
    }

    #[test]
    fn finest_partition_reduces_mismatch() {
        let coarse = set(ChannelModel::Piecewise(1), 0.0, 1);
        let fine = set(ChannelModel::Piecewise(8), 0.0, 1);
        assert!(fro_norm(&fine.mismatch) <= fro_norm(&coarse.mismatch));
    }

    #[test]
    fn mismatch_does_not_depend_on_seed() {
        let a = set(ChannelModel::Piecewise(2), 0.4, 1);
        let b = set(ChannelModel::Piecewise(2), 0.4, 2);
        assert_eq!(a.mismatch, b.mismatch);
        assert_ne!(a.delta_g, b.delta_g);
    }

    #[test]
    fn inconsistent_partition_rejected() {
        let g = scene(2);
        assert!(model_channel(&g, ChannelModel::Piecewise(4), &ChannelOptions::default()).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn reconstruction_identity(seed in 0u64..1_000_000, tau in 0.0f64..0.95, which in 0usize..3) {
            let model = [ChannelModel::Near, ChannelModel::Piecewise(4), ChannelModel::Far][which];
            let s = set(model, tau, seed);
            let back = &s.g_hat + &s.delta_g + &s.mismatch;
            proptest::prop_assert!(fro_norm(&(back - &s.g_true)) <= 1e-14 * fro_norm(&s.g_true));
            let back_r = &s.r_hat + &s.delta_r;
            proptest::prop_assert!(fro_norm(&(back_r - &s.r_true)) <= 1e-14 * fro_norm(&s.r_true));
        }
    }
}
