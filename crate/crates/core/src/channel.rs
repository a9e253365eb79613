//! Steering vectors and the Tx–RIS / RIS–Rx channel matrices.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{PlanarAngles, SceneGeometry};
use crate::linalg::{c, cis, CMat, CVec};

/// Array response vector. Entries have unit modulus; with the literal
/// phase reference the first entry is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub CVec);

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vec(&self) -> &CVec {
        &self.0
    }

    pub fn into_vec(self) -> CVec {
        self.0
    }

    pub fn kron(&self, other: &SteeringVector) -> SteeringVector {
        SteeringVector(self.0.kronecker(&other.0))
    }
}

/// Linear phase progression `exp(−j·2π/λ·n·d·s)`, `n = 0..N`.
fn progression(n: usize, d: f64, lambda: f64, s: f64) -> CVec {
    let step = -2.0 * PI / lambda * d * s;
    DVector::from_iterator(n, (0..n).map(|i| cis(step * i as f64)))
}

/// Phase that moves the reference of a progression from its first entry to its midpoint.
fn centering(n: usize, d: f64, lambda: f64, s: f64) -> Complex64 {
    cis(PI / lambda * (n as f64 - 1.0) * d * s)
}

/// ULA response `[1, …, exp(−j·2π/λ·(N−1)·d·sin θ)]`.
pub fn steering_ula(theta: f64, n: usize, d: f64, lambda: f64) -> SteeringVector {
    SteeringVector(progression(n, d, lambda, theta.sin()))
}

/// UPA response: y-factor with step `sin(az)cos(el)` ⊗ z-factor with step `sin(az)sin(el)`.
pub fn steering_upa(az: f64, el: f64, n_y: usize, n_z: usize, d: f64, lambda: f64) -> SteeringVector {
    let y = progression(n_y, d, lambda, az.sin() * el.cos());
    let z = progression(n_z, d, lambda, az.sin() * el.sin());
    SteeringVector(y.kronecker(&z))
}

/// Where the plane-wave models anchor their carrier phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseReference {
    /// Steering vectors start at 1 on the first element, as written.
    FirstElement,
    /// Steering vectors are re-referenced to the array (or block) centroid,
    /// which is where `d_TR` and the block distances are measured.
    Centroid,
}

/// How the per-block distance of the piece-wise model is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockDistance {
    /// Distance from the Tx center to the block centroid.
    Centroid,
    /// `2·r_block − d_TR`: the separable product of a y-block and a z-block
    /// factor then reproduces the subsurface distance to first order.
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelOptions {
    pub phase_reference: PhaseReference,
    pub block_distance: BlockDistance,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self { phase_reference: PhaseReference::Centroid, block_distance: BlockDistance::Effective }
    }
}

impl ChannelOptions {
    /// Formulas taken exactly as written, with strip-centroid block distances.
    pub fn literal() -> Self {
        Self { phase_reference: PhaseReference::FirstElement, block_distance: BlockDistance::Centroid }
    }
}

/// Free-space coefficient `λ² / (4π d)²`.
pub fn path_coefficient(d: f64, lambda: f64) -> f64 {
    let x = lambda / (4.0 * PI * d);
    x * x
}

fn ula_response(theta: f64, n: usize, d: f64, lambda: f64, reference: PhaseReference) -> CVec {
    let v = steering_ula(theta, n, d, lambda).into_vec();
    match reference {
        PhaseReference::FirstElement => v,
        PhaseReference::Centroid => v * centering(n, d, lambda, theta.sin()),
    }
}

fn axis_response(s: f64, n: usize, d: f64, lambda: f64, reference: PhaseReference) -> CVec {
    let v = progression(n, d, lambda, s);
    match reference {
        PhaseReference::FirstElement => v,
        PhaseReference::Centroid => v * centering(n, d, lambda, s),
    }
}

fn upa_response(angles: PlanarAngles, n_y: usize, n_z: usize, d: f64, lambda: f64, reference: PhaseReference) -> CVec {
    let (sy, sz) = angles.cosines();
    axis_response(sy, n_y, d, lambda, reference).kronecker(&axis_response(sz, n_z, d, lambda, reference))
}

/// Exact spherical-wave Tx–RIS channel, `N_R × N_Tx`.
pub fn build_near_field(geom: &SceneGeometry) -> Result<CMat> {
    let lambda = geom.lambda;
    let dist = &geom.tx_ris_distances;
    if dist.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Geometry("zero Tx–RIS element distance".into()));
    }
    Ok(CMat::from_fn(dist.nrows(), dist.ncols(), |r, t| {
        let d = dist[(r, t)];
        cis(-2.0 * PI * d / lambda) * path_coefficient(d, lambda)
    }))
}

/// Rank-one plane-wave Tx–RIS channel `γ·a_R·a_Tx^H`.
pub fn build_far_field(geom: &SceneGeometry, opts: &ChannelOptions) -> CMat {
    let lambda = geom.lambda;
    let gamma = cis(-2.0 * PI * geom.d_tr / lambda) * path_coefficient(geom.d_tr, lambda);
    let a_r = upa_response(geom.ris_aoa, geom.ris.n_y, geom.ris.n_z, geom.ris.spacing, lambda, opts.phase_reference);
    let a_t = ula_response(geom.tx_aod, geom.n_tx(), geom.tx.spacing, lambda, opts.phase_reference);
    (a_r * a_t.adjoint()) * gamma
}

/// Piece-wise near-field channel: stacked per-block y- and z-factors,
/// Kronecker-combined, times the Tx response. Uses the partition `geom.k`.
pub fn build_piecewise(geom: &SceneGeometry, opts: &ChannelOptions) -> Result<CMat> {
    let k = geom.k;
    let ris = &geom.ris;
    if ris.n_y % k != 0 || ris.n_z % k != 0 {
        return Err(Error::Geometry(format!("RIS {}×{} not divisible by K = {k}", ris.n_y, ris.n_z)));
    }
    let lambda = geom.lambda;
    let d = ris.spacing;
    let by = ris.n_y / k;
    let bz = ris.n_z / k;
    let block_distance = |r: f64| match opts.block_distance {
        BlockDistance::Centroid => r,
        BlockDistance::Effective => 2.0 * r - geom.d_tr,
    };
    let factor = |r: f64| {
        let r = block_distance(r);
        if !(r > 0.0) {
            return Err(Error::Geometry("non-positive block distance".into()));
        }
        Ok(cis(-PI * r / lambda) * (lambda / (4.0 * PI * r)))
    };

    let mut h = CVec::zeros(ris.n_y);
    for (i, strip) in geom.y_blocks.iter().enumerate() {
        let (sy, _) = strip.angles.cosines();
        let g = axis_response(sy, by, d, lambda, opts.phase_reference) * factor(strip.distance)?;
        h.rows_mut(i * by, by).copy_from(&g);
    }
    let mut v = CVec::zeros(ris.n_z);
    for (j, strip) in geom.z_blocks.iter().enumerate() {
        let (_, sz) = strip.angles.cosines();
        let g = axis_response(sz, bz, d, lambda, opts.phase_reference) * factor(strip.distance)?;
        v.rows_mut(j * bz, bz).copy_from(&g);
    }
    let a_t = ula_response(geom.tx_aod, geom.n_tx(), geom.tx.spacing, lambda, opts.phase_reference);
    Ok(h.kronecker(&v) * a_t.adjoint())
}

/// One RIS → Rx propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub rx_aoa: f64,
    pub ris_aod: PlanarAngles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathParams {
    pub paths: Vec<Path>,
}

impl PathParams {
    /// LoS gain `λ²/(4π d_RR)²·exp(−j2π d_RR/λ)`.
    pub fn los_gain(geom: &SceneGeometry) -> Complex64 {
        cis(-2.0 * PI * geom.d_rr / geom.lambda) * path_coefficient(geom.d_rr, geom.lambda)
    }

    pub fn los(geom: &SceneGeometry) -> Path {
        Path { gain: Self::los_gain(geom), rx_aoa: geom.rx_aoa, ris_aod: geom.ris_aod }
    }

    /// The deterministic LoS path plus `n_paths − 1` scattered paths with
    /// uniform angles, uniform phase and power `nlos_gain_db` relative to LoS.
    pub fn generate<R: Rng + ?Sized>(geom: &SceneGeometry, n_paths: usize, nlos_gain_db: f64, rng: &mut R) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::Config("L_Rx must be at least 1".into()));
        }
        let los = Self::los(geom);
        let amp = los.gain.norm() * 10f64.powf(nlos_gain_db / 20.0);
        let mut paths = vec![los];
        for _ in 1..n_paths {
            let phase = rng.random_range(0.0..2.0 * PI);
            let rx_aoa = rng.random_range(-PI / 2.0..PI / 2.0);
            let az = rng.random_range(0.0..PI / 2.0);
            let el = rng.random_range(-PI..PI);
            paths.push(Path { gain: Complex64::from_polar(amp, phase), rx_aoa, ris_aod: PlanarAngles { az, el } });
        }
        Ok(Self { paths })
    }
}

/// `R = Σ_l β_l·a_Rx(φ_l)·b_R(az_l, el_l)^H`, `N_Rx × N_R`.
pub fn build_ris_rx(geom: &SceneGeometry, paths: &PathParams) -> Result<CMat> {
    if paths.paths.is_empty() {
        return Err(Error::Config("L_Rx must be at least 1".into()));
    }
    let lambda = geom.lambda;
    let mut r = CMat::zeros(geom.n_rx(), geom.n_ris());
    for p in &paths.paths {
        if !(p.rx_aoa.is_finite() && p.ris_aod.az.is_finite() && p.ris_aod.el.is_finite()) {
            return Err(Error::Config("path angles must be finite".into()));
        }
        let a = steering_ula(p.rx_aoa, geom.n_rx(), geom.rx.spacing, lambda).into_vec();
        let b = steering_upa(p.ris_aod.az, p.ris_aod.el, geom.ris.n_y, geom.ris.n_z, geom.ris.spacing, lambda).into_vec();
        r += (a * b.adjoint()) * p.gain;
    }
    Ok(r)
}

/// Writes a matrix as CSV rows `row,col,re,im` (zero-based indices).
pub fn write_matrix_csv<W: Write>(out: W, m: &CMat) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "re", "im"])?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            w.write_record([i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix_csv`].
pub fn read_matrix_csv<R: Read>(input: R) -> Result<CMat> {
    let mut rd = csv::Reader::from_reader(input);
    let mut entries = Vec::new();
    let (mut rows, mut cols) = (0usize, 0usize);
    for rec in rd.records() {
        let rec = rec?;
        let parse_err = |what: &str| Error::Numerical(format!("bad {what} field in matrix csv"));
        let i: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("row"))?;
        let j: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("col"))?;
        let re: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("re"))?;
        let im: f64 = rec.get(3).and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("im"))?;
        rows = rows.max(i + 1);
        cols = cols.max(j + 1);
        entries.push((i, j, c(re, im)));
    }
    let mut m = CMat::zeros(rows, cols);
    for (i, j, z) in entries {
        m[(i, j)] = z;
    }
    Ok(m)
}
