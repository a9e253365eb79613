//! Scene geometry: element coordinates, pairwise distances, angles and the
//! RIS subsurface partition.
//!
//! Angles follow the direction-cosine convention used by the steering
//! vectors. For a linear array with axis `a`, the angle `θ` satisfies
//! `sin θ = u·a`, where `u` is the unit propagation direction. For the planar
//! RIS with in-plane axes `(a_y, a_z)`, the pair `(az, el)` satisfies
//! `sin(az)·cos(el) = u·a_y` and `sin(az)·sin(el) = u·a_z`, so `az` is the
//! angle off the surface normal and `el` the rotation within the surface plane.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const COINCIDENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn unit(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Position3D {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl Add for Position3D {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position3D {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position3D {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Ula,
    Upa,
}

/// A uniform linear or planar array.
///
/// Element `n = iy·n_z + iz` sits at
/// `center + axis_y·(iy − (n_y−1)/2)·d + axis_z·(iz − (n_z−1)/2)·d`,
/// matching the Kronecker ordering `a_y ⊗ a_z` of the steering vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySpec {
    pub kind: ArrayKind,
    pub n_y: usize,
    pub n_z: usize,
    pub spacing: f64,
    pub center: Position3D,
    pub axis_y: Position3D,
    pub axis_z: Position3D,
}

impl ArraySpec {
    /// Linear array along the global y-axis.
    pub fn ula(n: usize, spacing: f64, center: Position3D) -> Self {
        Self {
            kind: ArrayKind::Ula,
            n_y: n,
            n_z: 1,
            spacing,
            center,
            axis_y: Position3D::new(0.0, 1.0, 0.0),
            axis_z: Position3D::new(0.0, 0.0, 1.0),
        }
    }

    /// Planar array in the global y–z plane.
    pub fn upa(n_y: usize, n_z: usize, spacing: f64, center: Position3D) -> Self {
        Self {
            kind: ArrayKind::Upa,
            n_y,
            n_z,
            spacing,
            center,
            axis_y: Position3D::new(0.0, 1.0, 0.0),
            axis_z: Position3D::new(0.0, 0.0, 1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.n_y == 0 || self.n_z == 0 {
            return Err(Error::Geometry(format!("{name}: element counts must be positive")));
        }
        if self.kind == ArrayKind::Ula && self.n_z != 1 {
            return Err(Error::Geometry(format!("{name}: a ULA has a single row")));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Geometry(format!("{name}: spacing must be positive")));
        }
        if !self.center.is_finite() {
            return Err(Error::Geometry(format!("{name}: center must be finite")));
        }
        let (a, b) = (self.axis_y, self.axis_z);
        let ortho = (a.norm() - 1.0).abs() < 1e-9 && (b.norm() - 1.0).abs() < 1e-9 && a.dot(b).abs() < 1e-9;
        if !ortho {
            return Err(Error::Geometry(format!("{name}: orientation axes must be orthonormal")));
        }
        Ok(())
    }

    fn offset(&self, iy: usize, iz: usize) -> Position3D {
        let oy = (iy as f64 - (self.n_y as f64 - 1.0) / 2.0) * self.spacing;
        let oz = (iz as f64 - (self.n_z as f64 - 1.0) / 2.0) * self.spacing;
        self.axis_y * oy + self.axis_z * oz
    }

    /// Centroid of the element block `ys × zs`, from the mean index along each
    /// axis. The full array maps to `center` exactly.
    pub fn block_center(&self, ys: std::ops::Range<usize>, zs: std::ops::Range<usize>) -> Position3D {
        let mid = |r: &std::ops::Range<usize>, n: usize| ((r.start + r.end) as f64 - 1.0 - (n as f64 - 1.0)) / 2.0 * self.spacing;
        self.center + (self.axis_y * mid(&ys, self.n_y) + self.axis_z * mid(&zs, self.n_z))
    }

    pub fn element(&self, iy: usize, iz: usize) -> Position3D {
        self.center + self.offset(iy, iz)
    }

    pub fn elements(&self) -> Vec<Position3D> {
        (0..self.n_y)
            .flat_map(|iy| (0..self.n_z).map(move |iz| (iy, iz)))
            .map(|(iy, iz)| self.element(iy, iz))
            .collect()
    }

    /// Diagonal extent of the element grid, `d·√((n_y−1)² + (n_z−1)²)`.
    pub fn aperture(&self) -> f64 {
        let ly = (self.n_y as f64 - 1.0) * self.spacing;
        let lz = (self.n_z as f64 - 1.0) * self.spacing;
        ly.hypot(lz)
    }

    /// Direction cosines of `u` along the array axes.
    pub fn direction_cosines(&self, u: Position3D) -> (f64, f64) {
        (u.dot(self.axis_y), u.dot(self.axis_z))
    }
}

/// `2D²/λ`.
pub fn rayleigh_distance(aperture: f64, lambda: f64) -> f64 {
    2.0 * aperture * aperture / lambda
}

/// Azimuth/elevation pair for a planar array.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarAngles {
    pub az: f64,
    pub el: f64,
}

impl PlanarAngles {
    /// Angles whose `sin(az)cos(el)`, `sin(az)sin(el)` reproduce the given cosines.
    pub fn from_cosines(cy: f64, cz: f64) -> Self {
        let s = cy.hypot(cz).min(1.0);
        let el = if s == 0.0 { 0.0 } else { cz.atan2(cy) };
        Self { az: s.asin(), el }
    }

    pub fn cosines(&self) -> (f64, f64) {
        let s = self.az.sin();
        (s * self.el.cos(), s * self.el.sin())
    }
}

/// Angle of a linear array whose sine is the given direction cosine.
pub fn linear_angle(cos_along_axis: f64) -> f64 {
    cos_along_axis.clamp(-1.0, 1.0).asin()
}

/// One block of the RIS partition along a single axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    /// Centroid of the block's elements.
    pub centroid: Position3D,
    /// Distance from the Tx center to the centroid.
    pub distance: f64,
    /// Arrival angles at the centroid.
    pub angles: PlanarAngles,
}

/// One of the `K²` RIS subsurfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsurface {
    pub block_y: usize,
    pub block_z: usize,
    pub centroid: Position3D,
    pub distance: f64,
    pub angles: PlanarAngles,
}

/// Everything needed to build the four channel matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub lambda: f64,
    pub tx: ArraySpec,
    pub ris: ArraySpec,
    pub rx: ArraySpec,
    /// Subsurface blocks per RIS axis.
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct SceneGeometry {
    pub lambda: f64,
    pub tx: ArraySpec,
    pub ris: ArraySpec,
    pub rx: ArraySpec,
    pub k: usize,
    pub tx_elements: Vec<Position3D>,
    pub ris_elements: Vec<Position3D>,
    pub rx_elements: Vec<Position3D>,
    /// `N_R × N_Tx` matrix of element-to-element distances.
    pub tx_ris_distances: DMatrix<f64>,
    pub d_tr: f64,
    pub d_rr: f64,
    /// Departure angle at the Tx towards the RIS center.
    pub tx_aod: f64,
    /// Arrival angles at the RIS center from the Tx center.
    pub ris_aoa: PlanarAngles,
    /// LoS arrival angle at the Rx from the RIS center.
    pub rx_aoa: f64,
    /// LoS departure angles at the RIS center towards the Rx center.
    pub ris_aod: PlanarAngles,
    /// `K` blocks along the RIS y-axis (each spans the full z extent).
    pub y_blocks: Vec<Strip>,
    /// `K` blocks along the RIS z-axis (each spans the full y extent).
    pub z_blocks: Vec<Strip>,
    /// `K²` subsurfaces, row-major in `(block_y, block_z)`.
    pub subsurfaces: Vec<Subsurface>,
}

pub fn build_scene(spec: &SceneSpec) -> Result<SceneGeometry> {
    SceneGeometry::build(spec)
}

impl SceneGeometry {
    pub fn build(spec: &SceneSpec) -> Result<Self> {
        if !(spec.lambda > 0.0 && spec.lambda.is_finite()) {
            return Err(Error::Geometry("wavelength must be positive".into()));
        }
        spec.tx.validate("tx")?;
        spec.ris.validate("ris")?;
        spec.rx.validate("rx")?;
        if spec.tx.kind != ArrayKind::Ula || spec.rx.kind != ArrayKind::Ula {
            return Err(Error::Geometry("Tx and Rx must be linear arrays".into()));
        }
        let k = spec.k;
        if k == 0 {
            return Err(Error::Geometry("K must be positive".into()));
        }
        if spec.ris.n_y % k != 0 {
            return Err(Error::Geometry(format!("N_Ry = {} not divisible by K = {k}", spec.ris.n_y)));
        }
        if spec.ris.n_z % k != 0 {
            return Err(Error::Geometry(format!("N_Rz = {} not divisible by K = {k}", spec.ris.n_z)));
        }

        let tx_elements = spec.tx.elements();
        let ris_elements = spec.ris.elements();
        let rx_elements = spec.rx.elements();

        let tx_ris_distances =
            DMatrix::from_fn(ris_elements.len(), tx_elements.len(), |r, t| ris_elements[r].distance(tx_elements[t]));
        if tx_ris_distances.iter().any(|&d| d < COINCIDENT_TOL) {
            return Err(Error::Geometry("coincident elements between Tx and RIS".into()));
        }
        let min_rr = ris_elements
            .iter()
            .flat_map(|p| rx_elements.iter().map(move |q| p.distance(*q)))
            .fold(f64::INFINITY, f64::min);
        if min_rr < COINCIDENT_TOL {
            return Err(Error::Geometry("coincident elements between RIS and Rx".into()));
        }

        let tx_c = spec.tx.center;
        let ris_c = spec.ris.center;
        let rx_c = spec.rx.center;
        let d_tr = ris_c.distance(tx_c);
        let d_rr = rx_c.distance(ris_c);
        if d_tr < COINCIDENT_TOL || d_rr < COINCIDENT_TOL {
            return Err(Error::Geometry("coincident array centers".into()));
        }

        // Propagation directions: Tx → RIS and RIS → Rx.
        let k_tr = (ris_c - tx_c).unit();
        let u_rr = (rx_c - ris_c).unit();
        let tx_aod = linear_angle(spec.tx.direction_cosines(k_tr).0);
        let (cy, cz) = spec.ris.direction_cosines(k_tr);
        let ris_aoa = PlanarAngles::from_cosines(cy, cz);
        let rx_aoa = linear_angle(spec.rx.direction_cosines(u_rr).0);
        let (cy, cz) = spec.ris.direction_cosines(u_rr);
        let ris_aod = PlanarAngles::from_cosines(cy, cz);

        let arrival = |p: Position3D| {
            let dir = (p - tx_c).unit();
            let (cy, cz) = spec.ris.direction_cosines(dir);
            (p.distance(tx_c), PlanarAngles::from_cosines(cy, cz))
        };

        let by = spec.ris.n_y / k;
        let bz = spec.ris.n_z / k;
        let ris = &spec.ris;
        let y_blocks = (0..k)
            .map(|i| {
                let c = ris.block_center(i * by..(i + 1) * by, 0..ris.n_z);
                let (distance, angles) = arrival(c);
                Strip { centroid: c, distance, angles }
            })
            .collect();
        let z_blocks = (0..k)
            .map(|j| {
                let c = ris.block_center(0..ris.n_y, j * bz..(j + 1) * bz);
                let (distance, angles) = arrival(c);
                Strip { centroid: c, distance, angles }
            })
            .collect();
        let subsurfaces = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| {
                let c = ris.block_center(i * by..(i + 1) * by, j * bz..(j + 1) * bz);
                let (distance, angles) = arrival(c);
                Subsurface { block_y: i, block_z: j, centroid: c, distance, angles }
            })
            .collect();

        Ok(Self {
            lambda: spec.lambda,
            tx: spec.tx.clone(),
            ris: spec.ris.clone(),
            rx: spec.rx.clone(),
            k,
            tx_elements,
            ris_elements,
            rx_elements,
            tx_ris_distances,
            d_tr,
            d_rr,
            tx_aod,
            ris_aoa,
            rx_aoa,
            ris_aod,
            y_blocks,
            z_blocks,
            subsurfaces,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_ris(&self) -> usize {
        self.ris.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn rayleigh_distance(&self) -> f64 {
        rayleigh_distance(self.ris.aperture(), self.lambda)
    }
}
