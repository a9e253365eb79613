//! Seed streams and complex Gaussian sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, CMat};

pub type SimRng = ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an ordered key.
///
/// The mapping is a pure function of its inputs, so adding new keys never
/// shifts the seeds of existing ones.
pub fn derive_seed(parent: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix(parent.wrapping_add(GOLDEN)), |acc, &k| {
        mix(acc ^ mix(k.wrapping_add(GOLDEN)))
    })
}

/// Stable 64-bit tag for a label, used to key seed streams by name.
pub fn label_tag(label: &str) -> u64 {
    // FNV-1a
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// One draw from CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> num_complex::Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(s * re, s * im)
}

/// Matrix with i.i.d. CN(0, variance) entries, drawn in column-major order.
pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMat {
    if variance == 0.0 {
        return CMat::zeros(rows, cols);
    }
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng, variance))
}
