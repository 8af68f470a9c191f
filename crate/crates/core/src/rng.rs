//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, role, index)`: there is no
//! generator state to advance, so a matrix entry or a Monte Carlo replication
//! gets the same value regardless of which thread computes it or in which
//! order. The mixing function is the SplitMix64 finalizer applied to a keyed
//! counter; normals come from the Box-Muller transform.

use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const ROLE_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const INDEX_MUL: u64 = 0xAEF1_7502_108E_F2D9;

/// Roles keep independent streams apart when they share a seed.
pub mod role {
    pub const GOE: u64 = 1;
    pub const ANTISYMMETRIC: u64 = 2;
    pub const ELLIPTIC_SYMMETRIC: u64 = 3;
    pub const ELLIPTIC_ANTISYMMETRIC: u64 = 4;
    pub const LIMIT_GAUSSIAN: u64 = 5;
    pub const LIMIT_ATOM: u64 = 6;
    pub const REPLICATION: u64 = 7;
}

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed stream of random words indexed by a 64-bit counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64, role: u64) -> Self {
        let key = mix64(mix64(seed.wrapping_add(GOLDEN)) ^ role.wrapping_mul(ROLE_MUL));
        Self { key }
    }

    #[inline]
    pub fn word(&self, index: u64) -> u64 {
        mix64(self.key ^ mix64(index.wrapping_mul(INDEX_MUL).wrapping_add(GOLDEN)))
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        ((self.word(index) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Two independent standard normals attached to `index`.
    #[inline]
    pub fn normal_pair(&self, index: u64) -> (f64, f64) {
        let u1 = self.uniform(index.wrapping_mul(2));
        let u2 = self.uniform(index.wrapping_mul(2).wrapping_add(1));
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (radius * c, radius * s)
    }

    #[inline]
    pub fn normal(&self, index: u64) -> f64 {
        self.normal_pair(index).0
    }
}

/// Seed for replication `index` of an experiment keyed by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    Stream::new(master, role::REPLICATION).word(index)
}
