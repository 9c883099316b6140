//! Seeded randomness.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] keyed by a 64-bit seed.
//! Independent streams are derived from a parent seed and a path of tags with
//! [`derive_seed`], so results never depend on the order in which streams are
//! consumed or on how work is scheduled across threads.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Vector;

pub type Rng = ChaCha8Rng;

/// Stream tags used when deriving sub-seeds.
pub mod purpose {
    pub const INIT: u64 = 0x696e_6974;
    pub const SHUFFLE: u64 = 0x7368_7566;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const DATA: u64 = 0x6461_7461;
    pub const EIGEN: u64 = 0x6569_676e;
    pub const MEAN: u64 = 0x6d65_616e;
    pub const HISTOGRAM: u64 = 0x6869_7374;
    pub const TUNE: u64 = 0x7475_6e65;
    pub const TRIAL: u64 = 0x7472_6961;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a path of tags.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(parent: u64, path: &[u64]) -> Rng {
    rng_from_seed(derive_seed(parent, path))
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn standard_normal_vector(rng: &mut Rng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| standard_normal(rng))
}

/// Laplace(0, scale) by inverse CDF of a uniform on the open interval (-1/2, 1/2).
pub fn laplace(rng: &mut Rng, scale: f64) -> f64 {
    let u = loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            break v - 0.5;
        }
    };
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_path() {
        let a = derive_seed(7, &[1, 2]);
        let b = derive_seed(7, &[2, 1]);
        let c = derive_seed(8, &[1, 2]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[1, 2]));
    }

    #[test]
    fn laplace_moments() {
        let mut rng = rng_from_seed(11);
        let n = 200_000;
        let scale = 2.0;
        let draws: Vec<f64> = (0..n).map(|_| laplace(&mut rng, scale)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let mad = draws.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        // E|X| = scale for Laplace(0, scale).
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((mad - scale).abs() < 0.03, "mean abs {mad}");
    }
}
