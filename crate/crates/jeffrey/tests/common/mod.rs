//! Seeded random instances for the integration suites.

#![allow(dead_code)]

use jeffrey::datagen::unit_double;
use jeffrey::{Channel, Dist};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand_core::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `[0, bound)`.
pub fn index_below(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    (unit_double(rng) * bound as f64) as usize % bound
}

/// A full-support distribution with raw weights in `[lo, 1)` before
/// normalization.
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize, lo: f64) -> Dist {
    let w: Vec<f64> = (0..n).map(|_| lo + (1.0 - lo) * unit_double(rng)).collect();
    Dist::normalized(w).unwrap()
}

/// A strictly positive channel with raw entries in `[lo, 1)` before row
/// normalization.
pub fn random_channel(rng: &mut ChaCha8Rng, n: usize, m: usize, lo: f64) -> Channel {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..m).map(|_| lo + (1.0 - lo) * unit_double(rng)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Channel::new(rows).unwrap()
}

/// A sparse channel (roughly half the entries exactly zero) where every row
/// and every column keeps at least one positive entry.
pub fn random_sparse_channel(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Channel {
    let mut raw: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if unit_double(rng) < 0.5 {
                        0.0
                    } else {
                        0.1 + 0.9 * unit_double(rng)
                    }
                })
                .collect()
        })
        .collect();
    for (x, row) in raw.iter_mut().enumerate() {
        if row.iter().all(|&v| v == 0.0) {
            row[x % m] = 0.5;
        }
    }
    for y in 0..m {
        if (0..n).all(|x| raw[x][y] == 0.0) {
            raw[y % n][y] = 0.5;
        }
    }
    let rows: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Channel::new(rows).unwrap()
}
