#![allow(dead_code)]

use cislunar_dmd::faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Well-separated angular frequencies (rad/sample) for M-tone test signals.
pub const TONES: [f64; 5] = [0.31, 0.83, 1.37, 1.92, 2.47];
pub const AMPLITUDES: [f64; 5] = [1.0, 0.7, 0.5, 0.4, 0.3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `mean + Σ a_m cos(ω_m k + φ_m)` for the first `m` tones, as a 1 × len matrix.
pub fn tones(m: usize, mean: f64, len: usize) -> Mat<f64> {
    Mat::from_fn(1, len, |_, k| {
        mean + (0..m)
            .map(|i| AMPLITUDES[i] * (TONES[i] * k as f64 + 0.4 * i as f64).cos())
            .sum::<f64>()
    })
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut r = rng(seed);
    Mat::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0))
}
