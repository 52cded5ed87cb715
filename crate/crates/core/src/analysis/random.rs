use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, Grid};

/// Independent, reproducible stream for trial `trial` of a seeded audit.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// A random signed test field: mostly smooth band-limited wave packets,
/// sometimes cell-level noise or isolated spikes.
pub fn random_field<R: Rng>(rng: &mut R, grid: &Grid) -> Field {
    let hw = grid.half_width();
    let x0 = grid.x_min();
    let len = grid.x_max() - x0;
    let kind = rng.random_range(0..10u32);
    let values: Vec<f64> = match kind {
        0..=5 => {
            let modes = rng.random_range(1..6usize);
            let center = x0 + len * rng.random_range(0.3..0.7);
            let width = hw * rng.random_range(0.05..0.4);
            let comps: Vec<(f64, f64, f64)> = (0..modes)
                .map(|_| {
                    let k = rng.random_range(0.0..4.0) / width.max(1e-3) * PI;
                    (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI))
                })
                .collect();
            let offset = rng.random_range(-0.5..0.5);
            grid.centers()
                .map(|x| {
                    let s = (x - center) / width;
                    let env = libm::exp(-0.5 * s * s);
                    let wave: f64 = comps.iter().map(|(k, a, ph)| a * libm::cos(k * x + ph)).sum();
                    env * (wave + offset)
                })
                .collect()
        }
        6..=7 => {
            let n = grid.len();
            let a = rng.random_range(0..n / 2);
            let b = a + rng.random_range(1..n / 2);
            (0..n).map(|i| if i >= a && i < b { rng.random_range(-1.0..1.0) } else { 0.0 }).collect()
        }
        _ => {
            let n = grid.len();
            let mut v = alloc::vec![0.0; n];
            for _ in 0..rng.random_range(1..4usize) {
                let i = rng.random_range(0..n);
                v[i] = rng.random_range(-3.0..3.0);
            }
            v
        }
    };
    let scale = libm::pow(10.0, rng.random_range(-3.0..3.0));
    let values = values.into_iter().map(|v| v * scale).collect();
    Field::new(*grid, values).expect("finite random field")
}

/// A smooth compactly supported cutoff `amp exp(-1/(1 - s^2))`,
/// `s = (x - c)/w`, with random center, width and amplitude.
pub fn random_bump<R: Rng>(rng: &mut R, grid: &Grid) -> Field {
    let hw = grid.half_width();
    let mid = 0.5 * (grid.x_min() + grid.x_max());
    let center = mid + hw * rng.random_range(-0.4..0.4);
    let width = hw * rng.random_range(0.1..0.5);
    let amp = rng.random_range(0.2..2.0) * libm::exp(1.0);
    Field::from_fn(*grid, |x| {
        let s = (x - center) / width;
        if s.abs() < 1.0 {
            amp * libm::exp(-1.0 / (1.0 - s * s))
        } else {
            0.0
        }
    })
    .expect("finite cutoff")
}
