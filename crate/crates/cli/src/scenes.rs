//! Procedural test scenes, quantized to 8 bits so PGM round trips are exact.
//!
//! Both generators draw their free parameters from `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)`, in the order listed on each function.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// A 3x3 patchwork square that rotates a quarter turn over the `k` frames
/// while drifting right. Draws: nine patch levels in `[0.3, 1)`, then the
/// starting angle in `[0, pi/2)`.
pub fn moving_square(n: usize, k: usize, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patches: Vec<f64> = (0..9).map(|_| rng.gen_range(0.3..1.0)).collect();
    let theta0: f64 = rng.gen_range(0.0..std::f64::consts::FRAC_PI_2);
    let nf = n as f64;
    let half = 0.28 * nf;
    let background = quantize(0.08);
    let mut out = Array3::from_elem((k, n, n), background);
    for t in 0..k {
        let frac = t as f64 / k.max(1) as f64;
        let theta = theta0 + frac * std::f64::consts::FRAC_PI_2;
        let (s, c) = theta.sin_cos();
        let cx = nf * (0.42 + 0.16 * frac);
        let cy = nf * 0.5;
        for i in 0..n {
            for j in 0..n {
                let (dx, dy) = (j as f64 + 0.5 - cx, i as f64 + 0.5 - cy);
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                if u.abs() < half && v.abs() < half {
                    let pu = (((u + half) / (2.0 * half)) * 3.0).min(2.0) as usize;
                    let pv = (((v + half) / (2.0 * half)) * 3.0).min(2.0) as usize;
                    out[[t, i, j]] = quantize(patches[pv * 3 + pu]);
                }
            }
        }
    }
    out
}

const GLYPH: [&str; 7] = [
    "#####", "#....", "#....", "####.", "#....", "#....", "#####",
];

/// A triangle, a block-letter glyph and a shaded disk falling from rest
/// under constant acceleration. Draws: three horizontal start offsets in
/// `[-0.05, 0.05)` of the width, then three start heights in `[0, 0.15)`.
pub fn falling_objects(n: usize, k: usize, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let dx: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.05..0.05) * nf).collect();
    let y0: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..0.15) * nf).collect();
    let size = 0.18 * nf;
    let mut out = Array3::zeros((k, n, n));
    for t in 0..k {
        let frac = t as f64 / k.max(1) as f64;
        let drop = 0.5 * frac * frac * nf;
        let tri = (0.2 * nf + dx[0], y0[0] + drop);
        let gly = (0.5 * nf + dx[1], y0[1] + 0.6 * drop);
        let disk = (0.8 * nf + dx[2], y0[2] + 0.8 * drop + 0.5 * size);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (j as f64 + 0.5, i as f64 + 0.5);
                let mut v = 0.0;
                // Apex-up triangle with its apex at `tri`.
                let ty = y - tri.1;
                if ty >= 0.0 && ty < size && (x - tri.0).abs() <= 0.5 * ty {
                    v = 0.95;
                }
                let (gx, gy) = (x - (gly.0 - 0.5 * size), y - gly.1);
                if gx >= 0.0 && gy >= 0.0 && gx < size && gy < size * 1.4 {
                    let col = ((gx / size) * 5.0) as usize;
                    let row = ((gy / (size * 1.4)) * 7.0) as usize;
                    if GLYPH[row.min(6)].as_bytes()[col.min(4)] == b'#' {
                        v = 0.7;
                    }
                }
                let r = ((x - disk.0).powi(2) + (y - disk.1).powi(2)).sqrt() / (0.5 * size);
                if r < 1.0 {
                    v = 0.4 + 0.5 * (1.0 - r);
                }
                out[[t, i, j]] = quantize(v);
            }
        }
    }
    out
}
