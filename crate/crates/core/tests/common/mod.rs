//! Test-only oracles, written independently of the library's code paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use poisson_blp::image::{Image, Origin};
use poisson_blp::poisson::sample_image;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(FIXTURES).join(name)
}

/// SplitMix64, so oracles do not share the library's generator.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn image(&mut self, w: usize, h: usize, max: f64) -> Image {
        let data = (0..w * h).map(|_| self.range(0.0, max)).collect();
        Image::new(w, h, data).unwrap()
    }
}

/// Mean vector and (k − 1) covariance by explicit double loops.
pub fn brute_stats(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = samples.len();
    let n = samples[0].len();
    let mut mean = vec![0.0; n];
    for i in 0..n {
        for s in samples {
            mean[i] += s[i];
        }
        mean[i] /= k as f64;
    }
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for s in samples {
                acc += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
            cov[i][j] = acc / (k - 1) as f64;
        }
    }
    (mean, cov)
}

/// `max(μ + Σ z, 0)` with `(diag(μ) + Σ + εI) z = y − μ` solved by dense LU.
pub fn blp_oracle(mean: &[f64], cov: &[Vec<f64>], jitter: f64, y: &[f64]) -> Vec<f64> {
    let n = mean.len();
    let sigma = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
    let mut a = sigma.clone();
    for i in 0..n {
        a[(i, i)] += mean[i].max(0.0) + jitter;
    }
    let rhs = DVector::from_fn(n, |i, _| y[i] - mean[i].max(0.0));
    let z = a.lu().solve(&rhs).expect("oracle system singular");
    let est = sigma * z;
    (0..n).map(|i| (mean[i].max(0.0) + est[i]).max(0.0)).collect()
}

/// 0, step, 2·step, … ≤ last, plus last.
fn positions(last: usize, step: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut p = 0;
    while p <= last {
        v.push(p);
        p += step;
    }
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

pub fn brute_grid(w: usize, h: usize, side: usize, stride: usize) -> Vec<Origin> {
    let mut out = Vec::new();
    for r in positions(h - side, stride) {
        for c in positions(w - side, stride) {
            out.push(Origin::new(r, c));
        }
    }
    out
}

pub fn brute_patch(img: &Image, o: Origin, side: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            v.push(img.get(o.row + r, o.col + c));
        }
    }
    v
}

/// Exhaustive window search: every origin whose patch lies inside the image
/// and inside the window `[ref + side/2 − window/2, … + window)` on both axes.
/// Ties: reference first, then row-major.
pub fn brute_group(img: &Image, reference: Origin, side: usize, window: usize, k: usize) -> Vec<(Origin, f64)> {
    let top = (reference.row + side / 2) as i64 - (window / 2) as i64;
    let left = (reference.col + side / 2) as i64 - (window / 2) as i64;
    let rp = brute_patch(img, reference, side);
    let mut cands = Vec::new();
    for r in 0..=img.height() - side {
        for c in 0..=img.width() - side {
            let inside = r as i64 >= top
                && (r + side) as i64 <= top + window as i64
                && c as i64 >= left
                && (c + side) as i64 <= left + window as i64;
            if !inside {
                continue;
            }
            let o = Origin::new(r, c);
            let p = brute_patch(img, o, side);
            let d: f64 = p.iter().zip(&rp).map(|(a, b)| (a - b).powi(2)).sum();
            cands.push((o, d));
        }
    }
    cands.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap()
            .then((a.0 != reference).cmp(&(b.0 != reference)))
            .then(a.0.cmp(&b.0))
    });
    cands.truncate(k);
    cands
}

/// One BLP pass composed from the oracles above, with per-pixel lists of
/// contributions averaged at the end.
pub fn reference_pass(
    noisy: &Image,
    pilot: &Image,
    side: usize,
    stride: usize,
    window: usize,
    k: usize,
    rel_jitter: f64,
) -> Vec<f64> {
    let (w, h) = noisy.dims();
    let n = side * side;
    let mut contributions: Vec<Vec<f64>> = vec![Vec::new(); w * h];
    for reference in brute_grid(w, h, side, stride) {
        let group = brute_group(pilot, reference, side, window, k);
        let pilot_patches: Vec<Vec<f64>> = group.iter().map(|(o, _)| brute_patch(pilot, *o, side)).collect();
        let (mean, cov) = brute_stats(&pilot_patches);
        let flat = cov.iter().all(|row| row.iter().all(|&v| v == 0.0));
        let trace: f64 = (0..n).map(|i| cov[i][i] + mean[i].max(0.0)).sum();
        let jitter = rel_jitter * trace / n as f64;
        for (o, _) in &group {
            let y = brute_patch(noisy, *o, side);
            let est = if flat {
                mean.iter().map(|m| m.max(0.0)).collect()
            } else {
                blp_oracle(&mean, &cov, jitter, &y)
            };
            for r in 0..side {
                for c in 0..side {
                    contributions[(o.row + r) * w + o.col + c].push(est[r * side + c]);
                }
            }
        }
    }
    contributions
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.is_empty() {
                pilot.data()[i]
            } else {
                c.iter().sum::<f64>() / c.len() as f64
            }
        })
        .collect()
}

/// 16×16 test scene: a bright disc on a ramp, intensities below `peak`.
pub fn scene16(peak: f64) -> Image {
    Image::from_fn(16, 16, |r, c| {
        let ramp = 0.2 + 0.5 * c as f64 / 15.0;
        let d2 = (r as f64 - 7.5).powi(2) + (c as f64 - 9.0).powi(2);
        let disc = if d2 < 20.0 { 0.3 } else { 0.0 };
        peak * (ramp + disc)
    })
    .unwrap()
}

pub fn noisy16(peak: f64, seed: u64) -> (Image, Image) {
    let clean = scene16(peak);
    let noisy = sample_image(&clean, seed).unwrap();
    (clean, noisy)
}
