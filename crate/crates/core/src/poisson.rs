//! Poisson noise synthesis and the Anscombe variance-stabilizing transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::image::Image;

/// Means at or above this use transformed rejection instead of Knuth's method.
const PTRS_THRESHOLD: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Maximum intensity of the scaled clean image.
    pub peak: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(peak: f64, seed: u64) -> Result<Self> {
        let spec = Self { peak, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak > 0.0 && self.peak.is_finite()) {
            return Err(Error::Config(format!("peak must be > 0, got {}", self.peak)));
        }
        Ok(())
    }
}

/// Draws one Poisson variate with mean `lambda`.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        0
    } else if lambda < PTRS_THRESHOLD {
        knuth(rng, lambda)
    } else {
        ptrs(rng, lambda)
    }
}

fn knuth<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let limit = (-lambda).exp();
    let mut k = 0;
    let mut p = rng.random::<f64>();
    while p > limit {
        k += 1;
        p *= rng.random::<f64>();
    }
    k
}

// Hörmann's transformed rejection with squeeze.
fn ptrs<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v = rng.random::<f64>();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -lambda + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

/// Independent generator for pixel `index`: one ChaCha stream per pixel, so
/// draws do not depend on visiting order.
fn pixel_rng(base: &ChaCha8Rng, index: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(index as u64);
    rng.set_word_pos(0);
    rng
}

/// Poisson observation of `mean`, one independent draw per pixel.
pub fn sample_image(mean: &Image, seed: u64) -> Result<Image> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = mean
        .data()
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| sample_poisson(&mut pixel_rng(&base, i), lambda) as f64)
        .collect();
    Image::new(mean.width(), mean.height(), data)
}

/// Scales `clean` so its maximum equals the peak, then draws the noisy image.
/// Returns `(scaled_clean, noisy)`.
pub fn poissonize(clean: &Image, spec: &NoiseSpec) -> Result<(Image, Image)> {
    spec.validate()?;
    let max = clean.max();
    if max <= 0.0 {
        return Err(Error::Degenerate("clean image is all zero".into()));
    }
    let scaled = if max == spec.peak {
        clean.clone()
    } else {
        let gain = spec.peak / max;
        clean.map_clamped(|v| v * gain)?
    };
    let noisy = sample_image(&scaled, spec.seed)?;
    Ok((scaled, noisy))
}

/// `2·sqrt(y + 3/8)`.
pub fn anscombe_value(y: f64) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::Domain {
            what: "the Anscombe transform",
            value: y,
        });
    }
    Ok(2.0 * (y + 0.375).sqrt())
}

pub fn anscombe(img: &Image) -> Result<Image> {
    img.map_clamped(|y| 2.0 * (y + 0.375).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseKind {
    /// `(v/2)² − 1/8`: unbiased for the mean of stabilized Poisson data at
    /// moderate counts.
    #[default]
    Asymptotic,
    /// `(v/2)² − 3/8`: exact algebraic inverse.
    Algebraic,
}

pub fn anscombe_inverse_value(v: f64, kind: InverseKind) -> f64 {
    let offset = match kind {
        InverseKind::Asymptotic => 0.125,
        InverseKind::Algebraic => 0.375,
    };
    let h = 0.5 * v;
    (h * h - offset).max(0.0)
}

pub fn anscombe_inverse(img: &Image, kind: InverseKind) -> Result<Image> {
    img.map_clamped(|v| anscombe_inverse_value(v, kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(draws: &[f64]) -> (f64, f64) {
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn replicate(lambda: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| sample_poisson(&mut rng, lambda) as f64).collect()
    }

    #[test]
    fn zero_mean_is_degenerate() {
        let mean = Image::new(2, 1, vec![0.0, 3.0]).unwrap();
        for seed in 0..50 {
            assert_eq!(sample_image(&mean, seed).unwrap().get(0, 0), 0.0);
        }
    }

    #[test]
    fn knuth_branch_moments() {
        let (m, v) = moments(&replicate(5.0, 100_000, 11));
        assert!((m - 5.0).abs() <= 0.05, "mean {m}");
        assert!((v - 5.0).abs() <= 0.15, "variance {v}");
    }

    #[test]
    fn ptrs_branch_moments() {
        // standard errors at 1e5 draws: mean 0.025, variance ~0.33
        let (m, v) = moments(&replicate(64.0, 100_000, 12));
        assert!((m - 64.0).abs() <= 0.125, "mean {m}");
        assert!((v - 64.0).abs() <= 1.7, "variance {v}");
    }

    #[test]
    fn constant_peak_image_is_unscaled() {
        let clean = Image::filled(4, 4, 5.0).unwrap();
        let (scaled, noisy) = poissonize(&clean, &NoiseSpec::new(5.0, 1).unwrap()).unwrap();
        assert_eq!(scaled, clean);
        assert!(noisy.data().iter().all(|v| v.fract() == 0.0));
    }

    #[test]
    fn poissonize_errors() {
        let zero = Image::zeros(3, 3);
        assert!(matches!(
            poissonize(&zero, &NoiseSpec { peak: 2.0, seed: 0 }),
            Err(Error::Degenerate(_))
        ));
        assert!(NoiseSpec::new(0.0, 0).is_err());
        assert!(NoiseSpec::new(f64::NAN, 0).is_err());
    }

    #[test]
    fn anscombe_values() {
        assert!((anscombe_value(0.0).unwrap() - 1.224744871391589).abs() < 1e-12);
        assert_eq!(anscombe_value(0.625).unwrap(), 2.0);
        assert!(matches!(anscombe_value(-1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_values() {
        assert_eq!(anscombe_inverse_value(2.0, InverseKind::Asymptotic), 0.875);
        assert_eq!(anscombe_inverse_value(0.0, InverseKind::Asymptotic), 0.0);
        assert_eq!(anscombe_inverse_value(2.0, InverseKind::Algebraic), 0.625);
    }

    #[test]
    fn asymptotic_inverse_is_unbiased_on_stabilized_mean() {
        // the inverse maps E[f(Y)] back to λ; compare against the exact
        // expectation from the Poisson pmf
        for lambda in [10.0f64, 20.0, 50.0] {
            let mut p = (-lambda).exp();
            let mut ef = 0.0;
            for k in 0..2000 {
                ef += p * anscombe_value(k as f64).unwrap();
                p *= lambda / (k + 1) as f64;
            }
            let draws = replicate(lambda, 200_000, 7);
            let mc = draws.iter().map(|&y| anscombe_value(y).unwrap()).sum::<f64>()
                / draws.len() as f64;
            for stabilized_mean in [ef, mc] {
                let back = anscombe_inverse_value(stabilized_mean, InverseKind::Asymptotic);
                assert!((back - lambda).abs() <= 0.02 * lambda, "λ={lambda}: {back}");
            }
        }
    }
}
