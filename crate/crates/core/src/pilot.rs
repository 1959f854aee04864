//! Pilot estimates: an externally denoised image, or the built-in
//! Anscombe → patch-DCT hard thresholding → inverse Anscombe denoiser.

use std::path::PathBuf;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Accumulator, Image, Origin};
use crate::matching::axis_positions;
use crate::pgm;
use crate::poisson::{anscombe, anscombe_inverse, InverseKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Each patch weighted by `1 / (1 + retained AC coefficients)`.
    #[default]
    Sparsity,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinPilot {
    /// Hard threshold in units of the (unit) stabilized noise deviation.
    pub threshold: f64,
    pub patch_side: usize,
    pub stride: usize,
    pub weighting: Weighting,
    pub inverse: InverseKind,
}

impl Default for BuiltinPilot {
    fn default() -> Self {
        Self {
            threshold: 2.7,
            patch_side: 8,
            stride: 4,
            weighting: Weighting::Sparsity,
            inverse: InverseKind::Asymptotic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PilotSpec {
    Builtin(BuiltinPilot),
    /// PGM file; `scale` maps stored values to working units (see
    /// [`pgm::PgmFile::working_image`]).
    External { path: PathBuf, scale: Option<f64> },
    /// An already computed pilot image.
    Provided(Image),
}

impl Default for PilotSpec {
    fn default() -> Self {
        PilotSpec::Builtin(BuiltinPilot::default())
    }
}

impl PilotSpec {
    pub fn validate(&self) -> Result<()> {
        if let PilotSpec::Builtin(b) = self {
            if b.threshold.is_nan() || b.threshold < 0.0 {
                return Err(Error::Config(format!("threshold must be >= 0, got {}", b.threshold)));
            }
            if b.patch_side == 0 || b.stride == 0 {
                return Err(Error::Config("pilot patch side and stride must be >= 1".into()));
            }
        }
        Ok(())
    }
}

pub fn make_pilot(noisy: &Image, spec: &PilotSpec) -> Result<Image> {
    spec.validate()?;
    let pilot = match spec {
        PilotSpec::Builtin(b) => {
            let stabilized = anscombe(noisy)?;
            let denoised = builtin_vst_denoise(&stabilized, b)?;
            anscombe_inverse(&denoised, b.inverse)?
        }
        PilotSpec::External { path, scale } => {
            pgm::read_pgm_file(path)?.working_image(*scale)?
        }
        PilotSpec::Provided(img) => img.clone(),
    };
    pilot.same_dims(noisy)?;
    if pilot == *noisy {
        warn!("pilot is identical to the noisy image");
    }
    Ok(pilot)
}

/// Orthonormal DCT-II basis: `basis[u * n + x]`.
pub fn dct_basis(n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    for u in 0..n {
        let a = if u == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for x in 0..n {
            b[u * n + x] =
                a * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2 * n) as f64).cos();
        }
    }
    b
}

/// `out = C · block · Cᵀ` (forward) or `Cᵀ · block · C` (inverse).
fn dct2(basis: &[f64], n: usize, block: &[f64], out: &mut [f64], tmp: &mut [f64], inverse: bool) {
    let c = |i: usize, j: usize| if inverse { basis[j * n + i] } else { basis[i * n + j] };
    // rows: tmp = block · Cᵀ
    for r in 0..n {
        for u in 0..n {
            tmp[r * n + u] = (0..n).map(|x| block[r * n + x] * c(u, x)).sum();
        }
    }
    // columns: out = C · tmp
    for v in 0..n {
        for u in 0..n {
            out[v * n + u] = (0..n).map(|y| c(v, y) * tmp[y * n + u]).sum();
        }
    }
}

pub fn dct2_forward(basis: &[f64], n: usize, block: &[f64]) -> Vec<f64> {
    let (mut out, mut tmp) = (vec![0.0; n * n], vec![0.0; n * n]);
    dct2(basis, n, block, &mut out, &mut tmp, false);
    out
}

pub fn dct2_inverse(basis: &[f64], n: usize, coeffs: &[f64]) -> Vec<f64> {
    let (mut out, mut tmp) = (vec![0.0; n * n], vec![0.0; n * n]);
    dct2(basis, n, coeffs, &mut out, &mut tmp, true);
    out
}

/// Gaussian denoiser for unit-variance noise: per-patch DCT hard thresholding
/// with weighted overlap averaging. AC coefficients with `|c| < threshold` are
/// zeroed; the DC coefficient is always kept.
pub fn builtin_vst_denoise(stabilized: &Image, opts: &BuiltinPilot) -> Result<Image> {
    let n = opts.patch_side;
    if stabilized.width() < n || stabilized.height() < n {
        return Err(Error::Config(format!(
            "{}x{} image is smaller than one {n}x{n} pilot patch",
            stabilized.width(),
            stabilized.height()
        )));
    }
    let basis = dct_basis(n);
    let rows = axis_positions(stabilized.height() - n, opts.stride);
    let cols = axis_positions(stabilized.width() - n, opts.stride);
    let origins: Vec<Origin> = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| Origin::new(r, c)))
        .collect();

    let estimates: Vec<(Vec<f64>, f64)> = origins
        .par_iter()
        .map(|&o| {
            let mut block = vec![0.0; n * n];
            let mut coeffs = vec![0.0; n * n];
            let mut tmp = vec![0.0; n * n];
            stabilized.copy_block(o, n, &mut block);
            dct2(&basis, n, &block, &mut coeffs, &mut tmp, false);
            let mut kept = 0usize;
            for c in coeffs.iter_mut().skip(1) {
                if c.abs() < opts.threshold {
                    *c = 0.0;
                } else {
                    kept += 1;
                }
            }
            dct2(&basis, n, &coeffs, &mut block, &mut tmp, true);
            let w = match opts.weighting {
                Weighting::Sparsity => 1.0 / (1.0 + kept as f64),
                Weighting::Uniform => 1.0,
            };
            (block, w)
        })
        .collect();

    let mut acc = Accumulator::for_image(stabilized);
    for (o, (block, w)) in origins.iter().zip(&estimates) {
        acc.add_block(*o, n, block, *w);
    }
    acc.finalize(stabilized)
}
