//! Best linear predictor of a clean patch from its Poisson observation.
//!
//! For Poisson data the cross-covariance between clean and noisy patches equals
//! the clean covariance Σ, and the noisy covariance is Σ + diag(μ). The affine
//! MMSE estimator therefore needs only the clean mean and covariance:
//!
//! ```text
//! x̂ = μ + Σ (diag(μ) + Σ)⁻¹ (y − μ)
//! ```

use crate::error::{Error, Result};
use crate::image::Patch;
use crate::linalg::{solve_spd, GroupStats, Matrix};

/// Diagonal regularization added to `diag(μ) + Σ` before factoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Jitter {
    Absolute(f64),
    /// Multiple of the mean diagonal of `diag(μ) + Σ`.
    Relative(f64),
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter::Relative(1e-6)
    }
}

impl Jitter {
    pub fn validate(&self) -> Result<()> {
        let (Jitter::Absolute(v) | Jitter::Relative(v)) = *self;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("jitter must be finite and >= 0, got {v}")));
        }
        Ok(())
    }
}

/// Resolved linear map `y ↦ μ + G (y − μ)` for one patch group.
#[derive(Debug, Clone)]
pub struct BlpFilter {
    pub mean: Vec<f64>,
    /// `G = Σ (diag(μ) + Σ + εI)⁻¹`, row-major `n × n`.
    pub gain: Matrix,
    pub jitter_used: f64,
}

pub fn build_filter(stats: &GroupStats, jitter: Jitter) -> Result<BlpFilter> {
    jitter.validate()?;
    let n = stats.mean.len();
    if stats.cov.dim() != n {
        return Err(Error::shape(format!("{n}x{n} covariance"), stats.cov.dim()));
    }
    let mean: Vec<f64> = stats.mean.iter().map(|&m| m.max(0.0)).collect();

    if stats.cov.is_zero() {
        return Ok(BlpFilter {
            mean,
            gain: Matrix::zeros(n, n),
            jitter_used: 0.0,
        });
    }

    let mut system = stats.cov.clone();
    system.add_diag(&mean);
    let eps = match jitter {
        Jitter::Absolute(e) => e,
        Jitter::Relative(r) => r * system.trace() / n as f64,
    };
    // Σ and the system matrix are symmetric, so G = Σ A⁻¹ = (A⁻¹ Σ)ᵀ.
    let sol = solve_spd(&system, &stats.cov.to_dense(), eps)?;
    Ok(BlpFilter {
        mean,
        gain: sol.x.transpose(),
        jitter_used: sol.jitter,
    })
}

impl BlpFilter {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Writes the clamped estimate for observation `y` into `out`.
    pub fn apply_into(&self, y: &[f64], out: &mut [f64], centered: &mut Vec<f64>) -> Result<()> {
        let n = self.dim();
        if y.len() != n || out.len() != n {
            return Err(Error::shape(n, if y.len() != n { y.len() } else { out.len() }));
        }
        centered.clear();
        centered.extend(y.iter().zip(&self.mean).map(|(a, m)| a - m));
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.gain.row(i);
            let dot: f64 = row.iter().zip(centered.iter()).map(|(g, c)| g * c).sum();
            *o = (self.mean[i] + dot).max(0.0);
        }
        Ok(())
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; y.len()];
        self.apply_into(y, &mut out, &mut Vec::with_capacity(y.len()))?;
        Ok(out)
    }
}

/// Denoises one noisy patch; the result keeps the input's origin.
pub fn apply_filter(filter: &BlpFilter, noisy: &Patch) -> Result<Patch> {
    let values = filter.apply(&noisy.values)?;
    Ok(Patch {
        origin: noisy.origin,
        side: noisy.side,
        values,
    })
}
