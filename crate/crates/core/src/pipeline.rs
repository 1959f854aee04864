//! Group → statistics → BLP → aggregate, iterated with the output as the
//! next pilot.

use std::time::{Duration, Instant};

use log::{debug, warn};
use rayon::prelude::*;

use crate::blp::{build_filter, Jitter};
use crate::error::{Error, Result};
use crate::image::{Accumulator, Image, Origin};
use crate::linalg::sample_stats;
use crate::matching::{find_group, reference_grid, SearchParams};
use crate::pilot::{make_pilot, PilotSpec};
use crate::poisson::NoiseSpec;

/// Reference patches handed to the thread pool per batch. Batches are
/// aggregated in grid order, which keeps the output schedule-independent.
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub search: SearchParams,
    pub iterations: usize,
    pub jitter: Jitter,
    pub pilot: PilotSpec,
    /// Noise model, only needed when simulating observations.
    pub noise: Option<NoiseSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            search: SearchParams::default(),
            iterations: 2,
            jitter: Jitter::default(),
            pilot: PilotSpec::default(),
            noise: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.jitter.validate()?;
        self.pilot.validate()?;
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassStats {
    pub groups: usize,
    /// Groups whose filter could not be built; their pilot patches were used.
    pub failed_groups: usize,
    pub max_jitter: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct PassOutput {
    pub image: Image,
    pub stats: PassStats,
}

struct GroupEstimate {
    members: Vec<Origin>,
    /// `members.len() × n` estimates, row-major.
    values: Vec<f64>,
    jitter: f64,
    failed: bool,
}

fn estimate_group(
    noisy: &Image,
    pilot: &Image,
    reference: Origin,
    cfg: &PipelineConfig,
) -> Result<GroupEstimate> {
    let side = cfg.search.patch_side;
    let n = side * side;
    let group = find_group(pilot, reference, &cfg.search)?;
    let k = group.members.len();

    let mut values = vec![0.0; k * n];
    for (chunk, &o) in values.chunks_exact_mut(n).zip(&group.members) {
        pilot.copy_block(o, side, chunk);
    }
    let pilot_patches: Vec<&[f64]> = values.chunks_exact(n).collect();

    let filter = sample_stats(&pilot_patches, n).and_then(|s| build_filter(&s, cfg.jitter));
    let filter = match filter {
        Ok(f) => f,
        Err(e) => {
            debug!("group at ({}, {}) falls back to pilot: {e}", reference.row, reference.col);
            return Ok(GroupEstimate {
                members: group.members,
                values,
                jitter: 0.0,
                failed: true,
            });
        }
    };

    let mut noisy_patch = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    for (chunk, &o) in values.chunks_exact_mut(n).zip(&group.members) {
        noisy.copy_block(o, side, &mut noisy_patch);
        filter.apply_into(&noisy_patch, chunk, &mut scratch)?;
    }
    Ok(GroupEstimate {
        members: group.members,
        values,
        jitter: filter.jitter_used,
        failed: false,
    })
}

/// One pass: every noisy patch of every group is replaced by its BLP estimate
/// from statistics of the corresponding pilot patches, then overlapping
/// estimates are averaged.
pub fn denoise_pass(noisy: &Image, pilot: &Image, cfg: &PipelineConfig) -> Result<PassOutput> {
    cfg.validate()?;
    noisy.same_dims(pilot)?;
    let start = Instant::now();
    let side = cfg.search.patch_side;
    let refs = reference_grid(noisy.width(), noisy.height(), &cfg.search)?;

    let mut acc = Accumulator::for_image(noisy);
    let mut stats = PassStats {
        groups: refs.len(),
        failed_groups: 0,
        max_jitter: 0.0,
        elapsed: Duration::ZERO,
    };
    for batch in refs.chunks(BATCH) {
        let estimates: Vec<GroupEstimate> = batch
            .par_iter()
            .map(|&r| estimate_group(noisy, pilot, r, cfg))
            .collect::<Result<_>>()?;
        for est in estimates {
            stats.failed_groups += est.failed as usize;
            stats.max_jitter = stats.max_jitter.max(est.jitter);
            for (o, chunk) in est.members.iter().zip(est.values.chunks_exact(side * side)) {
                acc.add_block(*o, side, chunk, 1.0);
            }
        }
    }
    if stats.failed_groups > 0 {
        warn!("{} of {} groups fell back to the pilot", stats.failed_groups, stats.groups);
    }
    let image = acc.finalize(pilot)?;
    stats.elapsed = start.elapsed();
    Ok(PassOutput { image, stats })
}

#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    pub image: Image,
    pub pilot: Image,
    pub passes: Vec<PassStats>,
}

/// Runs `cfg.iterations` passes starting from `pilot`. Every pass filters the
/// original noisy image; only the pilot is updated.
pub fn denoise_with_pilot(noisy: &Image, pilot: Image, cfg: &PipelineConfig) -> Result<DenoiseOutput> {
    cfg.validate()?;
    let mut current = pilot.clone();
    let mut passes = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let out = denoise_pass(noisy, &current, cfg)?;
        passes.push(out.stats);
        current = out.image;
    }
    Ok(DenoiseOutput {
        image: current,
        pilot,
        passes,
    })
}

pub fn denoise(noisy: &Image, cfg: &PipelineConfig) -> Result<DenoiseOutput> {
    cfg.validate()?;
    let pilot = make_pilot(noisy, &cfg.pilot)?;
    denoise_with_pilot(noisy, pilot, cfg)
}
