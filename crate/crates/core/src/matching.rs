//! Reference grid and windowed k-nearest-patch search on the pilot image.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::image::{Image, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub patch_side: usize,
    pub stride: usize,
    /// Side of the square search window, in pixels.
    pub window: usize,
    pub k: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            patch_side: 8,
            stride: 4,
            window: 40,
            k: 30,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_side == 0 {
            return Err(Error::Config("patch side must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if self.window < self.patch_side {
            return Err(Error::Config(format!(
                "window {} smaller than patch side {}",
                self.window, self.patch_side
            )));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k must be >= 2, got {}", self.k)));
        }
        Ok(())
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_side * self.patch_side
    }
}

/// k nearest pilot patches to a reference, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGroup {
    pub reference: Origin,
    pub members: Vec<Origin>,
    /// Squared Euclidean distances to the reference, parallel to `members`.
    pub distances: Vec<f64>,
}

/// Origins `0, step, 2·step, …` up to `last`, with `last` appended when the
/// step skips it.
pub(crate) fn axis_positions(last: usize, step: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=last).step_by(step).collect();
    if v.last() != Some(&last) {
        v.push(last);
    }
    v
}

/// Row-major list of reference origins. The last valid row and column are
/// always included so the reference patches alone cover the whole image.
pub fn reference_grid(width: usize, height: usize, params: &SearchParams) -> Result<Vec<Origin>> {
    params.validate()?;
    let side = params.patch_side;
    if width < side || height < side {
        return Err(Error::Config(format!(
            "{width}x{height} image is smaller than one {side}x{side} patch"
        )));
    }
    let rows = axis_positions(height - side, params.stride);
    let cols = axis_positions(width - side, params.stride);
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| Origin::new(r, c)))
        .collect())
}

/// Inclusive range of candidate origins along one axis: patches lying inside
/// both the image and the window centred on the reference patch.
pub(crate) fn window_range(reference: usize, extent: usize, side: usize, window: usize) -> (usize, usize) {
    let top = (reference + side / 2) as isize - (window / 2) as isize;
    let lo = top.max(0) as usize;
    let hi = ((top + window as isize).min(extent as isize) as usize).saturating_sub(side);
    (lo.min(reference), hi.max(reference))
}

/// Ordering used for selection: distance, then the reference itself, then
/// row-major origin.
fn rank(a: &(f64, Origin), b: &(f64, Origin), reference: Origin) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| (a.1 != reference).cmp(&(b.1 != reference)))
        .then_with(|| a.1.cmp(&b.1))
}

pub fn find_group(pilot: &Image, reference: Origin, params: &SearchParams) -> Result<PatchGroup> {
    let side = params.patch_side;
    if reference.row + side > pilot.height() || reference.col + side > pilot.width() {
        return Err(Error::OutOfBounds {
            row: reference.row,
            col: reference.col,
            side,
            width: pilot.width(),
            height: pilot.height(),
        });
    }
    let (r0, r1) = window_range(reference.row, pilot.height(), side, params.window);
    let (c0, c1) = window_range(reference.col, pilot.width(), side, params.window);

    let mut cands = Vec::with_capacity((r1 - r0 + 1) * (c1 - c0 + 1));
    for row in r0..=r1 {
        for col in c0..=c1 {
            let o = Origin::new(row, col);
            cands.push((pilot.block_distance(reference, o, side), o));
        }
    }
    let k = params.k.min(cands.len());
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, |a, b| rank(a, b, reference));
        cands.truncate(k);
    }
    cands.sort_unstable_by(|a, b| rank(a, b, reference));

    Ok(PatchGroup {
        reference,
        members: cands.iter().map(|c| c.1).collect(),
        distances: cands.iter().map(|c| c.0).collect(),
    })
}
