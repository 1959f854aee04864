//! Single-channel image container, patch extraction and overlap-aware aggregation.

use crate::error::{Error, Result};

/// Grayscale image stored row-major in double precision.
///
/// Every pixel is finite and nonnegative; constructors reject anything else.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(
                format!("{} pixels ({width}x{height})", width * height),
                format!("{} pixels", data.len()),
            ));
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidPixel { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, data)
    }

    /// Applies `f` pointwise. Negative results are clamped to zero; non-finite
    /// results are rejected.
    pub fn map_clamped(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v).max(0.0)).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }

    fn check_patch(&self, origin: Origin, side: usize) -> Result<()> {
        if side == 0 || origin.row + side > self.height || origin.col + side > self.width {
            return Err(Error::OutOfBounds {
                row: origin.row,
                col: origin.col,
                side,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Copies the `side`x`side` block at `origin` into `out` (row-major).
    /// Bounds are the caller's responsibility.
    #[inline]
    pub(crate) fn copy_block(&self, origin: Origin, side: usize, out: &mut [f64]) {
        for r in 0..side {
            let start = (origin.row + r) * self.width + origin.col;
            out[r * side..(r + 1) * side].copy_from_slice(&self.data[start..start + side]);
        }
    }

    /// Squared Euclidean distance between two blocks of this image.
    #[inline]
    pub(crate) fn block_distance(&self, a: Origin, b: Origin, side: usize) -> f64 {
        let mut acc = 0.0;
        for r in 0..side {
            let ra = (a.row + r) * self.width + a.col;
            let rb = (b.row + r) * self.width + b.col;
            for (x, y) in self.data[ra..ra + side].iter().zip(&self.data[rb..rb + side]) {
                let d = x - y;
                acc += d * d;
            }
        }
        acc
    }
}

/// Top-left pixel coordinates of a patch. Orders by row, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Origin {
    pub row: usize,
    pub col: usize,
}

impl Origin {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Row-major vectorization of a square block together with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub origin: Origin,
    pub side: usize,
    pub values: Vec<f64>,
}

impl Patch {
    pub fn new(origin: Origin, side: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != side * side {
            return Err(Error::shape(side * side, values.len()));
        }
        Ok(Self {
            origin,
            side,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl AsRef<[f64]> for Patch {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub fn extract_patch(img: &Image, origin: Origin, side: usize) -> Result<Patch> {
    img.check_patch(origin, side)?;
    let mut values = vec![0.0; side * side];
    img.copy_block(origin, side, &mut values);
    Ok(Patch {
        origin,
        side,
        values,
    })
}

/// Per-pixel running sums of patch estimates and their weights.
///
/// Pixels with zero accumulated weight keep a zero sum; `finalize` fills them
/// from a fallback image.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    width: usize,
    height: usize,
    sum: Vec<f64>,
    weight: Vec<f64>,
}

impl Accumulator {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            sum: vec![0.0; width * height],
            weight: vec![0.0; width * height],
        }
    }

    pub fn for_image(img: &Image) -> Self {
        Self::new(img.width, img.height)
    }

    pub fn accumulate(&mut self, patch: &Patch) -> Result<()> {
        self.accumulate_weighted(patch, 1.0)
    }

    pub fn accumulate_weighted(&mut self, patch: &Patch, weight: f64) -> Result<()> {
        self.check(patch.origin, patch.side, patch.values.len())?;
        self.add_block(patch.origin, patch.side, &patch.values, weight);
        Ok(())
    }

    fn check(&self, origin: Origin, side: usize, len: usize) -> Result<()> {
        if len != side * side {
            return Err(Error::shape(side * side, len));
        }
        if side == 0 || origin.row + side > self.height || origin.col + side > self.width {
            return Err(Error::OutOfBounds {
                row: origin.row,
                col: origin.col,
                side,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn add_block(&mut self, origin: Origin, side: usize, values: &[f64], weight: f64) {
        for r in 0..side {
            let start = (origin.row + r) * self.width + origin.col;
            let src = &values[r * side..(r + 1) * side];
            for ((s, w), v) in self.sum[start..start + side]
                .iter_mut()
                .zip(&mut self.weight[start..start + side])
                .zip(src)
            {
                *s += weight * v;
                *w += weight;
            }
        }
    }

    /// Elementwise sum with an accumulator built over another work partition.
    pub fn merge(&mut self, other: &Accumulator) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        Ok(())
    }

    /// Number of pixels that received no contribution.
    pub fn uncovered(&self) -> usize {
        self.weight.iter().filter(|&&w| w <= 0.0).count()
    }

    /// Weighted mean per pixel, clamped at zero. Uncovered pixels take the
    /// fallback value.
    pub fn finalize(&self, fallback: &Image) -> Result<Image> {
        if fallback.dims() != (self.width, self.height) {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", fallback.width, fallback.height),
            ));
        }
        let data = self
            .sum
            .iter()
            .zip(&self.weight)
            .zip(&fallback.data)
            .map(|((&s, &w), &f)| if w > 0.0 { (s / w).max(0.0) } else { f })
            .collect();
        Image::new(self.width, self.height, data)
    }
}
