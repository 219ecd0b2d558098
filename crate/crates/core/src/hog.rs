//! Histogram of oriented gradients.
//!
//! Gradients use the centered `[-1, 0, 1]` kernel with replicate borders.
//! Orientations are unsigned (`[0, 180)` degrees) and each pixel votes its
//! gradient magnitude into the two nearest bins, where bin `b` is centered at
//! `b * 180 / orientations` and bins wrap around at 180.

use crate::features::FeatureVector;
use crate::imaging::GrayImage;
use crate::GeometryError;

/// Added under the square root during block normalization.
pub const NORM_EPSILON: f64 = 1e-5;
/// Component clip used by L2-Hys.
pub const L2HYS_CLIP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockNorm {
    /// L2 normalize, clip at 0.2, L2 normalize again.
    L2Hys,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogParams {
    pub orientations: usize,
    /// Pixels per cell edge.
    pub cell_size: usize,
    /// Cells per block edge.
    pub block_size: usize,
    /// Block step, in cells.
    pub block_stride: usize,
    pub norm: BlockNorm,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            orientations: 8,
            cell_size: 16,
            block_size: 2,
            block_stride: 1,
            norm: BlockNorm::L2Hys,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.orientations == 0 || self.cell_size == 0 || self.block_size == 0 || self.block_stride == 0 {
            return Err(GeometryError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }

    /// Descriptor length for a `width x height` image, or `None` when the
    /// image does not tile into whole cells and blocks.
    pub fn output_dim(&self, width: usize, height: usize) -> Option<usize> {
        self.validate().ok()?;
        if !width.is_multiple_of(self.cell_size) || !height.is_multiple_of(self.cell_size) {
            return None;
        }
        let (cx, cy) = (width / self.cell_size, height / self.cell_size);
        if cx < self.block_size || cy < self.block_size {
            return None;
        }
        let bx = (cx - self.block_size) / self.block_stride + 1;
        let by = (cy - self.block_size) / self.block_stride + 1;
        Some(bx * by * self.block_size * self.block_size * self.orientations)
    }
}

/// Per-cell orientation histograms, row-major over cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub cells_x: usize,
    pub cells_y: usize,
    pub orientations: usize,
    pub bins: Vec<f64>,
}

impl CellGrid {
    pub fn cell(&self, cx: usize, cy: usize) -> &[f64] {
        let start = (cy * self.cells_x + cx) * self.orientations;
        &self.bins[start..start + self.orientations]
    }
}

/// Centered-difference gradient at `(x, y)` with replicate borders.
#[inline]
pub fn gradient_at(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let (xi, yi) = (x as isize, y as isize);
    let gx = img.get_clamped(xi + 1, yi) as f64 - img.get_clamped(xi - 1, yi) as f64;
    let gy = img.get_clamped(xi, yi + 1) as f64 - img.get_clamped(xi, yi - 1) as f64;
    (gx, gy)
}

/// Unsigned orientation of a gradient in degrees, in `[0, 180)`.
#[inline]
pub fn unsigned_orientation(gx: f64, gy: f64) -> f64 {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 180.0;
    }
    if deg >= 180.0 {
        deg -= 180.0;
    }
    deg
}

fn check_geometry(img: &GrayImage, p: &HogParams) -> Result<(usize, usize), GeometryError> {
    p.validate()?;
    if !img.width().is_multiple_of(p.cell_size) || !img.height().is_multiple_of(p.cell_size) {
        return Err(GeometryError::NotDivisible {
            width: img.width(),
            height: img.height(),
            unit: p.cell_size,
        });
    }
    let (cx, cy) = (img.width() / p.cell_size, img.height() / p.cell_size);
    if cx < p.block_size || cy < p.block_size {
        return Err(GeometryError::TooSmall {
            width: img.width(),
            height: img.height(),
        });
    }
    Ok((cx, cy))
}

/// Accumulates the magnitude-weighted orientation histogram of every cell.
pub fn cell_histograms(img: &GrayImage, p: &HogParams) -> Result<CellGrid, GeometryError> {
    p.validate()?;
    if !img.width().is_multiple_of(p.cell_size) || !img.height().is_multiple_of(p.cell_size) {
        return Err(GeometryError::NotDivisible {
            width: img.width(),
            height: img.height(),
            unit: p.cell_size,
        });
    }
    let (cells_x, cells_y) = (img.width() / p.cell_size, img.height() / p.cell_size);
    let n = p.orientations;
    let bin_width = 180.0 / n as f64;
    let mut bins = vec![0.0f64; cells_x * cells_y * n];

    for y in 0..img.height() {
        let row_base = (y / p.cell_size) * cells_x;
        for x in 0..img.width() {
            let (gx, gy) = gradient_at(img, x, y);
            let magnitude = (gx * gx + gy * gy).sqrt();
            if magnitude == 0.0 {
                continue;
            }
            let pos = unsigned_orientation(gx, gy) / bin_width;
            let lower = pos.floor();
            let frac = pos - lower;
            let lo = (lower as usize) % n;
            let hi = (lo + 1) % n;
            let base = (row_base + x / p.cell_size) * n;
            bins[base + lo] += magnitude * (1.0 - frac);
            bins[base + hi] += magnitude * frac;
        }
    }
    Ok(CellGrid {
        cells_x,
        cells_y,
        orientations: n,
        bins,
    })
}

/// Normalizes one block vector in place.
pub fn normalize_block(block: &mut [f64], norm: BlockNorm) {
    let l2 = |v: &mut [f64]| {
        let denom = (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPSILON).sqrt();
        v.iter_mut().for_each(|x| *x /= denom);
    };
    l2(block);
    if norm == BlockNorm::L2Hys {
        block.iter_mut().for_each(|x| *x = x.min(L2HYS_CLIP));
        l2(block);
    }
}

/// Computes the HOG descriptor.
///
/// Blocks are visited row-major, cells within a block row-major, bins in
/// ascending order.
pub fn hog_extract(img: &GrayImage, p: &HogParams) -> Result<FeatureVector, GeometryError> {
    let (cells_x, cells_y) = check_geometry(img, p)?;
    let grid = cell_histograms(img, p)?;
    let n = p.orientations;
    let block_len = p.block_size * p.block_size * n;
    let dim = p.output_dim(img.width(), img.height()).expect("geometry checked");
    let mut out = Vec::with_capacity(dim);
    let mut block = vec![0.0f64; block_len];

    for by in (0..=cells_y - p.block_size).step_by(p.block_stride) {
        for bx in (0..=cells_x - p.block_size).step_by(p.block_stride) {
            let mut k = 0;
            for cy in by..by + p.block_size {
                for cx in bx..bx + p.block_size {
                    block[k..k + n].copy_from_slice(grid.cell(cx, cy));
                    k += n;
                }
            }
            normalize_block(&mut block, p.norm);
            out.extend(block.iter().map(|&v| v as f32));
        }
    }
    debug_assert_eq!(out.len(), dim);
    Ok(FeatureVector::new(out, "hog"))
}
