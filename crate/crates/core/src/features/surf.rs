//! Upright 64-dimensional SURF descriptor.
//!
//! A kernel size `L` (the side of the Hessian box filter, 9 at the first
//! octave) maps to the SURF scale `s = 1.2·L/9`. The descriptor window is
//! `20s` wide, split into 4×4 subregions of 5×5 samples spaced `s` apart.
//! Each sample takes Haar wavelet responses of side `2s`, weighted by a
//! Gaussian with `σ = 3.3s` centered on the keypoint.

use crate::error::{Error, Result};
use crate::imaging::IntegralImage;

pub const SURF_DIM: usize = 64;
const SAMPLES: usize = 20;

/// Precomputed sampling layout for one kernel size.
#[derive(Debug, Clone)]
pub(crate) struct SurfLayout {
    /// Pixel-boundary offset of each sample row/column relative to the center pixel.
    offsets: [isize; SAMPLES],
    /// Half side of the Haar wavelet.
    haar: isize,
    weights: [[f64; SAMPLES]; SAMPLES],
}

impl SurfLayout {
    pub(crate) fn new(scale: usize) -> Self {
        let s = 1.2 * scale as f64 / 9.0;
        let mut cont = [0.0; SAMPLES];
        let mut offsets = [0isize; SAMPLES];
        for k in 0..SAMPLES {
            cont[k] = (k as f64 - 9.5) * s;
            offsets[k] = (0.5 + cont[k]).round() as isize;
        }
        let sigma = 3.3 * s;
        let mut weights = [[0.0; SAMPLES]; SAMPLES];
        for (j, row) in weights.iter_mut().enumerate() {
            for (i, w) in row.iter_mut().enumerate() {
                *w = (-(cont[i] * cont[i] + cont[j] * cont[j]) / (2.0 * sigma * sigma)).exp();
            }
        }
        SurfLayout {
            offsets,
            haar: (s.round() as isize).max(1),
            weights,
        }
    }

    /// Pixels needed left/above the center.
    pub(crate) fn extent_before(&self) -> usize {
        (self.haar - self.offsets[0]) as usize
    }

    /// Pixels needed right/below the center, including the center pixel itself.
    pub(crate) fn extent_after(&self) -> usize {
        (self.offsets[SAMPLES - 1] + self.haar) as usize
    }

    pub(crate) fn fits(&self, center: (usize, usize), width: usize, height: usize) -> bool {
        let (x, y) = center;
        x >= self.extent_before()
            && y >= self.extent_before()
            && x + self.extent_after() <= width
            && y + self.extent_after() <= height
    }

    pub(crate) fn describe(&self, ii: &IntegralImage, center: (usize, usize)) -> [f64; SURF_DIM] {
        let (cx, cy) = (center.0 as isize, center.1 as isize);
        let h = self.haar;
        let mut desc = [0.0; SURF_DIM];
        let sum = |x0: isize, y0: isize, x1: isize, y1: isize| {
            ii.box_sum(0, x0 as usize, y0 as usize, x1 as usize, y1 as usize)
        };
        for ky in 0..SAMPLES {
            let by = cy + self.offsets[ky];
            for kx in 0..SAMPLES {
                let bx = cx + self.offsets[kx];
                let dx = sum(bx, by - h, bx + h, by + h) - sum(bx - h, by - h, bx, by + h);
                let dy = sum(bx - h, by, bx + h, by + h) - sum(bx - h, by - h, bx + h, by);
                let w = self.weights[ky][kx];
                let (dx, dy) = (w * dx, w * dy);
                let base = ((ky / 5) * 4 + kx / 5) * 4;
                desc[base] += dx;
                desc[base + 1] += dy;
                desc[base + 2] += dx.abs();
                desc[base + 3] += dy.abs();
            }
        }
        let norm = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            desc.iter_mut().for_each(|v| *v /= norm);
        } else {
            desc = [0.0; SURF_DIM];
        }
        desc
    }
}

/// Descriptor at `center` for kernel size `scale`, computed on a single-channel
/// integral image. Subregion blocks are laid out row-major, each holding
/// `(Σdx, Σdy, Σ|dx|, Σ|dy|)`. Flat windows give the zero vector.
pub fn surf_descriptor(
    ii: &IntegralImage,
    center: (usize, usize),
    scale: usize,
) -> Result<[f64; SURF_DIM]> {
    if scale == 0 {
        return Err(Error::InvalidParameter("SURF scale must be positive".into()));
    }
    let layout = SurfLayout::new(scale);
    if !layout.fits(center, ii.width(), ii.height()) {
        return Err(Error::WindowOutOfBounds {
            x: center.0,
            y: center.1,
            scale,
        });
    }
    Ok(layout.describe(ii, center))
}
