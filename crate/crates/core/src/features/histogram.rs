use crate::error::{Error, Result};
use crate::imaging::{convert, rgb_to_lab, ColorSpace, Frame, Mask};

pub const GLOBAL_BINS_PER_CHANNEL: usize = 32;
pub const GLOBAL_DIM: usize = 3 * GLOBAL_BINS_PER_CHANNEL;
pub const LOCAL_BINS_PER_CHANNEL: usize = 8;
pub const LOCAL_DIM: usize = 3 * LOCAL_BINS_PER_CHANNEL;

/// 96-bin color histogram: three 32-bin channel blocks, each L1-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalColorHistogram {
    bins: Vec<f64>,
    space: ColorSpace,
}

impl GlobalColorHistogram {
    /// Normalizes raw counts from [`histogram_counts`].
    pub fn from_counts(counts: &[f64], space: ColorSpace) -> Result<Self> {
        if counts.len() != GLOBAL_DIM {
            return Err(Error::DimensionMismatch {
                expected: GLOBAL_DIM,
                actual: counts.len(),
            });
        }
        let mut bins = counts.to_vec();
        for block in bins.chunks_mut(GLOBAL_BINS_PER_CHANNEL) {
            let total: f64 = block.iter().sum();
            if total <= 0.0 {
                return Err(Error::EmptyRegion("no pixels to histogram"));
            }
            block.iter_mut().for_each(|b| *b /= total);
        }
        Ok(GlobalColorHistogram { bins, space })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }
}

/// Index of the equal-width bin holding `v` in `[lo, hi)`; values on or past
/// the edges land in the first or last bin.
#[inline]
pub(crate) fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = ((v - lo) / (hi - lo) * bins as f64).floor();
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

/// Unnormalized 96-bin counts of a frame already in its target space.
pub fn histogram_counts(frame: &Frame, mask: Option<&Mask>) -> Result<Vec<f64>> {
    if frame.channels() != 3 {
        return Err(Error::InvalidParameter(
            "color histogram needs a 3-channel frame".into(),
        ));
    }
    if let Some(m) = mask {
        if m.width() != frame.width() || m.height() != frame.height() {
            return Err(Error::DimensionMismatch {
                expected: frame.width() * frame.height(),
                actual: m.width() * m.height(),
            });
        }
    }
    let domains = frame.space().channel_domains();
    let mut counts = vec![0.0; GLOBAL_DIM];
    for (i, px) in frame.pixels().chunks_exact(3).enumerate() {
        if mask.is_some_and(|m| !m.bits()[i]) {
            continue;
        }
        for (c, (&v, &(lo, hi))) in px.iter().zip(domains.iter()).enumerate() {
            counts[c * GLOBAL_BINS_PER_CHANNEL + bin_index(v, lo, hi, GLOBAL_BINS_PER_CHANNEL)] +=
                1.0;
        }
    }
    Ok(counts)
}

/// Global histogram of an RGB frame in `space`, optionally restricted to a mask.
pub fn global_histogram(
    frame: &Frame,
    space: ColorSpace,
    mask: Option<&Mask>,
) -> Result<GlobalColorHistogram> {
    if space == ColorSpace::Gray {
        return Err(Error::InvalidParameter(
            "global histogram needs a color space".into(),
        ));
    }
    let converted;
    let src = if frame.space() == space {
        frame
    } else {
        converted = convert(frame, space)?;
        &converted
    };
    GlobalColorHistogram::from_counts(&histogram_counts(src, mask)?, space)
}

/// 24-bin LAB histogram of the `scale × scale` square centered on `center`.
///
/// Accepts an RGB or LAB frame; pixels outside the frame are ignored.
pub fn local_color_histogram(
    frame: &Frame,
    center: (usize, usize),
    scale: usize,
) -> Result<[f64; LOCAL_DIM]> {
    let lab = match frame.space() {
        ColorSpace::Lab => false,
        ColorSpace::Rgb => true,
        other => return Err(Error::UnsupportedSource(other)),
    };
    let half = scale / 2;
    let (cx, cy) = (center.0 as isize, center.1 as isize);
    let x0 = (cx - half as isize).max(0) as usize;
    let y0 = (cy - half as isize).max(0) as usize;
    let x1 = ((cx - half as isize + scale as isize).max(0) as usize).min(frame.width());
    let y1 = ((cy - half as isize + scale as isize).max(0) as usize).min(frame.height());
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::EmptyRegion("kernel scope outside the frame"));
    }
    let domains = ColorSpace::Lab.channel_domains();
    let mut hist = [0.0; LOCAL_DIM];
    for y in y0..y1 {
        for x in x0..x1 {
            let p = frame.pixel(x, y);
            let v = if lab {
                rgb_to_lab(p[0], p[1], p[2])
            } else {
                [p[0], p[1], p[2]]
            };
            for c in 0..3 {
                let (lo, hi) = domains[c];
                hist[c * LOCAL_BINS_PER_CHANNEL + bin_index(v[c], lo, hi, LOCAL_BINS_PER_CHANNEL)] +=
                    1.0;
            }
        }
    }
    let n = ((x1 - x0) * (y1 - y0)) as f64;
    hist.iter_mut().for_each(|b| *b /= n);
    Ok(hist)
}
