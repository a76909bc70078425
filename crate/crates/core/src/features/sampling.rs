use std::fmt::Write as _;

use super::hessian::fast_hessian;
use super::histogram::{local_color_histogram, LOCAL_DIM};
use super::surf::{SurfLayout, SURF_DIM};
use crate::error::{Error, Result};
use crate::imaging::{convert, integral, ColorSpace, Frame, IntegralImage, Mask, Rect};

pub const DESCRIPTOR_DIM: usize = SURF_DIM + LOCAL_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Dense,
    Keypoint,
}

/// Where local descriptors are taken.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub mode: SamplingMode,
    /// Grid spacing in pixels (dense mode).
    pub interval: usize,
    /// Kernel sizes in pixels (dense mode).
    pub scales: Vec<usize>,
    /// Fast Hessian determinant threshold (keypoint mode).
    pub hessian_threshold: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            mode: SamplingMode::Dense,
            interval: 9,
            scales: vec![9],
            hessian_threshold: 100.0,
        }
    }
}

impl SamplingPlan {
    pub fn dense(interval: usize, scales: Vec<usize>) -> Result<Self> {
        let plan = SamplingPlan {
            interval,
            scales,
            ..Default::default()
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn keypoint(hessian_threshold: f64) -> Result<Self> {
        let plan = SamplingPlan {
            mode: SamplingMode::Keypoint,
            hessian_threshold,
            ..Default::default()
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval < 1 {
            return Err(Error::InvalidParameter("interval must be >= 1".into()));
        }
        if self.scales.is_empty() || self.scales.contains(&0) {
            return Err(Error::InvalidParameter(
                "scales must be non-empty and positive".into(),
            ));
        }
        if !(self.hessian_threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "hessian threshold must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Short textual identity of the plan, recorded with trained codebooks.
    pub fn fingerprint(&self) -> String {
        match self.mode {
            SamplingMode::Dense => format!(
                "dense:i{}:s{}",
                self.interval,
                self.scales
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            SamplingMode::Keypoint => format!("keypoint:t{}", self.hessian_threshold),
        }
    }

    /// Largest number of pixels any kernel of this plan reaches from its center.
    pub fn max_support(&self) -> usize {
        let scales: Vec<usize> = match self.mode {
            SamplingMode::Dense => self.scales.clone(),
            SamplingMode::Keypoint => vec![27],
        };
        scales
            .iter()
            .map(|&s| {
                let l = SurfLayout::new(s);
                l.extent_before().max(l.extent_after())
            })
            .max()
            .unwrap_or(0)
    }
}

/// 88-dimensional color-texture descriptor: upright SURF followed by a
/// 24-bin local LAB histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDescriptor {
    pub surf: [f64; SURF_DIM],
    pub color: [f64; LOCAL_DIM],
    pub center: (usize, usize),
    pub scale: usize,
}

impl LocalDescriptor {
    pub fn vector(&self) -> [f64; DESCRIPTOR_DIM] {
        let mut v = [0.0; DESCRIPTOR_DIM];
        v[..SURF_DIM].copy_from_slice(&self.surf);
        v[SURF_DIM..].copy_from_slice(&self.color);
        v
    }

    /// `x y scale v1..v88`, values with 9 significant digits.
    pub fn dump_line(&self) -> String {
        let mut line = format!("{} {} {}", self.center.0, self.center.1, self.scale);
        for v in self.vector() {
            let _ = write!(line, " {v:.8e}");
        }
        line
    }
}

/// Precomputed inputs shared by every descriptor taken from one RGB image:
/// the luma integral image for SURF and the LAB image for color.
#[derive(Debug, Clone)]
pub struct FeatureSource {
    gray: IntegralImage,
    lab: Frame,
}

impl FeatureSource {
    pub fn new(rgb: &Frame) -> Result<Self> {
        Ok(FeatureSource {
            gray: integral(&convert(rgb, ColorSpace::Gray)?),
            lab: convert(rgb, ColorSpace::Lab)?,
        })
    }

    pub fn width(&self) -> usize {
        self.lab.width()
    }

    pub fn height(&self) -> usize {
        self.lab.height()
    }

    pub fn gray_integral(&self) -> &IntegralImage {
        &self.gray
    }

    pub fn lab(&self) -> &Frame {
        &self.lab
    }

    fn descriptor(&self, layout: &SurfLayout, center: (usize, usize), scale: usize) -> Result<LocalDescriptor> {
        Ok(LocalDescriptor {
            surf: layout.describe(&self.gray, center),
            color: local_color_histogram(&self.lab, center, scale)?,
            center,
            scale,
        })
    }
}

/// Valid dense-grid coordinates along one axis: start at the first position
/// with full kernel support inside `[lo, hi)`, step by `interval`.
pub(crate) fn grid_axis(
    extent: usize,
    before: usize,
    after: usize,
    lo: usize,
    hi: usize,
    interval: usize,
) -> impl Iterator<Item = usize> {
    let first = lo.max(before);
    let last_valid = extent.checked_sub(after);
    let end = match last_valid {
        Some(l) => hi.min(l + 1),
        None => 0,
    };
    (first..end).step_by(interval)
}

/// Extracts descriptors from `source`.
///
/// `region` restricts dense grid centers to a rectangle (the grid starts at
/// its first valid position); `mask` further restricts centers to set
/// pixels. An empty result is returned when the restrictions exclude every
/// position; [`Error::NoSamplePositions`] is reserved for images too small
/// for any kernel.
pub fn sample(
    source: &FeatureSource,
    plan: &SamplingPlan,
    region: Option<Rect>,
    mask: Option<&Mask>,
) -> Result<Vec<LocalDescriptor>> {
    plan.validate()?;
    let (w, h) = (source.width(), source.height());
    if let Some(m) = mask {
        if m.width() != w || m.height() != h {
            return Err(Error::DimensionMismatch {
                expected: w * h,
                actual: m.width() * m.height(),
            });
        }
    }
    let region = region.unwrap_or(Rect::new(0, 0, w, h));
    let allowed = |x: usize, y: usize| region.contains(x, y) && mask.is_none_or(|m| m.get(x, y));
    let mut out = Vec::new();
    match plan.mode {
        SamplingMode::Dense => {
            let mut any_fits = false;
            for &scale in &plan.scales {
                let layout = SurfLayout::new(scale);
                let (before, after) = (layout.extent_before(), layout.extent_after());
                any_fits |= w >= before + after && h >= before + after;
                for y in grid_axis(h, before, after, region.y, region.bottom(), plan.interval) {
                    for x in grid_axis(w, before, after, region.x, region.right(), plan.interval) {
                        if allowed(x, y) {
                            out.push(source.descriptor(&layout, (x, y), scale)?);
                        }
                    }
                }
            }
            if !any_fits {
                return Err(Error::NoSamplePositions);
            }
        }
        SamplingMode::Keypoint => {
            let smallest = SurfLayout::new(9);
            if w < smallest.extent_before() + smallest.extent_after()
                || h < smallest.extent_before() + smallest.extent_after()
            {
                return Err(Error::NoSamplePositions);
            }
            for kp in fast_hessian(&source.gray, plan.hessian_threshold) {
                let layout = SurfLayout::new(kp.scale);
                let center = (kp.x, kp.y);
                if layout.fits(center, w, h) && allowed(kp.x, kp.y) {
                    out.push(source.descriptor(&layout, center, kp.scale)?);
                }
            }
        }
    }
    Ok(out)
}

/// Convenience wrapper sampling a whole RGB frame.
pub fn sample_frame(frame: &Frame, plan: &SamplingPlan) -> Result<Vec<LocalDescriptor>> {
    sample(&FeatureSource::new(frame)?, plan, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::surf_descriptor;

    fn textured(w: usize, h: usize) -> Frame {
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(&[
                    ((x * 31 + y * 17) % 256) as u8,
                    ((x * 7 + y * 3) % 256) as u8,
                    ((x ^ y) * 5 % 256) as u8,
                ]);
            }
        }
        Frame::from_rgb8(w, h, 0, &data).unwrap()
    }

    /// Brute-force oracle: every pixel whose SURF window fits and that lies on
    /// the grid anchored at the first fitting pixel.
    fn oracle_count(frame: &Frame, interval: usize, scales: &[usize]) -> usize {
        let ii = integral(&convert(frame, ColorSpace::Gray).unwrap());
        let mut total = 0;
        for &s in scales {
            let fits: Vec<(usize, usize)> = (0..frame.height())
                .flat_map(|y| (0..frame.width()).map(move |x| (x, y)))
                .filter(|&c| surf_descriptor(&ii, c, s).is_ok())
                .collect();
            if fits.is_empty() {
                continue;
            }
            let x0 = fits.iter().map(|c| c.0).min().unwrap();
            let y0 = fits.iter().map(|c| c.1).min().unwrap();
            total += fits
                .iter()
                .filter(|c| (c.0 - x0) % interval == 0 && (c.1 - y0) % interval == 0)
                .count();
        }
        total
    }

    #[test]
    fn default_plan() {
        let p = SamplingPlan::default();
        assert_eq!((p.interval, p.scales.clone()), (9, vec![9]));
        assert_eq!(p.fingerprint(), "dense:i9:s9");
        assert!(SamplingPlan::dense(0, vec![9]).is_err());
        assert!(SamplingPlan::dense(9, vec![]).is_err());
        assert!(SamplingPlan::keypoint(0.0).is_err());
    }

    #[test]
    fn small_frame_grid_count_matches_oracle() {
        let f = textured(27, 27);
        let d = sample_frame(&f, &SamplingPlan::default()).unwrap();
        assert_eq!(d.len(), oracle_count(&f, 9, &[9]));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].center, (12, 12));
    }

    #[test]
    fn multi_scale_grid_count_matches_oracle() {
        for (w, h) in [(60, 45), (33, 80), (100, 100)] {
            let f = textured(w, h);
            let plan = SamplingPlan::dense(7, vec![9, 15]).unwrap();
            let d = sample_frame(&f, &plan).unwrap();
            assert_eq!(d.len(), oracle_count(&f, 7, &[9, 15]), "{w}x{h}");
        }
    }

    #[test]
    fn too_small_frame_errors() {
        let f = textured(20, 40);
        assert!(matches!(
            sample_frame(&f, &SamplingPlan::default()),
            Err(Error::NoSamplePositions)
        ));
    }

    #[test]
    fn zero_mask_gives_empty_list() {
        let f = textured(50, 50);
        let src = FeatureSource::new(&f).unwrap();
        let m = Mask::new(50, 50);
        let d = sample(&src, &SamplingPlan::default(), None, Some(&m)).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn dense_sampling_is_deterministic() {
        let f = textured(64, 48);
        let a = sample_frame(&f, &SamplingPlan::default()).unwrap();
        let b = sample_frame(&f, &SamplingPlan::default()).unwrap();
        assert_eq!(a, b);
        for d in &a {
            let color: f64 = d.color.iter().sum();
            assert!((color - 3.0).abs() < 1e-6);
            let n: f64 = d.surf.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn region_restricts_centers() {
        let f = textured(80, 80);
        let src = FeatureSource::new(&f).unwrap();
        let r = Rect::new(30, 30, 10, 10);
        let d = sample(&src, &SamplingPlan::default(), Some(r), None).unwrap();
        assert!(!d.is_empty());
        assert!(d.iter().all(|d| r.contains(d.center.0, d.center.1)));
        assert_eq!(d[0].center, (30, 30));
    }

    #[test]
    fn keypoint_mode_produces_fitting_descriptors() {
        let mut f = Frame::filled(80, 80, ColorSpace::Rgb, 0, &[20.0, 20.0, 20.0]).unwrap();
        for y in 36..44 {
            for x in 36..44 {
                f.pixel_mut(x, y).copy_from_slice(&[250.0, 200.0, 80.0]);
            }
        }
        let d = sample_frame(&f, &SamplingPlan::keypoint(100.0).unwrap()).unwrap();
        assert!(!d.is_empty());
    }

    #[test]
    fn dump_line_has_91_fields() {
        let f = textured(27, 27);
        let d = sample_frame(&f, &SamplingPlan::default()).unwrap();
        let line = d[0].dump_line();
        let fields: Vec<&str> = line.split(' ').collect();
        assert_eq!(fields.len(), 91);
        assert_eq!(&fields[..3], &["12", "12", "9"]);
        let v: f64 = fields[3].parse().unwrap();
        assert!((v - d[0].surf[0]).abs() <= 1e-8 * d[0].surf[0].abs().max(1e-300));
    }
}
