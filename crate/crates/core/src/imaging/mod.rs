//! Frames, color spaces, binary masks and integral images.
//!
//! Every other stage consumes the types defined here. Frames are immutable
//! once built; all conversions return new frames.

mod color;
mod integral;
mod pnm;

pub use color::{convert, luma, rgb_to_hsv, rgb_to_lab, rgb_to_yuv};
pub use integral::{integral, IntegralImage};
pub use pnm::{
    list_frame_files, parse_ppm, read_frame, read_ppm, write_pbm, write_ppm, FrameDir,
};

use crate::error::{Error, Result};

/// Color space tag carried by a [`Frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    /// 8-bit sRGB, channels in `[0, 255]`.
    Rgb,
    /// Hexcone HSV: H in `[0, 360)`, S and V in `[0, 1]`.
    Hsv,
    /// BT.601 full range, all channels in `[0, 255]`.
    Yuv,
    /// CIE L*a*b* (D65): L in `[0, 100]`, a and b in `[-128, 127]`.
    Lab,
    /// BT.601 luma rounded to integer levels in `[0, 255]`.
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            _ => 3,
        }
    }

    /// Declared domain `[lo, hi)` of each channel, used for histogram binning.
    pub fn channel_domains(self) -> [(f64, f64); 3] {
        match self {
            ColorSpace::Rgb | ColorSpace::Yuv | ColorSpace::Gray => {
                [(0.0, 256.0), (0.0, 256.0), (0.0, 256.0)]
            }
            ColorSpace::Hsv => [(0.0, 360.0), (0.0, 1.0), (0.0, 1.0)],
            ColorSpace::Lab => [(0.0, 100.0), (-128.0, 128.0), (-128.0, 128.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Rgb => "rgb",
            ColorSpace::Hsv => "hsv",
            ColorSpace::Yuv => "yuv",
            ColorSpace::Lab => "lab",
            ColorSpace::Gray => "gray",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Some(ColorSpace::Rgb),
            "hsv" => Some(ColorSpace::Hsv),
            "yuv" => Some(ColorSpace::Yuv),
            "lab" => Some(ColorSpace::Lab),
            "gray" | "grey" => Some(ColorSpace::Gray),
            _ => None,
        }
    }
}

/// A decoded image. Pixels are stored row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    space: ColorSpace,
    index: u64,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        space: ColorSpace,
        index: u64,
        pixels: Vec<f64>,
    ) -> Result<Self> {
        let expected = width * height * space.channels();
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            space,
            index,
            pixels,
        })
    }

    /// Builds an RGB frame from interleaved 8-bit samples.
    pub fn from_rgb8(width: usize, height: usize, index: u64, data: &[u8]) -> Result<Self> {
        let pixels = data.iter().map(|&v| f64::from(v)).collect();
        Frame::new(width, height, ColorSpace::Rgb, index, pixels)
    }

    /// A frame where every pixel has the same value.
    pub fn filled(
        width: usize,
        height: usize,
        space: ColorSpace,
        index: u64,
        value: &[f64],
    ) -> Result<Self> {
        if value.len() != space.channels() {
            return Err(Error::DimensionMismatch {
                expected: space.channels(),
                actual: value.len(),
            });
        }
        let mut pixels = Vec::with_capacity(width * height * value.len());
        for _ in 0..width * height {
            pixels.extend_from_slice(value);
        }
        Frame::new(width, height, space, index, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn channels(&self) -> usize {
        self.space.channels()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let c = self.channels();
        let i = (y * self.width + x) * c;
        &self.pixels[i..i + c]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let c = self.channels();
        let i = (y * self.width + x) * c;
        &mut self.pixels[i..i + c]
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    /// Copies out a rectangular region; the crop keeps the frame index.
    pub fn crop(&self, rect: Rect) -> Result<Frame> {
        self.check_rect(rect)?;
        let c = self.channels();
        let mut pixels = Vec::with_capacity(rect.w * rect.h * c);
        for y in rect.y..rect.y + rect.h {
            let start = (y * self.width + rect.x) * c;
            pixels.extend_from_slice(&self.pixels[start..start + rect.w * c]);
        }
        Frame::new(rect.w, rect.h, self.space, self.index, pixels)
    }

    /// 8-bit interleaved samples, clamped and rounded. Only meaningful for RGB and GRAY.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub(crate) fn check_rect(&self, r: Rect) -> Result<()> {
        if r.x + r.w > self.width || r.y + r.h > self.height {
            return Err(Error::RectOutOfBounds {
                x: r.x,
                y: r.y,
                w: r.w,
                h: r.h,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

/// Axis-aligned pixel rectangle `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Grows the rectangle by `margin` on every side, clipped to `bounds`.
    pub fn expand_within(&self, margin: usize, bounds: &Rect) -> Rect {
        let x0 = self.x.saturating_sub(margin).max(bounds.x);
        let y0 = self.y.saturating_sub(margin).max(bounds.y);
        let x1 = (self.right() + margin).min(bounds.right());
        let y1 = (self.bottom() + margin).min(bounds.bottom());
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }
}

/// Binary per-pixel mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Mask {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Pixel-wise AND of two equally sized masks.
    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected: self.bits.len(),
                actual: other.bits.len(),
            });
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(Mask {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    pub fn crop(&self, rect: Rect) -> Mask {
        let mut out = Mask::new(rect.w, rect.h);
        for y in 0..rect.h {
            for x in 0..rect.w {
                out.set(x, y, self.get(rect.x + x, rect.y + y));
            }
        }
        out
    }
}
