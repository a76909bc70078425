use super::Frame;
use crate::error::{Error, Result};

/// Summed-area table with one plane per source channel.
///
/// `entry(x, y)` is the sum of source pixels in `[0, x) × [0, y)`, so the
/// first row and column are zero. Sums are accumulated in `f64`, which is
/// exact for integer sources up to 2^53 (an 8K frame of 8-bit samples needs
/// about 2^33).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    channels: usize,
    source_index: u64,
    table: Vec<f64>,
}

pub fn integral(frame: &Frame) -> IntegralImage {
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let stride = w + 1;
    let plane = stride * (h + 1);
    let mut table = vec![0.0; plane * c];
    let src = frame.pixels();
    for ch in 0..c {
        let t = &mut table[ch * plane..(ch + 1) * plane];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += src[(y * w + x) * c + ch];
                t[(y + 1) * stride + x + 1] = t[y * stride + x + 1] + row;
            }
        }
    }
    IntegralImage {
        width: w,
        height: h,
        channels: c,
        source_index: frame.index(),
        table,
    }
}

impl IntegralImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn source_index(&self) -> u64 {
        self.source_index
    }

    /// Cumulative sum for channel 0 at table position `(x, y)`, `x <= width`, `y <= height`.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.table[y * (self.width + 1) + x]
    }

    /// Sum of channel 0 over `[x, x+w) × [y, y+h)`.
    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> Result<f64> {
        self.rect_sum_channel(0, x, y, w, h)
    }

    pub fn rect_sum_channel(
        &self,
        channel: usize,
        x: usize,
        y: usize,
        w: usize,
        h: usize,
    ) -> Result<f64> {
        if channel >= self.channels {
            return Err(Error::InvalidParameter(format!(
                "channel {channel} of {}",
                self.channels
            )));
        }
        if x + w > self.width || y + h > self.height {
            return Err(Error::RectOutOfBounds {
                x,
                y,
                w,
                h,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.box_sum(channel, x, y, x + w, y + h))
    }

    /// Sum over `[x0, x1) × [y0, y1)` without bounds checking beyond slice indexing.
    #[inline]
    pub(crate) fn box_sum(&self, channel: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let stride = self.width + 1;
        let t = &self.table[channel * stride * (self.height + 1)..];
        t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::ColorSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gray(w: usize, h: usize, px: Vec<f64>) -> Frame {
        Frame::new(w, h, ColorSpace::Gray, 0, px).unwrap()
    }

    #[test]
    fn single_pixel() {
        let ii = integral(&gray(1, 1, vec![7.0]));
        assert_eq!(ii.rect_sum(0, 0, 1, 1).unwrap(), 7.0);
    }

    #[test]
    fn zero_frame_and_zero_area() {
        let ii = integral(&gray(5, 4, vec![0.0; 20]));
        for x in 0..5 {
            for y in 0..4 {
                assert_eq!(ii.rect_sum(x, y, 5 - x, 4 - y).unwrap(), 0.0);
            }
        }
        let ii = integral(&gray(3, 3, vec![1.0; 9]));
        assert_eq!(ii.rect_sum(1, 1, 0, 2).unwrap(), 0.0);
        assert_eq!(ii.rect_sum(1, 1, 2, 0).unwrap(), 0.0);
    }

    #[test]
    fn first_row_and_column_zero() {
        let ii = integral(&gray(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        for x in 0..=3 {
            assert_eq!(ii.entry(x, 0), 0.0);
        }
        for y in 0..=2 {
            assert_eq!(ii.entry(0, y), 0.0);
        }
        assert_eq!(ii.entry(3, 2), 21.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let px: Vec<f64> = (0..256).map(|_| rng.gen_range(0..256) as f64).collect();
        let f = gray(16, 16, px.clone());
        let ii = integral(&f);
        for _ in 0..50 {
            let x = rng.gen_range(0..16);
            let y = rng.gen_range(0..16);
            let w = rng.gen_range(0..=16 - x);
            let h = rng.gen_range(0..=16 - y);
            let mut brute = 0.0;
            for yy in y..y + h {
                for xx in x..x + w {
                    brute += px[yy * 16 + xx];
                }
            }
            assert_eq!(ii.rect_sum(x, y, w, h).unwrap(), brute);
        }
    }

    #[test]
    fn out_of_bounds_names_coordinates() {
        let ii = integral(&gray(4, 4, vec![1.0; 16]));
        let err = ii.rect_sum(2, 1, 3, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("x=2") && msg.contains("w=3"), "{msg}");
    }

    #[test]
    fn per_channel_planes() {
        let f = Frame::filled(3, 3, ColorSpace::Rgb, 0, &[1.0, 2.0, 3.0]).unwrap();
        let ii = integral(&f);
        assert_eq!(ii.rect_sum_channel(0, 0, 0, 3, 3).unwrap(), 9.0);
        assert_eq!(ii.rect_sum_channel(1, 0, 0, 3, 3).unwrap(), 18.0);
        assert_eq!(ii.rect_sum_channel(2, 0, 0, 3, 3).unwrap(), 27.0);
        assert!(ii.rect_sum_channel(3, 0, 0, 1, 1).is_err());
    }
}
