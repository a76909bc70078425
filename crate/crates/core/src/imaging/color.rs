use super::{ColorSpace, Frame};
use crate::error::{Error, Result};

// sRGB primaries, D65 white.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];
const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

/// Converts an RGB frame into `target`. Dimensions and index are preserved.
pub fn convert(frame: &Frame, target: ColorSpace) -> Result<Frame> {
    if frame.space() != ColorSpace::Rgb {
        return Err(Error::UnsupportedSource(frame.space()));
    }
    let src = frame.pixels();
    let pixels: Vec<f64> = match target {
        ColorSpace::Rgb => src.to_vec(),
        ColorSpace::Gray => src
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
        ColorSpace::Hsv => map3(src, rgb_to_hsv),
        ColorSpace::Yuv => map3(src, rgb_to_yuv),
        ColorSpace::Lab => map3(src, rgb_to_lab),
    };
    Frame::new(frame.width(), frame.height(), target, frame.index(), pixels)
}

fn map3(src: &[f64], f: fn(f64, f64, f64) -> [f64; 3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(src.len());
    for p in src.chunks_exact(3) {
        out.extend_from_slice(&f(p[0], p[1], p[2]));
    }
    out
}

/// BT.601 luma quantized to integer levels, so that integral images over it are exact.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    (0.299 * r + 0.587 * g + 0.114 * b).round().clamp(0.0, 255.0)
}

pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max / 255.0;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let mut h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    [h, s, v]
}

/// BT.601 full-range (JFIF) YCbCr.
pub fn rgb_to_yuv(r: f64, g: f64, b: f64) -> [f64; 3] {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let u = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
    let v = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
    [y, u.clamp(0.0, 255.0), v.clamp(0.0, 255.0)]
}

fn srgb_to_linear(c: f64) -> f64 {
    let c = c / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn rgb_to_lab(r: f64, g: f64, b: f64) -> [f64; 3] {
    let lin = [srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)];
    let mut xyz = [0.0; 3];
    for (out, row) in xyz.iter_mut().zip(RGB_TO_XYZ.iter()) {
        *out = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    let fx = lab_f(xyz[0] / D65_WHITE[0]);
    let fy = lab_f(xyz[1] / D65_WHITE[1]);
    let fz = lab_f(xyz[2] / D65_WHITE[2]);
    [
        (116.0 * fy - 16.0).clamp(0.0, 100.0),
        (500.0 * (fx - fy)).clamp(-128.0, 127.0),
        (200.0 * (fy - fz)).clamp(-128.0, 127.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(rgb: [f64; 3]) -> Frame {
        Frame::filled(1, 1, ColorSpace::Rgb, 0, &rgb).unwrap()
    }

    #[test]
    fn white_to_lab() {
        let lab = convert(&single([255.0; 3]), ColorSpace::Lab).unwrap();
        let p = lab.pixel(0, 0);
        assert!((p[0] - 100.0).abs() < 0.5);
        assert!(p[1].abs() < 0.5 && p[2].abs() < 0.5);
    }

    #[test]
    fn dark_red_to_lab_matches_reference() {
        // Reference values from an independent sRGB -> XYZ -> Lab script.
        let p = rgb_to_lab(200.0, 30.0, 30.0);
        let expected = [43.22038407553688, 63.04046741784097, 45.21988630424213];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn black_to_hsv() {
        assert_eq!(rgb_to_hsv(0.0, 0.0, 0.0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(rgb_to_hsv(255.0, 0.0, 0.0), [0.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv(0.0, 255.0, 0.0), [120.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv(0.0, 0.0, 255.0), [240.0, 1.0, 1.0]);
        let h = rgb_to_hsv(255.0, 0.0, 1.0)[0];
        assert!((0.0..360.0).contains(&h));
    }

    #[test]
    fn yuv_gray_is_neutral() {
        let [y, u, v] = rgb_to_yuv(128.0, 128.0, 128.0);
        assert!((y - 128.0).abs() < 1e-9);
        assert!((u - 128.0).abs() < 1e-9);
        assert!((v - 128.0).abs() < 1e-9);
    }

    #[test]
    fn white_luma_is_255() {
        assert_eq!(luma(255.0, 255.0, 255.0), 255.0);
        let g = convert(&single([255.0; 3]), ColorSpace::Gray).unwrap();
        assert_eq!(g.pixels(), &[255.0]);
    }

    #[test]
    fn rejects_non_rgb_source() {
        let lab = convert(&single([10.0, 20.0, 30.0]), ColorSpace::Lab).unwrap();
        let err = convert(&lab, ColorSpace::Hsv).unwrap_err();
        assert!(err.to_string().contains("Lab"));
    }

    #[test]
    fn conversion_is_deterministic() {
        let data: Vec<u8> = (0..48u8).map(|v| v.wrapping_mul(37)).collect();
        let f = Frame::from_rgb8(4, 4, 3, &data).unwrap();
        for space in [ColorSpace::Lab, ColorSpace::Hsv, ColorSpace::Yuv, ColorSpace::Gray] {
            let a = convert(&f, space).unwrap();
            let b = convert(&f, space).unwrap();
            assert_eq!(a.index(), 3);
            assert_eq!((a.width(), a.height()), (4, 4));
            let bits_a: Vec<u64> = a.pixels().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.pixels().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }
}
