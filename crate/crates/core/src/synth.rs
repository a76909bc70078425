//! Deterministic synthetic scenes and patches: flickering flames, static
//! lamps, moving car lights and noise textures. Used by tests, the
//! self-test command and benchmarking.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{ColorSpace, Frame, Rect};
use crate::proposal::{connected_components, intensity_plane, open3, threshold_mask};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn put(frame: &mut Frame, x: isize, y: isize, rgb: [f64; 3]) {
    if x < 0 || y < 0 || x as usize >= frame.width() || y as usize >= frame.height() {
        return;
    }
    let p = frame.pixel_mut(x as usize, y as usize);
    for c in 0..3 {
        p[c] = rgb[c].round().clamp(0.0, 255.0);
    }
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Dark RGB frame with uniform per-channel noise of ±`amp` around `base`.
pub fn noisy_background(width: usize, height: usize, base: [f64; 3], amp: f64, seed: u64, t: u64) -> Frame {
    let mut rng = rng_for(seed, 0x5eed_0000 + t);
    let mut px = Vec::with_capacity(width * height * 3);
    for _ in 0..width * height {
        for b in base {
            let v = b + if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 };
            px.push(v.round().clamp(0.0, 255.0));
        }
    }
    Frame::new(width, height, ColorSpace::Rgb, t, px).expect("sized buffer")
}

/// A flame anchored at its base: height, width, sway and edge tongues vary
/// smoothly with time; the yellow-white core is surrounded by an orange to
/// red fringe.
#[derive(Debug, Clone, PartialEq)]
pub struct FlameSpec {
    pub cx: f64,
    pub base_y: f64,
    pub width: f64,
    pub height: f64,
    pub seed: u64,
}

struct FlameShape {
    height: f64,
    wscale: f64,
    sway: f64,
    tongue_phase: f64,
}

const CORE_EDGE: f64 = 0.55;

impl FlameSpec {
    fn phases(&self) -> [f64; 6] {
        let mut rng = rng_for(self.seed, 1);
        [0; 6].map(|_| rng.gen_range(0.0..2.0 * PI))
    }

    fn shape(&self, t: u64) -> FlameShape {
        let ph = self.phases();
        let mut rng = rng_for(self.seed, 1000 + t);
        let tf = t as f64;
        let jitter = rng.gen_range(-1.0..1.0);
        FlameShape {
            height: self.height
                * (1.0 + 0.06 * (0.9 * tf + ph[0]).sin() + 0.04 * (2.3 * tf + ph[1]).sin() + 0.03 * jitter),
            wscale: 1.0 + 0.05 * (1.3 * tf + ph[2]).sin() + 0.03 * rng.gen_range(-1.0..1.0),
            sway: self.width * (0.3 * (0.55 * tf + ph[3]).sin() + 0.12 * (1.9 * tf + ph[4]).sin()),
            tongue_phase: 1.4 * tf + ph[5],
        }
    }

    /// Rectangle that contains the flame at every time step.
    pub fn extent(&self) -> Rect {
        let h = (self.height * 1.15).ceil();
        let w = self.width * 1.6;
        let x0 = (self.cx - w).max(0.0);
        let y0 = (self.base_y - h).max(0.0);
        Rect::new(x0 as usize, y0 as usize, (2.0 * w).ceil() as usize, (self.base_y - y0).ceil() as usize + 1)
    }

    pub fn draw(&self, frame: &mut Frame, t: u64) {
        let s = self.shape(t);
        let top = (self.base_y - s.height).floor() as isize;
        let core = |rho: f64| [255.0, 245.0 - 20.0 * rho, 190.0 - 40.0 * rho];
        for y in top..=self.base_y as isize {
            let u = (self.base_y - y as f64) / s.height;
            if !(0.0..=1.0).contains(&u) {
                continue;
            }
            let profile = (1.0 - u).powf(0.7) * ((u + 0.08) / 0.25).min(1.0);
            let tongues = 1.0 + 0.22 * (3.0 * PI * u + s.tongue_phase).sin();
            let hw = 0.5 * self.width * s.wscale * profile * tongues;
            if hw < 0.5 {
                continue;
            }
            let center = self.cx + s.sway * u * u;
            let x0 = (center - hw).floor() as isize;
            let x1 = (center + hw).ceil() as isize;
            for x in x0..=x1 {
                let rho = ((x as f64 + 0.5) - center).abs() / hw;
                if rho >= 1.0 {
                    continue;
                }
                let rgb = if rho < CORE_EDGE {
                    core(rho / CORE_EDGE)
                } else {
                    let k = (rho - CORE_EDGE) / (1.0 - CORE_EDGE);
                    lerp([255.0, 205.0, 70.0], [215.0, 70.0, 15.0], k)
                };
                put(frame, x, y, rgb);
            }
        }
    }
}

/// Filled disk with a dimmer halo ring.
pub fn draw_disk(frame: &mut Frame, cx: f64, cy: f64, radius: f64, rgb: [f64; 3], halo: f64) {
    let outer = radius + halo;
    let halo_rgb = rgb.map(|v| v * 0.75);
    for y in (cy - outer).floor() as isize..=(cy + outer).ceil() as isize {
        for x in (cx - outer).floor() as isize..=(cx + outer).ceil() as isize {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if d <= radius {
                put(frame, x, y, rgb);
            } else if d <= outer {
                put(frame, x, y, halo_rgb);
            }
        }
    }
}

/// Filled axis-aligned ellipse with a dimmer halo.
pub fn draw_ellipse(frame: &mut Frame, cx: f64, cy: f64, rx: f64, ry: f64, rgb: [f64; 3], halo: f64) {
    let halo_rgb = rgb.map(|v| v * 0.7);
    for y in (cy - ry - halo).floor() as isize..=(cy + ry + halo).ceil() as isize {
        for x in (cx - rx - halo).floor() as isize..=(cx + rx + halo).ceil() as isize {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if (dx / rx).powi(2) + (dy / ry).powi(2) <= 1.0 {
                put(frame, x, y, rgb);
            } else if (dx / (rx + halo)).powi(2) + (dy / (ry + halo)).powi(2) <= 1.0 {
                put(frame, x, y, halo_rgb);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LampSpec {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

/// Headlights crossing the scene: each pass starts at `x_start`, moves
/// `speed` px per frame and switches off at `x_end`; a new pass begins every
/// `period` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CarSpec {
    pub y: f64,
    pub rx: f64,
    pub ry: f64,
    pub speed: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub period: u64,
    pub first: u64,
}

impl CarSpec {
    pub fn position(&self, t: u64) -> Option<f64> {
        if t < self.first {
            return None;
        }
        let x = self.x_start + self.speed * ((t - self.first) % self.period) as f64;
        (x <= self.x_end).then_some(x)
    }
}

/// Scene used by the end-to-end checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub background: [f64; 3],
    pub noise: f64,
    pub flame: Option<FlameSpec>,
    pub flame_onset: u64,
    pub lamp: Option<LampSpec>,
    pub car: Option<CarSpec>,
}

impl SceneSpec {
    /// 320×240 night scene: flame from frame 60, a lamp and headlights throughout.
    pub fn standard(seed: u64) -> Self {
        SceneSpec {
            width: 320,
            height: 240,
            seed,
            background: [28.0, 26.0, 34.0],
            noise: 3.0,
            flame: Some(FlameSpec {
                cx: 90.0,
                base_y: 190.0,
                width: 38.0,
                height: 72.0,
                seed: seed.wrapping_add(11),
            }),
            flame_onset: 60,
            lamp: Some(LampSpec {
                cx: 250.0,
                cy: 50.0,
                radius: 9.0,
            }),
            car: Some(CarSpec {
                y: 218.0,
                rx: 8.0,
                ry: 5.0,
                speed: 3.0,
                x_start: 15.0,
                x_end: 300.0,
                period: 150,
                first: 5,
            }),
        }
    }

    pub fn without_flame(mut self) -> Self {
        self.flame = None;
        self
    }

    pub fn render(&self, t: u64) -> Frame {
        let mut f = noisy_background(self.width, self.height, self.background, self.noise, self.seed, t);
        if let Some(l) = &self.lamp {
            draw_disk(&mut f, l.cx, l.cy, l.radius, [255.0, 255.0, 248.0], 3.0);
        }
        if let Some(c) = &self.car {
            if let Some(x) = c.position(t) {
                draw_ellipse(&mut f, x, c.y, c.rx, c.ry, [255.0, 250.0, 232.0], 2.0);
            }
        }
        if let Some(fl) = &self.flame {
            if t >= self.flame_onset {
                fl.draw(&mut f, t);
            }
        }
        f
    }

    pub fn frames(&self, count: u64) -> impl Iterator<Item = Frame> + '_ {
        (0..count).map(move |t| self.render(t))
    }
}

/// Crops the largest bright object (intensity ≥ 220) of `frame`, grown by
/// `margin` on every side, the way the detector crops blobs.
pub fn crop_bright_object(frame: &Frame, margin: usize) -> Option<Frame> {
    let plane = intensity_plane(frame).ok()?;
    let mask = open3(&threshold_mask(&plane, frame.width(), frame.height(), 220.0));
    let blob = connected_components(&mask, 1).into_iter().next()?;
    frame.crop(blob.bbox().expand_within(margin, &frame.bounds())).ok()
}

/// Training crops of flames with random size and time step.
pub fn fire_patches(count: usize, margin: usize, seed: u64) -> Vec<Frame> {
    let mut rng = rng_for(seed, 2);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let width = rng.gen_range(26.0..50.0);
        let height = rng.gen_range(50.0..95.0);
        let w = (width * 4.0) as usize + 2 * margin;
        let h = (height * 1.3) as usize + 2 * margin;
        let flame = FlameSpec {
            cx: w as f64 / 2.0,
            base_y: h as f64 - margin as f64 - 4.0,
            width,
            height,
            seed: rng.gen(),
        };
        let base = [rng.gen_range(15.0..60.0), rng.gen_range(15.0..55.0), rng.gen_range(15.0..60.0)];
        let mut f = noisy_background(w, h, base, 3.0, rng.gen(), 0);
        flame.draw(&mut f, rng.gen_range(0..1000));
        if let Some(p) = crop_bright_object(&f, margin) {
            out.push(p.with_index(out.len() as u64));
        }
    }
    out
}

/// Training crops of bright non-fire objects: lamps, headlights and lit
/// windows in white, cool and warm tints.
pub fn nonfire_patches(count: usize, margin: usize, seed: u64) -> Vec<Frame> {
    let mut rng = rng_for(seed, 3);
    let tints = [
        [255.0, 255.0, 248.0],
        [255.0, 250.0, 232.0],
        [235.0, 245.0, 255.0],
        [225.0, 255.0, 255.0],
        [240.0, 240.0, 240.0],
    ];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let size = 60 + 2 * margin + rng.gen_range(0..30);
        let base = [rng.gen_range(15.0..60.0), rng.gen_range(15.0..55.0), rng.gen_range(15.0..60.0)];
        let mut f = noisy_background(size, size, base, 3.0, rng.gen(), 0);
        let c = size as f64 / 2.0;
        let tint = tints[rng.gen_range(0..tints.len())];
        match out.len() % 3 {
            0 => draw_disk(&mut f, c, c, rng.gen_range(5.0..16.0), tint, rng.gen_range(0.0..4.0)),
            1 => {
                let rx = rng.gen_range(6.0..18.0);
                draw_ellipse(&mut f, c, c, rx, rx * rng.gen_range(0.4..0.8), tint, rng.gen_range(0.0..3.0))
            }
            _ => {
                let (w, h) = (rng.gen_range(8..30), rng.gen_range(8..30));
                for y in 0..h {
                    for x in 0..w {
                        put(&mut f, (c as isize) - w / 2 + x, (c as isize) - h / 2 + y, tint);
                    }
                }
            }
        }
        if let Some(p) = crop_bright_object(&f, margin) {
            out.push(p.with_index(out.len() as u64));
        }
    }
    out
}

/// Uniform noise texture around `base` (RGB), amplitude `amp`.
pub fn noise_patch(width: usize, height: usize, base: [f64; 3], amp: f64, seed: u64) -> Frame {
    noisy_background(width, height, base, amp, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_is_deterministic() {
        let s = SceneSpec::standard(3);
        assert_eq!(s.render(70), s.render(70));
        assert_ne!(s.render(70), s.render(71));
    }

    #[test]
    fn flame_core_passes_top_threshold() {
        let s = SceneSpec::standard(1);
        let f = s.render(80);
        let fl = s.flame.as_ref().unwrap();
        let plane = intensity_plane(&f).unwrap();
        let bright = (0..f.height())
            .flat_map(|y| (0..f.width()).map(move |x| (x, y)))
            .filter(|&(x, y)| fl.extent().contains(x, y) && plane[y * f.width() + x] >= 220.0)
            .count();
        assert!(bright > 200, "{bright}");
    }

    #[test]
    fn car_pass_schedule() {
        let c = SceneSpec::standard(0).car.unwrap();
        assert_eq!(c.position(0), None);
        assert_eq!(c.position(5), Some(15.0));
        assert_eq!(c.position(6), Some(18.0));
        assert_eq!(c.position(5 + 95), Some(300.0));
        assert_eq!(c.position(5 + 96), None);
        assert_eq!(c.position(155), Some(15.0));
    }

    #[test]
    fn patches_have_requested_count() {
        assert_eq!(fire_patches(4, 13, 1).len(), 4);
        assert_eq!(nonfire_patches(5, 13, 1).len(), 5);
    }
}
