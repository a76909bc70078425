use proptest::prelude::*;
use pyrovision::imaging::{ColorSpace, Frame, Mask, Rect};
use pyrovision::proposal::{
    connected_components, open3, threshold_mask, BackgroundModel, BackgroundParams, Blob,
};
use pyrovision::temporal::{
    spatial_distribution, ShapeSample, Stability, StabilityThresholds, Tracker, TrackerParams,
    WindowStats, WINDOW,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mask_strategy() -> impl Strategy<Value = Mask> {
    (1usize..30, 1usize..30, 0.0f64..1.0).prop_flat_map(|(w, h, density)| {
        proptest::collection::vec(0.0f64..1.0, w * h)
            .prop_map(move |v| Mask::from_bits(w, h, v.iter().map(|&x| x < density).collect()).unwrap())
    })
}

/// Independent 8-connected flood fill over the blob's own pixels.
fn is_connected(pixels: &[(usize, usize)]) -> bool {
    let set: std::collections::HashSet<_> = pixels.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![pixels[0]];
    while let Some((x, y)) = stack.pop() {
        if !seen.insert((x, y)) {
            continue;
        }
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let n = (x as i64 + dx, y as i64 + dy);
                if n.0 >= 0 && n.1 >= 0 && set.contains(&(n.0 as usize, n.1 as usize)) {
                    stack.push((n.0 as usize, n.1 as usize));
                }
            }
        }
    }
    seen.len() == set.len()
}

fn random_blob(rng: &mut ChaCha8Rng) -> Blob {
    let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
    let mut bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.7)).collect();
    bits[0] = true;
    let mask = Mask::from_bits(w, h, bits).unwrap();
    connected_components(&mask, 1).swap_remove(0)
}

fn square(x: usize, y: usize, side: usize) -> Blob {
    let px: Vec<_> = (0..side * side).map(|i| (x + i % side, y + i / side)).collect();
    Blob::from_pixels(&px).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_is_monotone(plane in proptest::collection::vec(0.0f64..255.0, 60), a in 0.0f64..255.0, b in 0.0f64..255.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let m_lo = threshold_mask(&plane, 10, 6, lo);
        let m_hi = threshold_mask(&plane, 10, 6, hi);
        prop_assert!(m_hi.bits().iter().zip(m_lo.bits()).all(|(h, l)| !h || *l));
    }

    #[test]
    fn components_partition_the_mask(mask in mask_strategy()) {
        let blobs = connected_components(&mask, 1);
        prop_assert_eq!(blobs.iter().map(|b| b.area()).sum::<usize>(), mask.count());
        let mut owner = vec![usize::MAX; mask.width() * mask.height()];
        for (i, b) in blobs.iter().enumerate() {
            for (x, y) in b.pixels() {
                prop_assert!(mask.get(x, y));
                prop_assert_eq!(owner[y * mask.width() + x], usize::MAX);
                owner[y * mask.width() + x] = i;
            }
        }
        for w in blobs.windows(2) {
            prop_assert!(w[0].area() >= w[1].area());
        }
    }

    #[test]
    fn blob_invariants(mask in mask_strategy(), min_area in 1usize..6) {
        for b in connected_components(&open3(&mask), min_area) {
            let px = b.pixels();
            prop_assert!(b.area() >= min_area);
            prop_assert_eq!(px.len(), b.area());
            prop_assert!(b.perimeter() > 0.0);
            prop_assert!(is_connected(&px));
            let bb = b.bbox();
            prop_assert_eq!(bb.x, px.iter().map(|p| p.0).min().unwrap());
            prop_assert_eq!(bb.y, px.iter().map(|p| p.1).min().unwrap());
            prop_assert_eq!(bb.right(), px.iter().map(|p| p.0).max().unwrap() + 1);
            prop_assert_eq!(bb.bottom(), px.iter().map(|p| p.1).max().unwrap() + 1);
        }
    }

    #[test]
    fn opening_shrinks(mask in mask_strategy()) {
        let opened = open3(&mask);
        prop_assert!(opened.bits().iter().zip(mask.bits()).all(|(o, m)| !o || *m));
    }

    #[test]
    fn quadrants_sum_to_area(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_blob(&mut rng);
        prop_assert_eq!(spatial_distribution(&b).iter().sum::<usize>(), b.area());
    }

    #[test]
    fn one_and_two_pass_statistics_agree(seed in any::<u64>(), n in 1usize..=WINDOW) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<ShapeSample> = (0..n).map(|_| ShapeSample::of(&random_blob(&mut rng))).collect();
        let a = WindowStats::compute(&samples).unwrap();
        let b = WindowStats::compute_one_pass(&samples).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
        prop_assert!(close(a.mu_p, b.mu_p) && close(a.mu_a, b.mu_a));
        // variance cancellation in the single pass is absolute, not relative
        let scale = a.mu_a.max(a.mu_p);
        let close_sd = |x: f64, y: f64| (x - y).abs() <= 1e-6 * scale.max(1.0);
        prop_assert!(close_sd(a.sigma_p, b.sigma_p) && close_sd(a.sigma_a, b.sigma_a) && close_sd(a.sigma_d, b.sigma_d));
    }

    #[test]
    fn square_statistics_scale(sides in proptest::collection::vec(6usize..20, WINDOW)) {
        let t = StabilityThresholds::default();
        let one: Vec<ShapeSample> = sides.iter().map(|&s| ShapeSample::of(&square(0, 0, s))).collect();
        let two: Vec<ShapeSample> = sides.iter().map(|&s| ShapeSample::of(&square(0, 0, 2 * s))).collect();
        let (a, b) = (WindowStats::compute(&one).unwrap(), WindowStats::compute(&two).unwrap());
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(1.0);
        prop_assert!(close(b.mu_a, 4.0 * a.mu_a));
        prop_assert!(close(b.sigma_a, 4.0 * a.sigma_a));
        prop_assert!(close(b.mu_p, 2.0 * a.mu_p));
        prop_assert!(close(b.sigma_p, 2.0 * a.sigma_p));
        prop_assert_eq!(a.classify(&t), b.classify(&t));
    }

    #[test]
    fn classification_is_exhaustive(mu_p in 1.0f64..100.0, mu_a in 1.0f64..500.0, rp in 0.0f64..1.0, ra in 0.0f64..1.0, rd in 0.0f64..1.0) {
        let s = WindowStats { mu_p, mu_a, sigma_p: rp * mu_p, sigma_a: ra * mu_a, sigma_d: rd * mu_a };
        let t = StabilityThresholds::default();
        let expected = if rp < 0.15 && ra < 0.15 && rd < 0.15 {
            Stability::Stable
        } else if rp > 0.40 || ra > 0.40 || rd > 0.40 {
            Stability::Unstable
        } else {
            Stability::Undecided
        };
        prop_assert_eq!(s.classify(&t), expected);
    }
}

#[test]
fn drifting_blob_keeps_one_track() {
    let mut tracker = Tracker::new(TrackerParams::default());
    let mut ids = std::collections::HashSet::new();
    for f in 0..WINDOW as u64 {
        let u = tracker.update(f, &[square(10 + 2 * f as usize, 40, 20)], true);
        ids.insert(u.assignments[0].expect("blob is tracked"));
    }
    assert_eq!(ids.len(), 1);
    assert_eq!(tracker.active().len(), 1);
    assert_eq!(tracker.active()[0].frames_observed(), WINDOW);
}

#[test]
fn tracking_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut tracker = Tracker::new(TrackerParams::default());
        let mut log = Vec::new();
        for f in 0..60u64 {
            let blobs: Vec<Blob> = (0..rng.gen_range(0..4))
                .map(|i| square(10 + 40 * i + rng.gen_range(0..3), 20 + rng.gen_range(0..3), rng.gen_range(5..15)))
                .collect();
            log.push(tracker.update(f, &blobs, true));
        }
        log
    };
    assert_eq!(run(), run());
}

#[test]
fn background_converges_under_noise() {
    let (w, h) = (40, 30);
    let sigma = 5.0;
    let half = sigma * 3f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let base: Vec<f64> = (0..w * h).map(|_| rng.gen_range(40.0..200.0)).collect();
    let mut model = BackgroundModel::new(w, h, BackgroundParams::default()).unwrap();
    for i in 0..100 {
        let px = base.iter().map(|b| b + rng.gen_range(-half..half)).collect();
        let f = Frame::new(w, h, ColorSpace::Gray, i, px).unwrap();
        model.update(&f).unwrap();
    }
    let close = model
        .mean()
        .iter()
        .zip(&base)
        .filter(|(m, b)| (*m - *b).abs() <= 2.0 * sigma / 10.0)
        .count();
    assert!(close as f64 >= 0.9 * (w * h) as f64, "{close} of {} pixels converged", w * h);
}

#[test]
fn component_bbox_is_tight_on_known_shapes() {
    let mut m = Mask::new(20, 12);
    for (x, y) in [(2, 2), (3, 3), (4, 4), (10, 1), (11, 1), (12, 1), (15, 10)] {
        m.set(x, y, true);
    }
    // equal areas keep raster order of their first pixel
    let blobs = connected_components(&m, 1);
    let boxes: Vec<Rect> = blobs.iter().map(|b| b.bbox()).collect();
    assert_eq!(boxes, vec![Rect::new(10, 1, 3, 1), Rect::new(2, 2, 3, 3), Rect::new(15, 10, 1, 1)]);
}
