use std::path::PathBuf;

use pyrovision::classifier::Label;
use pyrovision::imaging::{Frame, Rect};
use pyrovision::pipeline::{
    evaluate_alarms, parse_alarm_log, parse_labels, split_train_test, train_codebook_from_patches,
    train_model_from_features, encode_patches, AlarmEvent, PipelineConfig,
};
use pyrovision::synth::noise_patch;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RED: [f64; 3] = [200.0, 40.0, 30.0];
const BLUE: [f64; 3] = [30.0, 50.0, 190.0];

fn patches(base: [f64; 3], n: usize, seed: u64) -> Vec<(PathBuf, Frame)> {
    (0..n)
        .map(|i| {
            let s = seed * 1000 + i as u64;
            (PathBuf::from(format!("p{s}")), noise_patch(40, 40, base, 25.0, s))
        })
        .collect()
}

fn config(k: usize) -> PipelineConfig {
    PipelineConfig {
        k,
        neighbors: 5,
        seed: 11,
        ..PipelineConfig::default()
    }
}

fn red_blue() -> (Vec<(PathBuf, Frame)>, Vec<Label>) {
    let all: Vec<_> = patches(RED, 20, 1).into_iter().chain(patches(BLUE, 20, 2)).collect();
    let labels = (0..40).map(|i| if i < 20 { Label::Fire } else { Label::NonFire }).collect();
    (all, labels)
}

#[test]
fn color_separated_patches_are_learned() {
    let cfg = config(20);
    let (all, labels) = red_blue();
    let frames: Vec<Frame> = all.iter().map(|p| p.1.clone()).collect();
    let cb = train_codebook_from_patches(&frames, &cfg).unwrap();
    let features = encode_patches(&all, &cfg.plan, &cb.codebook, cfg.neighbors).unwrap();
    let trained = train_model_from_features(&features, &labels, &cfg).unwrap();
    assert_eq!(trained.test_count, 8);
    assert_eq!(trained.held_out_accuracy, 1.0);
}

#[test]
fn shuffled_labels_do_not_generalise() {
    let cfg = config(20);
    // one color only, so nothing but noise separates the classes
    let all: Vec<_> = patches(RED, 40, 3);
    let frames: Vec<Frame> = all.iter().map(|p| p.1.clone()).collect();
    let cb = train_codebook_from_patches(&frames, &cfg).unwrap();
    let features = encode_patches(&all, &cfg.plan, &cb.codebook, cfg.neighbors).unwrap();
    let mut labels: Vec<Label> = (0..40).map(|i| if i < 20 { Label::Fire } else { Label::NonFire }).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let trained = train_model_from_features(&features, &labels, &cfg).unwrap();
    assert!(trained.held_out_accuracy <= 0.65, "held-out {}", trained.held_out_accuracy);
}

#[test]
fn split_is_reproducible_and_disjoint() {
    let labels: Vec<Label> = (0..57).map(|i| if i % 3 == 0 { Label::Fire } else { Label::NonFire }).collect();
    let (a_train, a_test) = split_train_test(&labels, 9);
    let (b_train, b_test) = split_train_test(&labels, 9);
    assert_eq!((&a_train, &a_test), (&b_train, &b_test));
    let mut all: Vec<usize> = a_train.iter().chain(&a_test).copied().collect();
    all.sort();
    assert_eq!(all, (0..57).collect::<Vec<_>>());
    let (_, other) = split_train_test(&labels, 10);
    assert_ne!(a_test, other);
}

#[test]
fn kmeans_sse_never_increases() {
    let cfg = PipelineConfig {
        kmeans_iterations: 30,
        ..config(10)
    };
    let frames: Vec<Frame> = patches(RED, 5, 7).into_iter().chain(patches(BLUE, 5, 8)).map(|p| p.1).collect();
    let r = train_codebook_from_patches(&frames, &cfg).unwrap();
    assert!(!r.report.sse_trace.is_empty());
    for w in r.report.sse_trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "sse rose from {} to {}", w[0], w[1]);
    }
    assert!(r.report.final_sse <= r.report.sse_trace[0]);
}

#[test]
fn codebook_bytes_are_reproducible() {
    let cfg = config(16);
    let frames: Vec<Frame> = patches(RED, 6, 4).into_iter().chain(patches(BLUE, 6, 5)).map(|p| p.1).collect();
    let a = train_codebook_from_patches(&frames, &cfg).unwrap().codebook.to_bytes();
    let b = train_codebook_from_patches(&frames, &cfg).unwrap().codebook.to_bytes();
    assert_eq!(a, b);
    let other = train_codebook_from_patches(&frames, &PipelineConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a, other.codebook.to_bytes());
}

#[test]
fn evaluation_of_saved_log_is_reproducible() {
    let labels = parse_labels("a 0 200 fire\na 200 400 nofire\nb 0 200 nofire\nb 200 300 fire\n").unwrap();
    let alarms = vec![
        AlarmEvent {
            video_id: "a".into(),
            frame: 84,
            track_id: 1,
            bbox: Rect::new(60, 110, 41, 83),
            margin: 0.731_234_5,
        },
        AlarmEvent {
            video_id: "b".into(),
            frame: 150,
            track_id: 4,
            bbox: Rect::new(1, 2, 3, 4),
            margin: 1.0 / 3.0,
        },
    ];
    let log: String = alarms.iter().map(|a| a.log_line() + "\n").collect();
    let parsed = parse_alarm_log(&log).unwrap();
    assert_eq!(parsed, alarms);
    let r1 = evaluate_alarms(&parsed, &labels).unwrap();
    let r2 = evaluate_alarms(&parse_alarm_log(&log).unwrap(), &labels).unwrap();
    assert_eq!((r1.tp, r1.tn, r1.fp, r1.fn_), (1, 1, 1, 1));
    assert_eq!(r1.table(), r2.table());
    assert_eq!(r1.verdict_lines(), r2.verdict_lines());
}
