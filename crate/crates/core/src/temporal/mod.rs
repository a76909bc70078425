//! Blob tracking and shape-variation verification.
//!
//! Every track keeps the perimeter, area and quadrant counts of its last 25
//! observations. Rigid bright objects barely change (stable), transient
//! ones change wildly (unstable); flames sit in between.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::imaging::Rect;
use crate::proposal::Blob;

/// Observations per stability window.
pub const WINDOW: usize = 25;

/// Pixel counts of a blob in the four quadrants of its bounding box:
/// top-left, top-right, bottom-left, bottom-right. With an odd width or
/// height the extra column or row belongs to the right or bottom quadrants.
pub fn spatial_distribution(blob: &Blob) -> [usize; 4] {
    let m = blob.local_mask();
    let (hw, hh) = (m.width() / 2, m.height() / 2);
    let mut d = [0; 4];
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.get(x, y) {
                d[usize::from(x >= hw) + 2 * usize::from(y >= hh)] += 1;
            }
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeSample {
    pub perimeter: f64,
    pub area: f64,
    pub quadrants: [f64; 4],
}

impl ShapeSample {
    pub fn of(blob: &Blob) -> Self {
        let d = spatial_distribution(blob);
        ShapeSample {
            perimeter: blob.perimeter(),
            area: blob.area() as f64,
            quadrants: d.map(|v| v as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Indoor,
    Outdoor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityThresholds {
    pub t1: f64,
    pub t2: f64,
    /// Use `σ_a < t2·μ_a` as the area clause of the instability test
    /// instead of `σ_a > t2·μ_a`.
    pub eq6_literal: bool,
}

impl StabilityThresholds {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1 > 0.0 && t1 < t2 && t2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "stability thresholds need 0 < t1 < t2, got t1={t1} t2={t2}"
            )));
        }
        Ok(StabilityThresholds {
            t1,
            t2,
            eq6_literal: false,
        })
    }

    pub fn preset(preset: Preset) -> Self {
        let (t1, t2) = match preset {
            Preset::Indoor => (0.15, 0.40),
            Preset::Outdoor => (0.25, 0.60),
        };
        StabilityThresholds {
            t1,
            t2,
            eq6_literal: false,
        }
    }
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        StabilityThresholds::preset(Preset::Indoor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
    Undecided,
}

/// Population statistics over a window of shape samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mu_p: f64,
    pub mu_a: f64,
    pub sigma_p: f64,
    pub sigma_a: f64,
    /// Sum of the four quadrant standard deviations.
    pub sigma_d: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl WindowStats {
    /// Two-pass computation; `None` for an empty window.
    pub fn compute(samples: &[ShapeSample]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let (mu_p, sigma_p) = mean_std(samples.iter().map(|s| s.perimeter));
        let (mu_a, sigma_a) = mean_std(samples.iter().map(|s| s.area));
        let sigma_d = (0..4)
            .map(|q| mean_std(samples.iter().map(move |s| s.quadrants[q])).1)
            .sum();
        Some(WindowStats {
            mu_p,
            mu_a,
            sigma_p,
            sigma_a,
            sigma_d,
        })
    }

    /// Single pass over running sums of values and squares.
    pub fn compute_one_pass(samples: &[ShapeSample]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mut s = [0.0; 6];
        let mut sq = [0.0; 6];
        for x in samples {
            let v = [x.perimeter, x.area, x.quadrants[0], x.quadrants[1], x.quadrants[2], x.quadrants[3]];
            for i in 0..6 {
                s[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        }
        let std = |i: usize| (sq[i] / n - (s[i] / n).powi(2)).max(0.0).sqrt();
        Some(WindowStats {
            mu_p: s[0] / n,
            mu_a: s[1] / n,
            sigma_p: std(0),
            sigma_a: std(1),
            sigma_d: (2..6).map(std).sum(),
        })
    }

    pub fn classify(&self, t: &StabilityThresholds) -> Stability {
        let stable = self.sigma_p < t.t1 * self.mu_p
            && self.sigma_a < t.t1 * self.mu_a
            && self.sigma_d < t.t1 * self.mu_a;
        if stable {
            return Stability::Stable;
        }
        let area_clause = if t.eq6_literal {
            self.sigma_a < t.t2 * self.mu_a
        } else {
            self.sigma_a > t.t2 * self.mu_a
        };
        if self.sigma_p > t.t2 * self.mu_p || area_clause || self.sigma_d > t.t2 * self.mu_a {
            Stability::Unstable
        } else {
            Stability::Undecided
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    Pending,
    FireConfirmed,
    Rejected,
}

impl TrackState {
    pub fn name(self) -> &'static str {
        match self {
            TrackState::Pending => "PENDING",
            TrackState::FireConfirmed => "FIRE_CONFIRMED",
            TrackState::Rejected => "REJECTED",
        }
    }
}

impl fmt::Display for TrackState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobTrack {
    id: u64,
    buffer: VecDeque<ShapeSample>,
    frames_observed: usize,
    first_seen: u64,
    last_seen: u64,
    bbox: Rect,
    state: TrackState,
    closed: bool,
}

impl BlobTrack {
    fn spawn(id: u64, frame: u64, blob: &Blob) -> Self {
        let mut t = BlobTrack {
            id,
            buffer: VecDeque::with_capacity(WINDOW),
            frames_observed: 0,
            first_seen: frame,
            last_seen: frame,
            bbox: blob.bbox(),
            state: TrackState::Pending,
            closed: false,
        };
        t.observe(frame, blob);
        t
    }

    fn observe(&mut self, frame: u64, blob: &Blob) {
        if self.buffer.len() == WINDOW {
            self.buffer.pop_front();
        }
        self.buffer.push_back(ShapeSample::of(blob));
        self.frames_observed += 1;
        self.last_seen = frame;
        self.bbox = blob.bbox();
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn samples(&self) -> Vec<ShapeSample> {
        self.buffer.iter().copied().collect()
    }

    pub fn latest(&self) -> Option<&ShapeSample> {
        self.buffer.back()
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == WINDOW
    }

    pub fn frames_observed(&self) -> usize {
        self.frames_observed
    }

    pub fn first_seen(&self) -> u64 {
        self.first_seen
    }

    pub fn last_seen(&self) -> u64 {
        self.last_seen
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn state(&self) -> TrackState {
        self.state
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn stats(&self) -> Option<WindowStats> {
        WindowStats::compute(&self.samples())
    }

    /// `frame track_id state perimeter area d1 d2 d3 d4`.
    pub fn log_line(&self, frame: u64) -> String {
        let s = self.latest().expect("tracks are spawned with a sample");
        format!(
            "{frame} {} {} {} {} {} {} {} {}",
            self.id,
            self.state,
            s.perimeter,
            s.area,
            s.quadrants[0],
            s.quadrants[1],
            s.quadrants[2],
            s.quadrants[3]
        )
    }
}

/// Stability of a track's window; undecided until the window is full.
pub fn stability(track: &BlobTrack, thresholds: &StabilityThresholds) -> Stability {
    if !track.is_full() {
        return Stability::Undecided;
    }
    track
        .stats()
        .map_or(Stability::Undecided, |s| s.classify(thresholds))
}

/// Decision for a pending track with a full window: stable and unstable
/// shapes are rejected, moderate persistent variation is fire.
pub fn verdict(stability: Stability) -> TrackState {
    match stability {
        Stability::Stable | Stability::Unstable => TrackState::Rejected,
        Stability::Undecided => TrackState::FireConfirmed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    pub thresholds: StabilityThresholds,
    pub iou_threshold: f64,
    /// A track unseen for this many consecutive frames is closed.
    pub max_missed: u64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            thresholds: StabilityThresholds::default(),
            iou_threshold: 0.3,
            max_missed: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameUpdate {
    /// Track id per input blob, `None` when the blob was not tracked.
    pub assignments: Vec<Option<u64>>,
    /// Tracks that reached FIRE_CONFIRMED on this frame.
    pub confirmed: Vec<u64>,
    /// Tracks closed on this frame.
    pub closed: Vec<u64>,
}

/// Greedy IoU association and per-track verdicts for one stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    active: Vec<BlobTrack>,
    finished: Vec<BlobTrack>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Tracker {
            params,
            active: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
        }
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn active(&self) -> &[BlobTrack] {
        &self.active
    }

    pub fn finished(&self) -> &[BlobTrack] {
        &self.finished
    }

    pub fn track(&self, id: u64) -> Option<&BlobTrack> {
        self.active.iter().chain(&self.finished).find(|t| t.id == id)
    }

    /// Matches `blobs` to live tracks by bounding-box IoU, highest first.
    /// Unmatched blobs start new tracks only when `allow_spawn` is set.
    pub fn update(&mut self, frame: u64, blobs: &[Blob], allow_spawn: bool) -> FrameUpdate {
        let mut pairs = Vec::new();
        for (ti, t) in self.active.iter().enumerate() {
            for (bi, b) in blobs.iter().enumerate() {
                let iou = t.bbox.iou(&b.bbox());
                if iou >= self.params.iou_threshold {
                    pairs.push((iou, ti, bi));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut track_used = vec![false; self.active.len()];
        let mut out = FrameUpdate {
            assignments: vec![None; blobs.len()],
            ..Default::default()
        };
        for (_, ti, bi) in pairs {
            if track_used[ti] || out.assignments[bi].is_some() {
                continue;
            }
            track_used[ti] = true;
            let t = &mut self.active[ti];
            t.observe(frame, &blobs[bi]);
            out.assignments[bi] = Some(t.id);
            if t.state == TrackState::Pending && t.is_full() {
                t.state = verdict(stability(t, &self.params.thresholds));
                if t.state == TrackState::FireConfirmed {
                    out.confirmed.push(t.id);
                }
            }
        }
        if allow_spawn {
            for (bi, b) in blobs.iter().enumerate() {
                if out.assignments[bi].is_none() {
                    let t = BlobTrack::spawn(self.next_id, frame, b);
                    out.assignments[bi] = Some(t.id);
                    self.next_id += 1;
                    self.active.push(t);
                }
            }
        }
        let max_missed = self.params.max_missed;
        let (gone, alive): (Vec<BlobTrack>, Vec<BlobTrack>) = self
            .active
            .drain(..)
            .partition(|t| frame.saturating_sub(t.last_seen) >= max_missed);
        self.active = alive;
        for mut t in gone {
            if t.state == TrackState::Pending {
                t.state = TrackState::Rejected;
            }
            t.closed = true;
            out.closed.push(t.id);
            self.finished.push(t);
        }
        out
    }
}
