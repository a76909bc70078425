use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imaging::Mask;

/// Strictly descending intensity thresholds `T_1 > … > T_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdLadder {
    rungs: Vec<f64>,
}

impl Default for ThresholdLadder {
    fn default() -> Self {
        ThresholdLadder {
            rungs: vec![220.0, 190.0, 160.0],
        }
    }
}

impl ThresholdLadder {
    pub fn new(rungs: Vec<f64>) -> Result<Self> {
        if rungs.is_empty() {
            return Err(Error::InvalidParameter("threshold ladder is empty".into()));
        }
        if rungs.iter().any(|r| !r.is_finite()) || rungs.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "threshold ladder {rungs:?} must be strictly descending"
            )));
        }
        Ok(ThresholdLadder { rungs })
    }

    pub fn rungs(&self) -> &[f64] {
        &self.rungs
    }

    /// `T_1 − (T_1 − T_L)·q` snapped to the nearest rung (the higher one on a tie).
    pub fn select(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let first = self.rungs[0];
        let last = *self.rungs.last().unwrap();
        let t = first - (first - last) * q;
        let mut best = first;
        for &r in &self.rungs {
            if (r - t).abs() < (best - t).abs() {
                best = r;
            }
        }
        best
    }
}

/// Mean frame intensities of the most recent frames.
#[derive(Debug, Clone)]
pub struct IntensityWindow {
    capacity: usize,
    means: VecDeque<f64>,
}

impl IntensityWindow {
    pub fn new(capacity: usize) -> Self {
        IntensityWindow {
            capacity: capacity.max(1),
            means: VecDeque::new(),
        }
    }

    pub fn push(&mut self, mean_intensity: f64) {
        if self.means.len() == self.capacity {
            self.means.pop_front();
        }
        self.means.push_back(mean_intensity);
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Mean intensity over the window scaled to `[0, 1]`.
    pub fn quantile(&self) -> Option<f64> {
        if self.means.is_empty() {
            return None;
        }
        let m = self.means.iter().sum::<f64>() / self.means.len() as f64;
        Some((m / 255.0).clamp(0.0, 1.0))
    }
}

/// Pixels with intensity `>= threshold`.
pub fn threshold_mask(plane: &[f64], width: usize, height: usize, threshold: f64) -> Mask {
    let bits = plane.iter().map(|&v| v >= threshold).collect();
    Mask::from_bits(width, height, bits).expect("plane matches dimensions")
}
