use super::intensity_plane;
use crate::error::{Error, Result};
use crate::imaging::{Frame, Mask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundParams {
    /// Learning rate ρ once past the first `1/ρ` frames.
    pub rate: f64,
    /// Foreground threshold in standard deviations.
    pub lambda: f64,
    /// Lower bound on the standard deviation used by the foreground test.
    pub var_floor: f64,
    /// Frames absorbed before any foreground is reported.
    pub warmup: usize,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        BackgroundParams {
            rate: 0.01,
            lambda: 2.5,
            var_floor: 4.0,
            warmup: 25,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidParameter(format!("background rate {} not in (0, 1]", self.rate)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda {} must be > 0", self.lambda)));
        }
        if !(self.var_floor >= 0.0 && self.var_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!("var_floor {} must be >= 0", self.var_floor)));
        }
        Ok(())
    }
}

/// Per-pixel running Gaussian over intensity.
///
/// The `t`-th absorbed frame is blended with rate `max(ρ, 1/t)`, so the
/// mean is the plain average of the first `1/ρ` frames and an exponential
/// average afterwards.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    params: BackgroundParams,
    mean: Vec<f64>,
    var: Vec<f64>,
    frames: usize,
}

impl BackgroundModel {
    pub fn new(width: usize, height: usize, params: BackgroundParams) -> Result<Self> {
        params.validate()?;
        Ok(BackgroundModel {
            width,
            height,
            params,
            mean: vec![0.0; width * height],
            var: vec![0.0; width * height],
            frames: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn params(&self) -> &BackgroundParams {
        &self.params
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.var
    }

    pub fn frames_absorbed(&self) -> usize {
        self.frames
    }

    pub fn warmed_up(&self) -> bool {
        self.frames >= self.params.warmup
    }

    /// Classifies `frame` against the model, then absorbs it. During warm-up
    /// every pixel is absorbed and the mask is empty; afterwards only
    /// background pixels are.
    pub fn update(&mut self, frame: &Frame) -> Result<Mask> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected: self.width * self.height,
                actual: frame.width() * frame.height(),
            });
        }
        let plane = intensity_plane(frame)?;
        self.update_plane(&plane)
    }

    pub(crate) fn update_plane(&mut self, plane: &[f64]) -> Result<Mask> {
        let mut mask = Mask::new(self.width, self.height);
        if self.frames == 0 {
            self.mean.copy_from_slice(plane);
            self.var.iter_mut().for_each(|v| *v = 0.0);
            self.frames = 1;
            return Ok(mask);
        }
        let classify = self.warmed_up();
        let r = self.params.rate.max(1.0 / (self.frames + 1) as f64);
        let floor = self.params.var_floor;
        let lambda = self.params.lambda;
        let bits = mask.bits_mut();
        for i in 0..plane.len() {
            let d = plane[i] - self.mean[i];
            if classify && d.abs() > lambda * self.var[i].sqrt().max(floor) {
                bits[i] = true;
                continue;
            }
            self.mean[i] += r * d;
            self.var[i] = (1.0 - r) * self.var[i] + r * d * d;
        }
        self.frames += 1;
        Ok(mask)
    }
}

pub fn update_background(model: &mut BackgroundModel, frame: &Frame) -> Result<Mask> {
    model.update(frame)
}
