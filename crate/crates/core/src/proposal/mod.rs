//! Candidate fire regions: bright pixels, optionally restricted to the
//! foreground of a background model, cleaned and split into blobs.

mod background;
mod blob;
mod threshold;

pub use background::{update_background, BackgroundModel, BackgroundParams};
pub use blob::{connected_components, dilate3, erode3, open3, Blob};
pub use threshold::{threshold_mask, IntensityWindow, ThresholdLadder};

use crate::error::{Error, Result};
use crate::imaging::{luma, ColorSpace, Frame, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraMode {
    Static,
    Moving,
}

impl CameraMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Some(CameraMode::Static),
            "moving" => Some(CameraMode::Moving),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraMode::Static => "static",
            CameraMode::Moving => "moving",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskMethod {
    BgSubtraction,
    MultiLevelThreshold,
    Intersection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMask {
    pub mask: Mask,
    pub frame_index: u64,
    pub method: MaskMethod,
}

/// Intensity per pixel: BT.601 luma for RGB, the value itself for gray.
pub fn intensity_plane(frame: &Frame) -> Result<Vec<f64>> {
    match frame.space() {
        ColorSpace::Rgb => Ok(frame
            .pixels()
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect()),
        ColorSpace::Gray => Ok(frame.pixels().to_vec()),
        other => Err(Error::UnsupportedSource(other)),
    }
}

fn mean(plane: &[f64]) -> f64 {
    if plane.is_empty() {
        0.0
    } else {
        plane.iter().sum::<f64>() / plane.len() as f64
    }
}

/// Thresholds `frame` at the ladder rung picked from the window statistics.
pub fn multi_level_threshold(
    frame: &Frame,
    window: &IntensityWindow,
    ladder: &ThresholdLadder,
) -> Result<CandidateMask> {
    let plane = intensity_plane(frame)?;
    let q = window
        .quantile()
        .ok_or_else(|| Error::InsufficientData("intensity window is empty".into()))?;
    Ok(CandidateMask {
        mask: threshold_mask(&plane, frame.width(), frame.height(), ladder.select(q)),
        frame_index: frame.index(),
        method: MaskMethod::MultiLevelThreshold,
    })
}

/// Default minimum blob area: 64 px² at 320×240, scaled with the pixel count.
pub fn default_min_blob_area(width: usize, height: usize) -> usize {
    ((64.0 * (width * height) as f64 / (320.0 * 240.0)).round() as usize).max(1)
}

/// Debug dump name for a frame's candidate mask.
pub fn mask_filename(frame_index: u64) -> String {
    format!("mask_{frame_index:06}.pbm")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalConfig {
    pub camera: CameraMode,
    pub ladder: ThresholdLadder,
    pub background: BackgroundParams,
    /// `None` scales the 64 px² default to the frame size.
    pub min_blob_area: Option<usize>,
    /// Frames of intensity statistics behind the threshold choice.
    pub stats_window: usize,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            camera: CameraMode::Static,
            ladder: ThresholdLadder::default(),
            background: BackgroundParams::default(),
            min_blob_area: None,
            stats_window: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Proposal {
    /// Cleaned mask the blobs were extracted from.
    pub mask: CandidateMask,
    pub threshold: f64,
    pub blobs: Vec<Blob>,
}

/// One proposal step. With a background model the candidate mask is the
/// foreground AND the threshold mask; without, the threshold mask alone.
/// `window` receives the frame's mean intensity before the threshold is chosen.
pub fn propose(
    frame: &Frame,
    background: Option<&mut BackgroundModel>,
    window: &mut IntensityWindow,
    config: &ProposalConfig,
) -> Result<Proposal> {
    let plane = intensity_plane(frame)?;
    let (w, h) = (frame.width(), frame.height());
    window.push(mean(&plane));
    let threshold = config.ladder.select(window.quantile().unwrap_or(0.0));
    let bright = threshold_mask(&plane, w, h, threshold);
    let (raw, method) = match background {
        Some(model) => {
            if model.width() != w || model.height() != h {
                return Err(Error::DimensionMismatch {
                    expected: model.width() * model.height(),
                    actual: w * h,
                });
            }
            let fg = model.update_plane(&plane)?;
            (fg.and(&bright)?, MaskMethod::Intersection)
        }
        None => (bright, MaskMethod::MultiLevelThreshold),
    };
    let cleaned = open3(&raw);
    let min_area = config.min_blob_area.unwrap_or_else(|| default_min_blob_area(w, h));
    let blobs = connected_components(&cleaned, min_area);
    Ok(Proposal {
        mask: CandidateMask {
            mask: cleaned,
            frame_index: frame.index(),
            method,
        },
        threshold,
        blobs,
    })
}

/// Per-stream proposal state.
#[derive(Debug, Clone)]
pub struct Proposer {
    config: ProposalConfig,
    background: Option<BackgroundModel>,
    window: IntensityWindow,
}

impl Proposer {
    pub fn new(config: ProposalConfig) -> Result<Self> {
        config.background.validate()?;
        let window = IntensityWindow::new(config.stats_window);
        Ok(Proposer {
            config,
            background: None,
            window,
        })
    }

    pub fn config(&self) -> &ProposalConfig {
        &self.config
    }

    pub fn background(&self) -> Option<&BackgroundModel> {
        self.background.as_ref()
    }

    pub fn process(&mut self, frame: &Frame) -> Result<Proposal> {
        if self.config.camera == CameraMode::Static && self.background.is_none() {
            self.background = Some(BackgroundModel::new(
                frame.width(),
                frame.height(),
                self.config.background,
            )?);
        }
        propose(frame, self.background.as_mut(), &mut self.window, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Rect;

    fn scene(w: usize, h: usize, bg: f64, patches: &[(Rect, f64)]) -> Frame {
        let mut f = Frame::filled(w, h, ColorSpace::Gray, 0, &[bg]).unwrap();
        for (r, v) in patches {
            for y in r.y..r.bottom() {
                for x in r.x..r.right() {
                    f.pixel_mut(x, y)[0] = *v;
                }
            }
        }
        f
    }

    #[test]
    fn saturated_patch_on_gray() {
        let patch = Rect::new(12, 7, 9, 6);
        let f = scene(48, 32, 128.0, &[(patch, 255.0)]);
        let mut w = IntensityWindow::new(5);
        w.push(128.0);
        let m = multi_level_threshold(&f, &w, &ThresholdLadder::default()).unwrap();
        for y in 0..32 {
            for x in 0..48 {
                assert_eq!(m.mask.get(x, y), patch.contains(x, y));
            }
        }
        assert!(multi_level_threshold(&f, &IntensityWindow::new(5), &ThresholdLadder::default()).is_err());
    }

    #[test]
    fn moving_camera_two_squares() {
        let f = scene(
            64,
            48,
            20.0,
            &[(Rect::new(5, 5, 10, 10), 250.0), (Rect::new(40, 30, 10, 5), 250.0)],
        );
        let cfg = ProposalConfig {
            camera: CameraMode::Moving,
            min_blob_area: Some(30),
            ..Default::default()
        };
        let mut p = Proposer::new(cfg).unwrap();
        let out = p.process(&f).unwrap();
        let areas: Vec<usize> = out.blobs.iter().map(Blob::area).collect();
        assert_eq!(areas, vec![100, 50]);
        assert_eq!(out.mask.method, MaskMethod::MultiLevelThreshold);
    }

    #[test]
    fn empty_scene_has_no_blobs() {
        let mut p = Proposer::new(ProposalConfig::default()).unwrap();
        for _ in 0..30 {
            assert!(p.process(&scene(32, 32, 0.0, &[])).unwrap().blobs.is_empty());
        }
    }

    #[test]
    fn default_area_scales() {
        assert_eq!(default_min_blob_area(320, 240), 64);
        assert_eq!(default_min_blob_area(640, 480), 256);
        assert_eq!(default_min_blob_area(1, 1), 1);
        assert_eq!(mask_filename(42), "mask_000042.pbm");
    }
}
