use std::collections::HashMap;
use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::PipelineConfig;
use crate::classifier::{Label, Prediction, TrainedModel};
use crate::codebook::{encode, BlobFeature, Codebook, EncoderParams, NNIndex};
use crate::error::{Error, Result};
use crate::features::{global_histogram, sample, FeatureSource, SamplingPlan, GLOBAL_DIM};
use crate::imaging::{ColorSpace, Frame, Rect};
use crate::proposal::{Blob, CandidateMask, Proposer};
use crate::temporal::Tracker;

/// Encodes an RGB patch: descriptors at every valid position of the patch
/// plus the global LAB histogram of the whole patch. `None` when no
/// descriptor fits.
pub fn encode_patch(
    patch: &Frame,
    plan: &SamplingPlan,
    index: &NNIndex,
    params: &EncoderParams,
) -> Result<Option<BlobFeature>> {
    let source = FeatureSource::new(patch)?;
    let descriptors = match sample(&source, plan, None, None) {
        Ok(d) => d,
        Err(Error::NoSamplePositions) => return Ok(None),
        Err(e) => return Err(e),
    };
    if descriptors.is_empty() {
        return Ok(None);
    }
    let vectors: Vec<_> = descriptors.iter().map(|d| d.vector()).collect();
    let global = global_histogram(source.lab(), ColorSpace::Lab, None)?;
    encode(&vectors, index, params, &global).map(Some)
}

/// Region a blob is described from: its bounding box grown by the plan's
/// kernel reach, clipped to the frame.
pub fn blob_crop_rect(blob: &Blob, plan: &SamplingPlan, bounds: &Rect) -> Rect {
    blob.bbox().expand_within(plan.max_support(), bounds)
}

/// Encodes the region around `blob`.
pub fn encode_blob(
    frame: &Frame,
    blob: &Blob,
    plan: &SamplingPlan,
    index: &NNIndex,
    params: &EncoderParams,
) -> Result<Option<BlobFeature>> {
    let crop = frame.crop(blob_crop_rect(blob, plan, &frame.bounds()))?;
    encode_patch(&crop, plan, index, params)
}

/// One alarm: a track reached FIRE_CONFIRMED.
#[derive(Debug, Clone, PartialEq)]
pub struct AlarmEvent {
    pub video_id: String,
    pub frame: u64,
    pub track_id: u64,
    pub bbox: Rect,
    /// Margin of the track's most recent fire classification.
    pub margin: f64,
}

impl AlarmEvent {
    /// `video_id frame track_id x,y,w,h margin`
    pub fn log_line(&self) -> String {
        let b = self.bbox;
        format!(
            "{} {} {} {},{},{},{} {}",
            self.video_id, self.frame, self.track_id, b.x, b.y, b.w, b.h, self.margin
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad = |why: &str| Error::format("alarm log line", format!("{why}: {line:?}"));
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [video_id, frame, track_id, bbox, margin] = fields[..] else {
            return Err(bad("expected 5 fields"));
        };
        let b: Vec<usize> = bbox
            .split(',')
            .map(|v| v.parse().map_err(|_| bad("bad bbox")))
            .collect::<Result<_>>()?;
        let [x, y, w, h] = b[..] else {
            return Err(bad("bbox needs 4 values"));
        };
        Ok(AlarmEvent {
            video_id: video_id.to_string(),
            frame: frame.parse().map_err(|_| bad("bad frame index"))?,
            track_id: track_id.parse().map_err(|_| bad("bad track id"))?,
            bbox: Rect::new(x, y, w, h),
            margin: margin.parse().map_err(|_| bad("bad margin"))?,
        })
    }
}

impl fmt::Display for AlarmEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.log_line())
    }
}

/// Parses an alarm log; blank lines and `#` comments are skipped.
pub fn parse_alarm_log(text: &str) -> Result<Vec<AlarmEvent>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(AlarmEvent::parse)
        .collect()
}

/// Wall time spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub frames: u64,
    pub proposal: Duration,
    pub features: Duration,
    pub classify: Duration,
    pub temporal: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.proposal + self.features + self.classify + self.temporal
    }

    pub fn fps(&self) -> f64 {
        let t = self.total().as_secs_f64();
        if t > 0.0 {
            self.frames as f64 / t
        } else {
            f64::INFINITY
        }
    }

    pub fn merge(&mut self, other: &StageTimings) {
        self.frames += other.frames;
        self.proposal += other.proposal;
        self.features += other.features;
        self.classify += other.classify;
        self.temporal += other.temporal;
    }

    pub fn summary(&self) -> String {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        format!(
            "frames {} | proposal {:.1} ms | features {:.1} ms | classify {:.1} ms | temporal {:.1} ms | {:.1} fps",
            self.frames,
            ms(self.proposal),
            ms(self.features),
            ms(self.classify),
            ms(self.temporal),
            self.fps()
        )
    }
}

/// Classifier output for one blob.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobDecision {
    pub bbox: Rect,
    pub area: usize,
    pub perimeter: f64,
    /// `None` when no descriptor could be taken around the blob.
    pub prediction: Option<Prediction>,
}

impl BlobDecision {
    /// `frame x,y,w,h area perimeter label margin`
    pub fn log_line(&self, frame: u64) -> String {
        let b = self.bbox;
        let (label, margin) = match self.prediction {
            Some(p) => (
                if p.label == Label::Fire { "fire" } else { "nonfire" },
                p.margin.to_string(),
            ),
            None => ("none", "-".to_string()),
        };
        format!(
            "{frame} {},{},{},{} {} {} {label} {margin}",
            b.x, b.y, b.w, b.h, self.area, self.perimeter
        )
    }
}

/// Everything that happened on one frame.
#[derive(Debug, Clone)]
pub struct FrameReport {
    pub frame: u64,
    pub mask: CandidateMask,
    pub threshold: f64,
    pub blob_count: usize,
    /// Empty on frames where the classifier did not run.
    pub decisions: Vec<BlobDecision>,
    /// Log lines of the tracks observed on this frame.
    pub track_lines: Vec<String>,
    pub alarms: Vec<AlarmEvent>,
}

/// Per-stream detector state.
pub struct Detector {
    config: PipelineConfig,
    video_id: String,
    proposer: Proposer,
    tracker: Tracker,
    index: NNIndex,
    encoder: EncoderParams,
    model: TrainedModel,
    processed: u64,
    fire_margins: HashMap<u64, f64>,
    classifier_calls: u64,
    timings: StageTimings,
}

impl Detector {
    /// Fails with [`Error::FingerprintMismatch`] when `model` was trained
    /// against another codebook.
    pub fn new(
        config: PipelineConfig,
        codebook: &Codebook,
        model: TrainedModel,
        video_id: &str,
    ) -> Result<Self> {
        config.validate()?;
        if video_id.is_empty() || video_id.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("invalid video id {video_id:?}")));
        }
        if model.codebook_fingerprint() != codebook.fingerprint() {
            return Err(Error::FingerprintMismatch);
        }
        if model.dim() != codebook.k() + GLOBAL_DIM {
            return Err(Error::Config(format!(
                "model expects {} features, codebook gives {}",
                model.dim(),
                codebook.k() + GLOBAL_DIM
            )));
        }
        if config.neighbors > codebook.k() {
            return Err(Error::Config(format!(
                "m = {} exceeds codebook size {}",
                config.neighbors,
                codebook.k()
            )));
        }
        let index = codebook.index();
        let encoder = EncoderParams::for_index(&index, config.neighbors)?;
        Ok(Detector {
            proposer: Proposer::new(config.proposal())?,
            tracker: Tracker::new(config.tracker()),
            video_id: video_id.to_string(),
            config,
            index,
            encoder,
            model,
            processed: 0,
            fire_margins: HashMap::new(),
            classifier_calls: 0,
            timings: StageTimings::default(),
        })
    }

    /// Loads the model and codebook named in `config`.
    pub fn from_config(config: PipelineConfig, video_id: &str) -> Result<Self> {
        let (model_path, codebook_path) = config.require_artifacts()?;
        let codebook = Codebook::load(codebook_path)?;
        let model = TrainedModel::load(model_path)?;
        Detector::new(config, &codebook, model, video_id)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Number of blobs passed to the classifier so far.
    pub fn classifier_calls(&self) -> u64 {
        self.classifier_calls
    }

    pub fn timings(&self) -> &StageTimings {
        &self.timings
    }

    /// Whether the classifier runs on the next frame processed.
    pub fn is_decision_frame(&self) -> bool {
        self.processed % self.config.stride == 0
    }

    fn classify(&mut self, frame: &Frame, blobs: &[Blob]) -> Result<Vec<BlobDecision>> {
        let t0 = Instant::now();
        let plan = &self.config.plan;
        let features: Vec<Option<BlobFeature>> = blobs
            .par_iter()
            .map(|b| encode_blob(frame, b, plan, &self.index, &self.encoder))
            .collect::<Result<_>>()?;
        let t1 = Instant::now();
        let mut out = Vec::with_capacity(blobs.len());
        for (b, f) in blobs.iter().zip(&features) {
            let prediction = match f {
                Some(f) => {
                    self.classifier_calls += 1;
                    Some(self.model.predict(f)?)
                }
                None => None,
            };
            out.push(BlobDecision {
                bbox: b.bbox(),
                area: b.area(),
                perimeter: b.perimeter(),
                prediction,
            });
        }
        self.timings.features += t1 - t0;
        self.timings.classify += t1.elapsed();
        Ok(out)
    }

    /// Runs the cascade on the next frame of the stream.
    pub fn process(&mut self, frame: &Frame) -> Result<FrameReport> {
        let t0 = Instant::now();
        let proposal = self.proposer.process(frame)?;
        self.timings.proposal += t0.elapsed();

        let decide = self.is_decision_frame() && !proposal.blobs.is_empty();
        let decisions = if decide {
            self.classify(frame, &proposal.blobs)?
        } else {
            Vec::new()
        };

        let t1 = Instant::now();
        let update = if decide {
            let (fire, margins): (Vec<Blob>, Vec<f64>) = proposal
                .blobs
                .iter()
                .zip(&decisions)
                .filter_map(|(b, d)| match d.prediction {
                    Some(p) if p.label == Label::Fire => Some((b.clone(), p.margin)),
                    _ => None,
                })
                .unzip();
            let update = self.tracker.update(frame.index(), &fire, true);
            for (id, m) in update.assignments.iter().zip(margins) {
                if let Some(id) = id {
                    self.fire_margins.insert(*id, m);
                }
            }
            update
        } else {
            self.tracker.update(frame.index(), &proposal.blobs, false)
        };
        let track_lines: Vec<String> = update
            .assignments
            .iter()
            .flatten()
            .filter_map(|id| self.tracker.track(*id))
            .map(|t| t.log_line(frame.index()))
            .collect();
        let mut alarms = Vec::new();
        for id in &update.confirmed {
            if let Some(t) = self.tracker.track(*id) {
                alarms.push(AlarmEvent {
                    video_id: self.video_id.clone(),
                    frame: frame.index(),
                    track_id: *id,
                    bbox: t.bbox(),
                    margin: self.fire_margins.get(id).copied().unwrap_or(f64::NAN),
                });
            }
        }
        for id in &update.closed {
            self.fire_margins.remove(id);
        }
        self.timings.temporal += t1.elapsed();
        self.timings.frames += 1;
        self.processed += 1;

        Ok(FrameReport {
            frame: frame.index(),
            mask: proposal.mask,
            threshold: proposal.threshold,
            blob_count: proposal.blobs.len(),
            decisions,
            track_lines,
            alarms,
        })
    }
}

/// Summary of a whole stream.
#[derive(Debug, Clone, Default)]
pub struct StreamSummary {
    pub alarms: Vec<AlarmEvent>,
    pub frames: u64,
    /// Frames that failed to decode.
    pub skipped: u64,
    pub classifier_calls: u64,
    pub timings: StageTimings,
}

/// Runs `detector` over `frames` in order. Frames that fail to decode are
/// skipped with a warning; `on_frame` sees every processed frame.
pub fn detect_stream<I>(
    frames: I,
    detector: &mut Detector,
    mut on_frame: impl FnMut(&FrameReport),
) -> Result<StreamSummary>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let mut summary = StreamSummary::default();
    for item in frames {
        let frame = match item {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{}: skipping frame: {e}", detector.video_id());
                summary.skipped += 1;
                continue;
            }
        };
        let report = detector.process(&frame)?;
        for a in &report.alarms {
            log::info!("alarm {a}");
        }
        on_frame(&report);
        summary.alarms.extend(report.alarms);
        summary.frames += 1;
    }
    summary.classifier_calls = detector.classifier_calls();
    summary.timings = *detector.timings();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{Kernel, TrainedModel};

    fn tiny_codebook() -> Codebook {
        let centers: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.1; 88]).collect();
        Codebook::new(&centers, 1.0).unwrap()
    }

    fn constant_model(codebook: &Codebook, bias: f64) -> TrainedModel {
        let dim = codebook.k() + GLOBAL_DIM;
        TrainedModel::from_parts(Kernel::linear(), 1.0, (1.0, 1.0), dim, vec![0.0; dim], vec![1.0], bias, codebook.fingerprint())
            .unwrap()
    }

    fn config() -> PipelineConfig {
        PipelineConfig {
            neighbors: 3,
            ..Default::default()
        }
    }

    #[test]
    fn alarm_line_round_trip() {
        let a = AlarmEvent {
            video_id: "v01".into(),
            frame: 84,
            track_id: 3,
            bbox: Rect::new(60, 110, 41, 83),
            margin: 0.731_234_5,
        };
        assert_eq!(a.log_line(), "v01 84 3 60,110,41,83 0.7312345");
        assert_eq!(AlarmEvent::parse(&a.log_line()).unwrap(), a);
        assert!(AlarmEvent::parse("v 1 2 3,4 0.5").is_err());
        assert_eq!(parse_alarm_log("# log\n\nv01 84 3 60,110,41,83 0.7312345\n").unwrap(), vec![a]);
    }

    #[test]
    fn fingerprint_mismatch_is_fatal() {
        let cb = tiny_codebook();
        let other = Codebook::new(&(0..12).map(|i| vec![i as f64; 88]).collect::<Vec<_>>(), 1.0).unwrap();
        let model = constant_model(&other, 1.0);
        let err = Detector::new(config(), &cb, model, "v").err().unwrap();
        assert!(matches!(err, Error::FingerprintMismatch));
    }

    #[test]
    fn black_video_short_circuits() {
        let cb = tiny_codebook();
        let mut d = Detector::new(config(), &cb, constant_model(&cb, 1.0), "black").unwrap();
        let frames = (0..40).map(|i| Frame::filled(64, 48, ColorSpace::Rgb, i, &[0.0; 3]));
        let s = detect_stream(frames, &mut d, |_| {}).unwrap();
        assert_eq!(s.frames, 40);
        assert!(s.alarms.is_empty());
        assert_eq!(s.classifier_calls, 0);
    }

    #[test]
    fn decode_errors_are_skipped() {
        let cb = tiny_codebook();
        let mut d = Detector::new(config(), &cb, constant_model(&cb, 1.0), "v").unwrap();
        let frames = vec![
            Frame::filled(32, 32, ColorSpace::Rgb, 0, &[0.0; 3]),
            Err(Error::format("ppm", "truncated")),
            Frame::filled(32, 32, ColorSpace::Rgb, 2, &[0.0; 3]),
        ];
        let s = detect_stream(frames, &mut d, |_| {}).unwrap();
        assert_eq!((s.frames, s.skipped), (2, 1));
    }

    #[test]
    fn stride_controls_classification() {
        let cb = tiny_codebook();
        let cfg = PipelineConfig {
            camera: crate::proposal::CameraMode::Moving,
            stride: 3,
            ..config()
        };
        let mut d = Detector::new(cfg, &cb, constant_model(&cb, 1.0), "v").unwrap();
        let mut classified = Vec::new();
        for i in 0..9 {
            let mut f = Frame::filled(64, 64, ColorSpace::Rgb, i, &[10.0; 3]).unwrap();
            for y in 20..40 {
                for x in 20..40 {
                    f.pixel_mut(x, y).copy_from_slice(&[255.0, 240.0, 200.0]);
                }
            }
            let r = d.process(&f).unwrap();
            assert_eq!(r.blob_count, 1);
            classified.push(!r.decisions.is_empty());
        }
        assert_eq!(classified, [true, false, false, true, false, false, true, false, false]);
        assert_eq!(d.classifier_calls(), 3);
    }
}
