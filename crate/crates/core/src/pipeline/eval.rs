use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::config::PipelineConfig;
use super::detect::{detect_stream, AlarmEvent, Detector, StageTimings};
use crate::classifier::TrainedModel;
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::imaging::{list_frame_files, FrameDir};

/// Frames per labeled section.
pub const SECTION_LEN: u64 = 200;

/// Ground truth for frames `start..end` of one video.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectionLabel {
    pub video_id: String,
    pub start: u64,
    /// Exclusive.
    pub end: u64,
    pub fire: bool,
}

impl SectionLabel {
    pub fn contains(&self, video_id: &str, frame: u64) -> bool {
        self.video_id == video_id && (self.start..self.end).contains(&frame)
    }

    /// `video_id start end fire|nofire`
    pub fn parse(line: &str) -> Result<Self> {
        let bad = |why: &str| Error::Labels(format!("{why}: {line:?}"));
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [video_id, start, end, truth] = fields[..] else {
            return Err(bad("expected 4 fields"));
        };
        let fire = match truth {
            "fire" => true,
            "nofire" => false,
            _ => return Err(bad("truth must be fire or nofire")),
        };
        Ok(SectionLabel {
            video_id: video_id.to_string(),
            start: start.parse().map_err(|_| bad("bad start frame"))?,
            end: end.parse().map_err(|_| bad("bad end frame"))?,
            fire,
        })
    }

    pub fn to_line(&self) -> String {
        let truth = if self.fire { "fire" } else { "nofire" };
        format!("{} {} {} {truth}", self.video_id, self.start, self.end)
    }
}

/// Checks that every video's sections are non-empty, non-overlapping and
/// `SECTION_LEN` long, except the last one which may be shorter.
pub fn validate_labels(labels: &[SectionLabel]) -> Result<()> {
    let mut by_video: BTreeMap<&str, Vec<&SectionLabel>> = BTreeMap::new();
    for l in labels {
        if l.start >= l.end {
            return Err(Error::Labels(format!("empty section {}", l.to_line())));
        }
        if l.end - l.start > SECTION_LEN {
            return Err(Error::Labels(format!("section longer than {SECTION_LEN} frames: {}", l.to_line())));
        }
        by_video.entry(&l.video_id).or_default().push(l);
    }
    for sections in by_video.values_mut() {
        sections.sort_by_key(|l| l.start);
        for pair in sections.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::Labels(format!(
                    "overlapping sections {} and {}",
                    pair[0].to_line(),
                    pair[1].to_line()
                )));
            }
            if pair[0].end - pair[0].start != SECTION_LEN {
                return Err(Error::Labels(format!(
                    "only the last section may be shorter than {SECTION_LEN} frames: {}",
                    pair[0].to_line()
                )));
            }
        }
    }
    Ok(())
}

/// Parses and validates a labels file; blank lines and `#` comments are skipped.
pub fn parse_labels(text: &str) -> Result<Vec<SectionLabel>> {
    let labels: Vec<SectionLabel> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(SectionLabel::parse)
        .collect::<Result<_>>()?;
    validate_labels(&labels)?;
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionVerdict {
    pub label: SectionLabel,
    pub predicted_fire: bool,
    pub alarms: usize,
}

/// Section-level confusion counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub verdicts: Vec<SectionVerdict>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

impl EvalReport {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        EvalReport {
            tp,
            tn,
            fp,
            fn_,
            verdicts: Vec::new(),
        }
    }

    pub fn sections(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `TP / (TP + FP)`; `None` when nothing was predicted fire.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `TP / (TP + FN)`; `None` when no section is fire.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn table(&self) -> String {
        let rows = [
            ("True positive", self.tp.to_string()),
            ("True negative", self.tn.to_string()),
            ("False positive", self.fp.to_string()),
            ("False negative", self.fn_.to_string()),
            ("Precision rate", percent(self.precision())),
            ("Recall rate", percent(self.recall())),
        ];
        let mut s = String::new();
        let _ = writeln!(s, "{:<16}{:>10}", "Results", "Value");
        for (name, value) in rows {
            let _ = writeln!(s, "{name:<16}{value:>10}");
        }
        s
    }

    /// One line per section: the label line followed by the prediction.
    pub fn verdict_lines(&self) -> String {
        let mut s = String::new();
        for v in &self.verdicts {
            let pred = if v.predicted_fire { "fire" } else { "nofire" };
            let _ = writeln!(s, "{} -> {pred} ({} alarms)", v.label.to_line(), v.alarms);
        }
        s
    }
}

/// Scores alarms against section labels: a section is predicted fire when
/// at least one alarm falls inside it. Alarms outside every labeled section
/// are an error.
pub fn evaluate_alarms(alarms: &[AlarmEvent], labels: &[SectionLabel]) -> Result<EvalReport> {
    validate_labels(labels)?;
    let mut sorted: Vec<&SectionLabel> = labels.iter().collect();
    sorted.sort();
    let mut hits = vec![0usize; sorted.len()];
    for a in alarms {
        let i = sorted
            .iter()
            .position(|l| l.contains(&a.video_id, a.frame))
            .ok_or_else(|| Error::Labels(format!("alarm outside labeled sections: {}", a.log_line())))?;
        hits[i] += 1;
    }
    let mut report = EvalReport::default();
    for (l, n) in sorted.into_iter().zip(hits) {
        let predicted_fire = n > 0;
        match (l.fire, predicted_fire) {
            (true, true) => report.tp += 1,
            (false, false) => report.tn += 1,
            (false, true) => report.fp += 1,
            (true, false) => report.fn_ += 1,
        }
        report.verdicts.push(SectionVerdict {
            label: l.clone(),
            predicted_fire,
            alarms: n,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    /// Alarms of all videos, ordered by video id then frame.
    pub alarms: Vec<AlarmEvent>,
    pub timings: StageTimings,
}

/// Runs the detector over `root/<video_id>/` for every labeled video, one
/// detector per video, and scores the alarms.
pub fn evaluate(root: &Path, config: &PipelineConfig, labels: &[SectionLabel]) -> Result<EvalOutcome> {
    validate_labels(labels)?;
    let (model_path, codebook_path) = config.require_artifacts()?;
    let codebook = Codebook::load(codebook_path)?;
    let model = TrainedModel::load(model_path)?;
    if model.codebook_fingerprint() != codebook.fingerprint() {
        return Err(Error::FingerprintMismatch);
    }
    let videos: BTreeSet<&str> = labels.iter().map(|l| l.video_id.as_str()).collect();
    for &v in &videos {
        let dir = root.join(v);
        for (index, path) in list_frame_files(&dir)? {
            if !labels.iter().any(|l| l.contains(v, index)) {
                return Err(Error::Labels(format!("{} is not covered by any section", path.display())));
            }
        }
    }
    let runs: Vec<(Vec<AlarmEvent>, StageTimings)> = videos
        .par_iter()
        .map(|&v| {
            let mut detector = Detector::new(config.clone(), &codebook, model.clone(), v)?;
            let summary = detect_stream(FrameDir::open(&root.join(v))?, &mut detector, |_| {})?;
            Ok((summary.alarms, summary.timings))
        })
        .collect::<Result<_>>()?;
    let mut alarms = Vec::new();
    let mut timings = StageTimings::default();
    for (a, t) in runs {
        alarms.extend(a);
        timings.merge(&t);
    }
    let report = evaluate_alarms(&alarms, labels)?;
    Ok(EvalOutcome {
        report,
        alarms,
        timings,
    })
}
