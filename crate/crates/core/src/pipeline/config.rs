use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::classifier::{CvSettings, KernelKind};
use crate::error::{Error, Result};
use crate::features::{SamplingMode, SamplingPlan};
use crate::proposal::{BackgroundParams, CameraMode, ProposalConfig, ThresholdLadder};
use crate::temporal::{Preset, StabilityThresholds, TrackerParams};

/// Every tunable of the detector and of the training workflows.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub camera: CameraMode,
    pub plan: SamplingPlan,
    /// Nearest words per descriptor in soft assignment.
    pub neighbors: usize,
    pub ladder: ThresholdLadder,
    pub background: BackgroundParams,
    pub min_blob_area: Option<usize>,
    pub stats_window: usize,
    pub thresholds: StabilityThresholds,
    pub iou_threshold: f64,
    pub max_missed: u64,
    /// Frames between classifier invocations.
    pub stride: u64,
    pub model_path: Option<PathBuf>,
    pub codebook_path: Option<PathBuf>,
    pub seed: u64,
    pub k: usize,
    pub kmeans_iterations: usize,
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: f64,
    pub cv: bool,
    pub folds: usize,
    pub balance: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            camera: CameraMode::Static,
            plan: SamplingPlan::default(),
            neighbors: 10,
            ladder: ThresholdLadder::default(),
            background: BackgroundParams::default(),
            min_blob_area: None,
            stats_window: 25,
            thresholds: StabilityThresholds::default(),
            iou_threshold: 0.3,
            max_missed: 5,
            stride: 5,
            model_path: None,
            codebook_path: None,
            seed: 0,
            k: 500,
            kmeans_iterations: 50,
            kernel: KernelKind::Rbf,
            c: 1.0,
            gamma: 1.0,
            cv: true,
            folds: 5,
            balance: true,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| parse_num(key, s.trim()))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = PipelineConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.model_path, &mut cfg.codebook_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "camera" => {
                self.camera = CameraMode::parse(value)
                    .ok_or_else(|| Error::Config(format!("camera: expected static|moving, got {value:?}")))?
            }
            "sampling" => {
                self.plan.mode = match value {
                    "dense" => SamplingMode::Dense,
                    "keypoint" => SamplingMode::Keypoint,
                    _ => return Err(Error::Config(format!("sampling: expected dense|keypoint, got {value:?}"))),
                }
            }
            "interval" => self.plan.interval = parse_num(key, value)?,
            "scales" => self.plan.scales = parse_list(key, value)?,
            "hessian_threshold" => self.plan.hessian_threshold = parse_num(key, value)?,
            "neighbors" | "m" => self.neighbors = parse_num(key, value)?,
            "ladder" => {
                self.ladder = ThresholdLadder::new(parse_list(key, value)?)
                    .map_err(|e| Error::Config(format!("ladder: {}", strip(e))))?
            }
            "bg_rate" => self.background.rate = parse_num(key, value)?,
            "bg_lambda" => self.background.lambda = parse_num(key, value)?,
            "bg_var_floor" => self.background.var_floor = parse_num(key, value)?,
            "bg_warmup" => self.background.warmup = parse_num(key, value)?,
            "min_blob_area" => {
                self.min_blob_area = match value {
                    "auto" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "stats_window" => self.stats_window = parse_num(key, value)?,
            "preset" => {
                let preset = match value.to_ascii_lowercase().as_str() {
                    "indoor" => Preset::Indoor,
                    "outdoor" => Preset::Outdoor,
                    _ => return Err(Error::Config(format!("preset: expected indoor|outdoor, got {value:?}"))),
                };
                let literal = self.thresholds.eq6_literal;
                self.thresholds = StabilityThresholds::preset(preset);
                self.thresholds.eq6_literal = literal;
            }
            "t1" => self.thresholds.t1 = parse_num(key, value)?,
            "t2" => self.thresholds.t2 = parse_num(key, value)?,
            "eq6_literal" => self.thresholds.eq6_literal = parse_bool(key, value)?,
            "iou_threshold" => self.iou_threshold = parse_num(key, value)?,
            "max_missed" => self.max_missed = parse_num(key, value)?,
            "stride" => self.stride = parse_num(key, value)?,
            "model" => self.model_path = Some(PathBuf::from(value)),
            "codebook" => self.codebook_path = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "kmeans_iterations" => self.kmeans_iterations = parse_num(key, value)?,
            "kernel" => {
                self.kernel = KernelKind::parse(value)
                    .ok_or_else(|| Error::Config(format!("kernel: expected linear|rbf|chi2, got {value:?}")))?
            }
            "c" | "C" => self.c = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "cv" => self.cv = parse_bool(key, value)?,
            "folds" => self.folds = parse_num(key, value)?,
            "balance" => self.balance = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Range checks on every numeric field.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Err(e) = self.plan.validate() {
            return bad(strip(e));
        }
        if let Err(e) = self.background.validate() {
            return bad(strip(e));
        }
        if let Err(e) = StabilityThresholds::new(self.thresholds.t1, self.thresholds.t2) {
            return bad(strip(e));
        }
        if self.neighbors < 1 {
            return bad("neighbors must be >= 1".into());
        }
        if self.stride < 1 {
            return bad("stride must be >= 1".into());
        }
        if self.stats_window < 1 {
            return bad("stats_window must be >= 1".into());
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return bad(format!("iou_threshold {} not in (0, 1]", self.iou_threshold));
        }
        if self.max_missed < 1 {
            return bad("max_missed must be >= 1".into());
        }
        if self.k < 1 || self.kmeans_iterations < 1 {
            return bad("k and kmeans_iterations must be >= 1".into());
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C {} must be > 0", self.c));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be > 0", self.gamma));
        }
        if self.folds < 2 {
            return bad("folds must be >= 2".into());
        }
        Ok(())
    }

    /// Checks that the model and codebook paths are set and exist.
    pub fn require_artifacts(&self) -> Result<(&Path, &Path)> {
        let model = self
            .model_path
            .as_deref()
            .ok_or_else(|| Error::Config("no model path configured".into()))?;
        let codebook = self
            .codebook_path
            .as_deref()
            .ok_or_else(|| Error::Config("no codebook path configured".into()))?;
        for p in [model, codebook] {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok((model, codebook))
    }

    pub fn proposal(&self) -> ProposalConfig {
        ProposalConfig {
            camera: self.camera,
            ladder: self.ladder.clone(),
            background: self.background,
            min_blob_area: self.min_blob_area,
            stats_window: self.stats_window,
        }
    }

    pub fn tracker(&self) -> TrackerParams {
        TrackerParams {
            thresholds: self.thresholds,
            iou_threshold: self.iou_threshold,
            max_missed: self.max_missed,
        }
    }

    pub fn cv_settings(&self) -> CvSettings {
        CvSettings {
            folds: self.folds,
            balance: self.balance,
            seed: self.seed,
            ..CvSettings::default()
        }
    }

    /// Serializes to the key = value format accepted by [`PipelineConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = match self.plan.mode {
            SamplingMode::Dense => "dense",
            SamplingMode::Keypoint => "keypoint",
        };
        let _ = writeln!(s, "camera = {}", self.camera.name());
        let _ = writeln!(s, "sampling = {mode}");
        let _ = writeln!(s, "interval = {}", self.plan.interval);
        let _ = writeln!(s, "scales = {}", join(&self.plan.scales));
        let _ = writeln!(s, "hessian_threshold = {}", self.plan.hessian_threshold);
        let _ = writeln!(s, "neighbors = {}", self.neighbors);
        let _ = writeln!(s, "ladder = {}", join(self.ladder.rungs()));
        let _ = writeln!(s, "bg_rate = {}", self.background.rate);
        let _ = writeln!(s, "bg_lambda = {}", self.background.lambda);
        let _ = writeln!(s, "bg_var_floor = {}", self.background.var_floor);
        let _ = writeln!(s, "bg_warmup = {}", self.background.warmup);
        match self.min_blob_area {
            Some(a) => {
                let _ = writeln!(s, "min_blob_area = {a}");
            }
            None => {
                let _ = writeln!(s, "min_blob_area = auto");
            }
        }
        let _ = writeln!(s, "stats_window = {}", self.stats_window);
        let _ = writeln!(s, "t1 = {}", self.thresholds.t1);
        let _ = writeln!(s, "t2 = {}", self.thresholds.t2);
        let _ = writeln!(s, "eq6_literal = {}", self.thresholds.eq6_literal);
        let _ = writeln!(s, "iou_threshold = {}", self.iou_threshold);
        let _ = writeln!(s, "max_missed = {}", self.max_missed);
        let _ = writeln!(s, "stride = {}", self.stride);
        if let Some(p) = &self.model_path {
            let _ = writeln!(s, "model = {}", p.display());
        }
        if let Some(p) = &self.codebook_path {
            let _ = writeln!(s, "codebook = {}", p.display());
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "kmeans_iterations = {}", self.kmeans_iterations);
        let _ = writeln!(s, "kernel = {}", self.kernel.name());
        let _ = writeln!(s, "c = {}", self.c);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "cv = {}", self.cv);
        let _ = writeln!(s, "folds = {}", self.folds);
        let _ = writeln!(s, "balance = {}", self.balance);
        s
    }
}

/// Message of an error without its category prefix.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidParameter(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let cfg = PipelineConfig::parse(
            "# detector\n\ncamera = moving   # handheld\nstride=3\nscales = 9, 15\npreset = outdoor\n",
        )
        .unwrap();
        assert_eq!(cfg.camera, CameraMode::Moving);
        assert_eq!(cfg.stride, 3);
        assert_eq!(cfg.plan.scales, vec![9, 15]);
        assert_eq!((cfg.thresholds.t1, cfg.thresholds.t2), (0.25, 0.60));
    }

    #[test]
    fn errors_are_config_errors() {
        for text in ["nonsense", "stride = x", "bogus = 1", "t1 = 0.5\nt2 = 0.4", "ladder = 100,200"] {
            let e = PipelineConfig::parse(text).unwrap_err();
            assert!(e.is_config(), "{text}: {e}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.set("camera", "moving").unwrap();
        cfg.set("min_blob_area", "30").unwrap();
        cfg.set("model", "m.bin").unwrap();
        cfg.set("kernel", "chi2").unwrap();
        assert_eq!(PipelineConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(
            PipelineConfig::parse(&PipelineConfig::default().to_text()).unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn missing_artifacts() {
        let cfg = PipelineConfig::default();
        assert!(cfg.require_artifacts().unwrap_err().is_config());
    }
}
