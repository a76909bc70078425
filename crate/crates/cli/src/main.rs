mod selftest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pyrovision::imaging::{write_pbm, FrameDir};
use pyrovision::pipeline::{
    detect_stream, evaluate, evaluate_alarms, parse_alarm_log, parse_labels, train_codebook, train_model,
    Detector, EvalReport, PipelineConfig,
};
use pyrovision::proposal::mask_filename;
use pyrovision::Error;

#[derive(Parser)]
#[command(name = "pyrovision", version, about = "Fire and flame detection for video frame sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// key = value configuration file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set stride=3`
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    camera: Option<String>,
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Codebook file
    #[arg(long)]
    codebook: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let mut pairs: Vec<(String, String)> = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let named = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("camera", self.camera.clone()),
            ("stride", self.stride.map(|v| v.to_string())),
            ("kernel", self.kernel.clone()),
            ("k", self.k.map(|v| v.to_string())),
            ("model", self.model.as_ref().map(|p| p.display().to_string())),
            ("codebook", self.codebook.as_ref().map(|p| p.display().to_string())),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        }
        for (k, v) in pairs {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Cluster local descriptors of training patches into a codebook
    TrainCodebook {
        /// Directories of patch images
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Output file (defaults to the configured codebook path)
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Encode patches and train the SVM
    TrainModel {
        #[arg(long)]
        fire: PathBuf,
        #[arg(long)]
        nonfire: PathBuf,
        /// Output file (defaults to the configured model path)
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Skip the grid search and use the configured C and gamma
        #[arg(long)]
        no_cv: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the detector over a directory of numbered frames
    Detect {
        frames: PathBuf,
        /// Identifier written to the alarm log (defaults to the directory name)
        #[arg(long)]
        video_id: Option<String>,
        /// Alarm log destination (defaults to stdout)
        #[arg(long)]
        alarms: Option<PathBuf>,
        /// Write every candidate mask as a PBM into this directory
        #[arg(long)]
        dump_masks: Option<PathBuf>,
        /// Per-frame track statistics log
        #[arg(long)]
        track_log: Option<PathBuf>,
        /// Per-blob classifier decisions log
        #[arg(long)]
        decision_log: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score detections against section labels
    Evaluate {
        /// Dataset root holding one frame directory per video id
        root: Option<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        /// Score a saved alarm log instead of running the detector
        #[arg(long)]
        from_alarms: Option<PathBuf>,
        /// Where to save the alarms produced by the run
        #[arg(long)]
        alarms: Option<PathBuf>,
        /// Also list every section verdict
        #[arg(long)]
        verbose: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train on synthetic patches and check detection on a synthetic scene
    Selftest {
        /// Also write the synthetic patches, scene frames and labels here
        #[arg(long)]
        write_demo: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn create_dir(p: &Path) -> Result<(), Error> {
    fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn output_path(explicit: Option<PathBuf>, configured: Option<PathBuf>, what: &str) -> Result<PathBuf, Error> {
    explicit
        .or(configured)
        .ok_or_else(|| Error::Config(format!("no {what} output path: pass --out or set it in the config")))
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::TrainCodebook { dirs, out, cfg } => {
            let cfg = cfg.resolve()?;
            let out = output_path(out, cfg.codebook_path.clone(), "codebook")?;
            let r = train_codebook(&dirs, &cfg, &out)?;
            println!("descriptors {}", r.descriptor_count);
            for (i, sse) in r.report.sse_trace.iter().enumerate() {
                println!("iteration {} sse {sse}", i + 1);
            }
            println!("final sse {}", r.report.final_sse);
            println!("sigma {}", r.codebook.sigma());
            println!("fingerprint {}", r.codebook.fingerprint());
            println!("wrote {}", out.display());
        }
        Command::TrainModel {
            fire,
            nonfire,
            out,
            no_cv,
            cfg,
        } => {
            let mut cfg = cfg.resolve()?;
            if no_cv {
                cfg.cv = false;
            }
            let codebook = cfg
                .codebook_path
                .clone()
                .ok_or_else(|| Error::Config("no codebook configured".into()))?;
            let out = output_path(out, cfg.model_path.clone(), "model")?;
            let r = train_model(&fire, &nonfire, &codebook, &cfg, &out)?;
            if let Some(cv) = &r.cv {
                println!(
                    "cv {} folds over {} cells: best C={} gamma={} accuracy {:.4}",
                    cv.folds,
                    cv.cells.len(),
                    cv.best.c,
                    cv.best.gamma.map_or("-".to_string(), |g| g.to_string()),
                    cv.best.accuracy
                );
            }
            println!("kernel {} gamma {} C {}", r.kernel.kind.name(), r.kernel.gamma, r.c);
            println!("train {} test {}", r.train_count, r.test_count);
            println!("support vectors {}", r.model.sv_count());
            println!("held-out accuracy {:.4}", r.held_out_accuracy);
            println!("wrote {}", out.display());
        }
        Command::Detect {
            frames,
            video_id,
            alarms,
            dump_masks,
            track_log,
            decision_log,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let video_id = video_id.unwrap_or_else(|| {
                frames
                    .file_name()
                    .map_or("video".to_string(), |n| n.to_string_lossy().into_owned())
            });
            let mut detector = Detector::from_config(cfg, &video_id)?;
            if let Some(d) = &dump_masks {
                create_dir(d)?;
            }
            let mut tracks = String::new();
            let mut decisions = String::new();
            let mut dump_error = None;
            let summary = detect_stream(FrameDir::open(&frames)?, &mut detector, |r| {
                if let Some(d) = &dump_masks {
                    if let Err(e) = write_pbm(&d.join(mask_filename(r.frame)), &r.mask.mask) {
                        dump_error.get_or_insert(e);
                    }
                }
                for l in &r.track_lines {
                    tracks.push_str(l);
                    tracks.push('\n');
                }
                for d in &r.decisions {
                    decisions.push_str(&d.log_line(r.frame));
                    decisions.push('\n');
                }
            })?;
            if let Some(e) = dump_error {
                return Err(e);
            }
            if let Some(p) = &track_log {
                write_text(Some(p), &tracks)?;
            }
            if let Some(p) = &decision_log {
                write_text(Some(p), &decisions)?;
            }
            let log: String = summary.alarms.iter().map(|a| a.log_line() + "\n").collect();
            write_text(alarms.as_deref(), &log)?;
            eprintln!(
                "{} alarms, {} frames ({} skipped), {} classifier calls",
                summary.alarms.len(),
                summary.frames,
                summary.skipped,
                summary.classifier_calls
            );
            eprintln!("{}", summary.timings.summary());
        }
        Command::Evaluate {
            root,
            labels,
            from_alarms,
            alarms,
            verbose,
            cfg,
        } => {
            let text = fs::read_to_string(&labels).map_err(|e| Error::Io {
                path: labels.clone(),
                source: e,
            })?;
            let labels = parse_labels(&text)?;
            let report: EvalReport = match (from_alarms, root) {
                (Some(log), _) => {
                    let text = fs::read_to_string(&log).map_err(|e| Error::Io { path: log, source: e })?;
                    evaluate_alarms(&parse_alarm_log(&text)?, &labels)?
                }
                (None, Some(root)) => {
                    let cfg = cfg.resolve()?;
                    let outcome = evaluate(&root, &cfg, &labels)?;
                    if let Some(p) = &alarms {
                        let log: String = outcome.alarms.iter().map(|a| a.log_line() + "\n").collect();
                        write_text(Some(p), &log)?;
                    }
                    eprintln!("{}", outcome.timings.summary());
                    outcome.report
                }
                (None, None) => {
                    return Err(Error::Config("evaluate needs a dataset root or --from-alarms".into()))
                }
            };
            print!("{}", report.table());
            if verbose {
                print!("{}", report.verdict_lines());
            }
        }
        Command::Selftest { write_demo, cfg } => {
            let cfg = cfg.resolve()?;
            return selftest::run(&cfg, write_demo.as_deref());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    };
    let _ = std::io::stdout().flush();
    code
}
