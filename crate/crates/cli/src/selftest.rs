use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pyrovision::imaging::{write_ppm, Frame};
use pyrovision::pipeline::{
    detect_stream, train_codebook_from_patches, train_model_from_patches, AlarmEvent, Detector,
    PipelineConfig, SECTION_LEN,
};
use pyrovision::synth::{fire_patches, nonfire_patches, SceneSpec};
use pyrovision::Error;

const PATCHES: usize = 100;
const MAX_K: usize = 100;
const LATENCY: u64 = 50;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_patches(dir: &Path, patches: &[Frame]) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    for (i, p) in patches.iter().enumerate() {
        write_ppm(&dir.join(format!("{i:04}.ppm")), p)?;
    }
    Ok(())
}

fn write_video(dir: &Path, scene: &SceneSpec, frames: u64) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    for f in scene.frames(frames) {
        write_ppm(&dir.join(format!("{:06}.ppm", f.index())), &f)?;
    }
    Ok(())
}

/// Patches, two videos, labels and a config file that exercise every subcommand.
fn write_demo(root: &Path, fire: &[Frame], nonfire: &[Frame], cfg: &PipelineConfig) -> Result<(), Error> {
    write_patches(&root.join("patches/fire"), fire)?;
    write_patches(&root.join("patches/nonfire"), nonfire)?;
    let scene = SceneSpec::standard(cfg.seed);
    write_video(&root.join("videos/flame"), &scene, SECTION_LEN)?;
    write_video(&root.join("videos/quiet"), &scene.clone().without_flame(), SECTION_LEN)?;
    let labels = format!("flame 0 {SECTION_LEN} fire\nquiet 0 {SECTION_LEN} nofire\n");
    let labels_path = root.join("labels.txt");
    fs::write(&labels_path, labels).map_err(io(&labels_path))?;
    let mut demo = cfg.clone();
    demo.k = demo.k.min(MAX_K);
    demo.codebook_path = Some(PathBuf::from("codebook.pvcb"));
    demo.model_path = Some(PathBuf::from("model.pvsm"));
    let conf = root.join("demo.conf");
    fs::write(&conf, format!("# synthetic demo\n{}", demo.to_text())).map_err(io(&conf))?;
    Ok(())
}

fn report(name: &str, pass: bool, detail: String) -> bool {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

pub fn run(cfg: &PipelineConfig, demo: Option<&Path>) -> Result<bool, Error> {
    let mut cfg = cfg.clone();
    cfg.k = cfg.k.min(MAX_K);
    let t0 = Instant::now();
    let margin = cfg.plan.max_support();
    let fire = fire_patches(PATCHES, margin, cfg.seed);
    let nonfire = nonfire_patches(PATCHES, margin, cfg.seed.wrapping_add(1));
    if let Some(root) = demo {
        write_demo(root, &fire, &nonfire, &cfg)?;
        println!("wrote demo data to {}", root.display());
    }

    let all: Vec<Frame> = fire.iter().chain(&nonfire).cloned().collect();
    let cb = train_codebook_from_patches(&all, &cfg)?;
    let tag = |v: Vec<Frame>| -> Vec<(PathBuf, Frame)> {
        v.into_iter()
            .enumerate()
            .map(|(i, f)| (PathBuf::from(format!("synthetic/{i:04}")), f))
            .collect()
    };
    let trained = train_model_from_patches(&tag(fire), &tag(nonfire), &cb.codebook, &cfg)?;
    let mut ok = report(
        "training",
        trained.held_out_accuracy >= 0.9,
        format!(
            "{} descriptors, k = {}, held-out accuracy {:.3} ({:.1} s)",
            cb.descriptor_count,
            cfg.k,
            trained.held_out_accuracy,
            t0.elapsed().as_secs_f64()
        ),
    );

    let scene = SceneSpec::standard(cfg.seed);
    let flame_box = scene.flame.as_ref().map(|f| f.extent()).expect("standard scene has a flame");
    let run_scene = |scene: &SceneSpec| -> Result<(Vec<AlarmEvent>, f64), Error> {
        let mut d = Detector::new(cfg.clone(), &cb.codebook, trained.model.clone(), "selftest")?;
        let s = detect_stream(scene.frames(500).map(Ok), &mut d, |_| {})?;
        Ok((s.alarms, s.timings.fps()))
    };

    let (alarms, fps) = run_scene(&scene)?;
    let onset = scene.flame_onset;
    let on_flame = |a: &AlarmEvent| a.bbox.intersection(&flame_box).is_some();
    let first = alarms.iter().filter(|a| on_flame(a)).map(|a| a.frame).min();
    ok &= report(
        "flame alarm",
        first.is_some_and(|f| f >= onset && f <= onset + LATENCY),
        match first {
            Some(f) => format!("first alarm at frame {f}, onset {onset}"),
            None => "no alarm on the flame".into(),
        },
    );
    let stray = alarms.iter().filter(|a| !on_flame(a)).count();
    ok &= report("no false alarms", stray == 0, format!("{stray} alarms away from the flame"));
    let (quiet, _) = run_scene(&scene.clone().without_flame())?;
    ok &= report("lamp and car only", quiet.is_empty(), format!("{} alarms", quiet.len()));
    ok &= report("throughput", fps >= 15.0, format!("{fps:.1} fps"));
    Ok(ok)
}
