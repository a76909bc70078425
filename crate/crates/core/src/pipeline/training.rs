use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::PipelineConfig;
use super::detect::encode_patch;
use crate::classifier::{
    cross_validate, train, CvReport, CvSettings, Kernel, Label, TrainParams, TrainReport, TrainedModel,
};
use crate::codebook::{kmeans, BlobFeature, Codebook, EncoderParams, KMeansReport, Provenance};
use crate::error::{Error, Result};
use crate::features::{sample_frame, SamplingPlan, DESCRIPTOR_DIM};
use crate::imaging::{read_frame, Frame};

/// Minimum patches per class for model training.
pub const MIN_PER_CLASS: usize = 5;

/// Reads every `.ppm` (and `.png` with the feature) file of `dir`, sorted by name.
pub fn load_patches(dir: &Path) -> Result<Vec<(PathBuf, Frame)>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("ppm")) || (cfg!(feature = "png") && ext.as_deref() == Some("png")) {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .into_par_iter()
        .map(|p| read_frame(&p, 0).map(|f| (p, f)))
        .collect()
}

/// Local descriptors of every patch, in patch order. Patches too small for
/// any kernel contribute nothing.
pub fn harvest_descriptors(patches: &[Frame], plan: &SamplingPlan) -> Result<Vec<[f64; DESCRIPTOR_DIM]>> {
    let per_patch: Vec<Vec<[f64; DESCRIPTOR_DIM]>> = patches
        .par_iter()
        .map(|p| match sample_frame(p, plan) {
            Ok(d) => Ok(d.iter().map(|d| d.vector()).collect()),
            Err(Error::NoSamplePositions) => Ok(Vec::new()),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    Ok(per_patch.into_iter().flatten().collect())
}

fn distinct_count(descriptors: &[[f64; DESCRIPTOR_DIM]]) -> usize {
    descriptors
        .iter()
        .map(|d| d.map(|v| (v + 0.0).to_bits()))
        .collect::<HashSet<_>>()
        .len()
}

#[derive(Debug, Clone)]
pub struct CodebookTraining {
    pub codebook: Codebook,
    pub report: KMeansReport,
    pub descriptor_count: usize,
}

/// Clusters the descriptors of `patches` into `config.k` words.
pub fn train_codebook_from_patches(patches: &[Frame], config: &PipelineConfig) -> Result<CodebookTraining> {
    let descriptors = harvest_descriptors(patches, &config.plan)?;
    let distinct = distinct_count(&descriptors);
    if distinct < config.k {
        return Err(Error::InsufficientData(format!(
            "{} descriptors ({distinct} distinct) from {} patches, k = {}",
            descriptors.len(),
            patches.len(),
            config.k
        )));
    }
    let (codebook, report) = kmeans(&descriptors, config.k, config.kmeans_iterations, config.seed)?;
    let codebook = codebook.with_provenance(Provenance {
        descriptor_count: descriptors.len(),
        plan: config.plan.fingerprint(),
    });
    Ok(CodebookTraining {
        codebook,
        report,
        descriptor_count: descriptors.len(),
    })
}

/// Trains a codebook on every patch under `dirs` and writes it to `out`.
pub fn train_codebook(dirs: &[PathBuf], config: &PipelineConfig, out: &Path) -> Result<CodebookTraining> {
    let mut patches = Vec::new();
    for d in dirs {
        patches.extend(load_patches(d)?.into_iter().map(|(_, f)| f));
    }
    let result = train_codebook_from_patches(&patches, config)?;
    result.codebook.save(out)?;
    Ok(result)
}

/// Seeded stratified split: about a fifth of each class is held out.
/// Returns (train, test) indices, each ascending.
pub fn split_train_test(labels: &[Label], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Label::Fire, Label::NonFire] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 / 5.0).round() as usize).min(idx.len().saturating_sub(1));
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Encodes labeled patches against `codebook`. Every patch that fails,
/// including patches too small for a descriptor, is reported together.
pub fn encode_patches(
    patches: &[(PathBuf, Frame)],
    plan: &SamplingPlan,
    codebook: &Codebook,
    m: usize,
) -> Result<Vec<BlobFeature>> {
    let index = codebook.index();
    let params = EncoderParams::for_index(&index, m)?;
    let results: Vec<(PathBuf, Result<Option<BlobFeature>>)> = patches
        .par_iter()
        .map(|(p, f)| (p.clone(), encode_patch(f, plan, &index, &params)))
        .collect();
    let mut features = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (path, r) in results {
        match r {
            Ok(Some(f)) => features.push(f),
            Ok(None) => failures.push((path, "no descriptor fits the patch".to_string())),
            Err(e) => failures.push((path, e.to_string())),
        }
    }
    if failures.is_empty() {
        Ok(features)
    } else {
        Err(Error::Encoding(failures))
    }
}

#[derive(Debug, Clone)]
pub struct ModelTraining {
    pub model: TrainedModel,
    pub report: TrainReport,
    pub cv: Option<CvReport>,
    pub kernel: Kernel,
    pub c: f64,
    /// Accuracy on the held-out fifth.
    pub held_out_accuracy: f64,
    pub train_count: usize,
    pub test_count: usize,
}

/// Grid search (optional), final training on the training split and
/// held-out scoring, for already-encoded samples.
pub fn train_model_from_features(
    features: &[BlobFeature],
    labels: &[Label],
    config: &PipelineConfig,
) -> Result<ModelTraining> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let n_fire = labels.iter().filter(|&&l| l == Label::Fire).count();
    let n_non = labels.len() - n_fire;
    if n_fire < MIN_PER_CLASS || n_non < MIN_PER_CLASS {
        return Err(Error::InsufficientData(format!(
            "need {MIN_PER_CLASS} samples per class, got {n_fire} fire and {n_non} non-fire"
        )));
    }
    let (train_idx, test_idx) = split_train_test(labels, config.seed);
    let rows: Vec<&[f64]> = train_idx.iter().map(|&i| features[i].combined()).collect();
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();

    let (kernel, c, cv) = if config.cv {
        let settings = CvSettings {
            folds: config.folds,
            balance: config.balance,
            seed: config.seed,
            ..CvSettings::default()
        };
        let report = cross_validate(&rows, &train_labels, config.kernel, &settings)?;
        (report.best_kernel(), report.best.c, Some(report))
    } else {
        (Kernel::new(config.kernel, config.gamma)?, config.c, None)
    };

    let samples: Vec<(BlobFeature, Label)> = train_idx
        .iter()
        .map(|&i| (features[i].clone(), labels[i]))
        .collect();
    let params = TrainParams {
        balance: config.balance,
        ..TrainParams::new(kernel, c)
    };
    let (model, report) = train(&samples, &params)?;
    let mut correct = 0;
    for &i in &test_idx {
        if model.predict(&features[i])?.label == labels[i] {
            correct += 1;
        }
    }
    Ok(ModelTraining {
        model,
        report,
        cv,
        kernel,
        c,
        held_out_accuracy: correct as f64 / test_idx.len().max(1) as f64,
        train_count: train_idx.len(),
        test_count: test_idx.len(),
    })
}

/// Encodes both patch sets and trains a model.
pub fn train_model_from_patches(
    fire: &[(PathBuf, Frame)],
    nonfire: &[(PathBuf, Frame)],
    codebook: &Codebook,
    config: &PipelineConfig,
) -> Result<ModelTraining> {
    let all: Vec<(PathBuf, Frame)> = fire.iter().chain(nonfire).cloned().collect();
    let features = encode_patches(&all, &config.plan, codebook, config.neighbors)?;
    let labels: Vec<Label> = (0..all.len())
        .map(|i| if i < fire.len() { Label::Fire } else { Label::NonFire })
        .collect();
    train_model_from_features(&features, &labels, config)
}

/// Loads patches and codebook from disk, trains, and writes the model to `out`.
pub fn train_model(
    fire_dir: &Path,
    nonfire_dir: &Path,
    codebook_path: &Path,
    config: &PipelineConfig,
    out: &Path,
) -> Result<ModelTraining> {
    if !codebook_path.is_file() {
        return Err(Error::Config(format!("{} does not exist", codebook_path.display())));
    }
    let codebook = Codebook::load(codebook_path)?;
    let fire = load_patches(fire_dir)?;
    let nonfire = load_patches(nonfire_dir)?;
    let result = train_model_from_patches(&fire, &nonfire, &codebook, config)?;
    result.model.save(out)?;
    Ok(result)
}
