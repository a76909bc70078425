use super::{Fingerprint, NNIndex};
use crate::error::{Error, Result};
use crate::features::{GlobalColorHistogram, GLOBAL_DIM};

/// Soft-assignment settings: neighbor count `m` and Gaussian bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderParams {
    pub m: usize,
    pub sigma: f64,
}

impl EncoderParams {
    pub fn new(m: usize, sigma: f64) -> Result<Self> {
        let p = EncoderParams { m, sigma };
        if m < 1 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma {sigma} must be > 0")));
        }
        Ok(p)
    }

    /// `m` neighbors with the bandwidth stored alongside the index's codebook.
    pub fn for_index(index: &NNIndex, m: usize) -> Result<Self> {
        EncoderParams::new(m, index.sigma())
    }

    fn check(&self, index: &NNIndex) -> Result<()> {
        EncoderParams::new(self.m, self.sigma)?;
        if self.m > index.len() {
            return Err(Error::InvalidParameter(format!(
                "m = {} exceeds codebook size {}",
                self.m,
                index.len()
            )));
        }
        Ok(())
    }
}

/// `K_σ(x) = exp(-x² / 2σ²) / sqrt(2πσ)`.
///
/// The prefactor uses `sqrt(2πσ)` rather than the usual `σ·sqrt(2π)`; it
/// cancels in the normalized weights either way.
pub fn gaussian_kernel(x: f64, sigma: f64) -> f64 {
    (-0.5 * x * x / (sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma).sqrt()
}

/// Weights of one descriptor over its `m` nearest words, summing to 1.
///
/// When every kernel value underflows, the nearest word takes weight 1.
pub fn soft_assign(
    descriptor: &[f64],
    index: &NNIndex,
    params: &EncoderParams,
) -> Result<Vec<(usize, f64)>> {
    params.check(index)?;
    if descriptor.len() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: descriptor.len(),
        });
    }
    let neighbors = index.knn(descriptor, params.m);
    let kernels: Vec<f64> = neighbors
        .iter()
        .map(|n| gaussian_kernel(n.distance, params.sigma))
        .collect();
    let total: f64 = kernels.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Ok(vec![(neighbors[0].index, 1.0)]);
    }
    Ok(neighbors
        .iter()
        .zip(&kernels)
        .map(|(n, k)| (n.index, k / total))
        .collect())
}

/// Unnormalized word histogram: bin `i` is the sum of the weights every
/// descriptor gives word `i`. The bins sum to the descriptor count.
pub fn accumulate<T: AsRef<[f64]>>(
    descriptors: &[T],
    index: &NNIndex,
    params: &EncoderParams,
) -> Result<Vec<f64>> {
    let mut hist = vec![0.0; index.len()];
    for d in descriptors {
        for (i, w) in soft_assign(d.as_ref(), index, params)? {
            hist[i] += w;
        }
    }
    Ok(hist)
}

/// Final blob representation: L1-normalized word histogram followed by the
/// 96-bin global LAB histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobFeature {
    combined: Vec<f64>,
    words: usize,
    codebook: Fingerprint,
}

impl BlobFeature {
    pub fn from_parts(bow: &[f64], global: &[f64], codebook: Fingerprint) -> Result<Self> {
        if global.len() != GLOBAL_DIM {
            return Err(Error::DimensionMismatch {
                expected: GLOBAL_DIM,
                actual: global.len(),
            });
        }
        let mut combined = Vec::with_capacity(bow.len() + global.len());
        combined.extend_from_slice(bow);
        combined.extend_from_slice(global);
        Ok(BlobFeature {
            combined,
            words: bow.len(),
            codebook,
        })
    }

    pub fn bow(&self) -> &[f64] {
        &self.combined[..self.words]
    }

    pub fn global(&self) -> &[f64] {
        &self.combined[self.words..]
    }

    pub fn combined(&self) -> &[f64] {
        &self.combined
    }

    pub fn dim(&self) -> usize {
        self.combined.len()
    }

    pub fn codebook_fingerprint(&self) -> Fingerprint {
        self.codebook
    }
}

/// Encodes a blob's descriptors and appends its global histogram.
pub fn encode<T: AsRef<[f64]>>(
    descriptors: &[T],
    index: &NNIndex,
    params: &EncoderParams,
    global: &GlobalColorHistogram,
) -> Result<BlobFeature> {
    if descriptors.is_empty() {
        return Err(Error::EmptyRegion("empty blob"));
    }
    let mut hist = accumulate(descriptors, index, params)?;
    let n = descriptors.len() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    BlobFeature::from_parts(&hist, global.bins(), index.fingerprint())
}
