//! Visual vocabulary: k-means training, an exact k-d tree over the words,
//! and Gaussian soft-assignment encoding of descriptor sets.

mod encode;
mod file;
mod kdtree;
mod kmeans;

pub use encode::{
    accumulate, encode, gaussian_kernel, soft_assign, BlobFeature, EncoderParams,
};
pub use kdtree::{linear_scan_knn, squared_distance, Neighbor, NNIndex};
pub use kmeans::{kmeans, mean_nearest_distance, KMeansReport};
pub(crate) use file::Reader;

use std::fmt;

use crate::error::{Error, Result};

/// SHA-256 of a codebook's serialized form. Models record the fingerprint
/// of the codebook their features were encoded against.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

/// What a codebook was trained on. Kept in memory only; the file format
/// stores centers and bandwidth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub descriptor_count: usize,
    pub plan: String,
}

/// `k` cluster centers of equal dimension plus the soft-assignment bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    centers: Vec<f64>,
    sigma: f64,
    provenance: Option<Provenance>,
}

impl Codebook {
    /// Validates and builds a codebook from row-major centers.
    pub fn from_flat(dim: usize, centers: Vec<f64>, sigma: f64) -> Result<Self> {
        if dim == 0 || centers.is_empty() || centers.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form centers of dimension {dim}",
                centers.len()
            )));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("codebook center is not finite".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma {sigma} must be > 0")));
        }
        let cb = Codebook {
            dim,
            centers,
            sigma,
            provenance: None,
        };
        if let Some((a, b)) = cb.find_duplicate() {
            return Err(Error::InsufficientData(format!(
                "centers {a} and {b} are identical"
            )));
        }
        Ok(cb)
    }

    pub fn new(centers: &[Vec<f64>], sigma: f64) -> Result<Self> {
        let dim = centers.first().map_or(0, Vec::len);
        if let Some(bad) = centers.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Codebook::from_flat(dim, centers.concat(), sigma)
    }

    fn find_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| {
            self.center(a)
                .iter()
                .zip(self.center(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order
            .windows(2)
            .find(|w| self.center(w[0]) == self.center(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    pub fn k(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers_flat(&self) -> &[f64] {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn fingerprint(&self) -> Fingerprint {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        Fingerprint(out)
    }

    pub fn index(&self) -> NNIndex {
        NNIndex::build(self)
    }
}
