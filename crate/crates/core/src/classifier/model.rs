use std::fs;
use std::path::Path;

use super::kernel::{Kernel, KernelKind};
use super::smo::{solve, Gram, SolverSettings};
use crate::codebook::{BlobFeature, Fingerprint, Reader};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PVSM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Fire,
    NonFire,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Fire => 1.0,
            Label::NonFire => -1.0,
        }
    }

    /// Margin 0 counts as fire.
    pub fn from_margin(margin: f64) -> Self {
        if margin >= 0.0 {
            Label::Fire
        } else {
            Label::NonFire
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub kernel: Kernel,
    pub c: f64,
    /// Down-weight the majority class so both classes carry equal total penalty.
    pub balance: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Keep the dual objective after every SMO step in the report.
    pub record_objective: bool,
}

impl TrainParams {
    pub fn new(kernel: Kernel, c: f64) -> Self {
        TrainParams {
            kernel,
            c,
            balance: true,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
            record_objective: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be > 0".into()));
        }
        Kernel::new(self.kernel.kind, self.kernel.gamma)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    pub violation: f64,
    pub objective_trace: Vec<f64>,
}

/// `(w_pos, w_neg)`. With balancing the minority class keeps weight 1 and the
/// majority class gets `n_minority / n_majority`.
pub fn class_weights(n_pos: usize, n_neg: usize, balance: bool) -> (f64, f64) {
    if !balance || n_pos == 0 || n_neg == 0 {
        return (1.0, 1.0);
    }
    if n_pos >= n_neg {
        (n_neg as f64 / n_pos as f64, 1.0)
    } else {
        (1.0, n_pos as f64 / n_neg as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    kernel: Kernel,
    c: f64,
    class_weights: (f64, f64),
    dim: usize,
    support_vectors: Vec<f64>,
    /// `α_i · y_i` per support vector.
    alphas: Vec<f64>,
    bias: f64,
    codebook: Fingerprint,
}

pub(crate) fn check_rows<T: AsRef<[f64]>>(rows: &[T]) -> Result<usize> {
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(dim)
}

/// Trains on plain vectors. The model is bound to the default (all-zero)
/// fingerprint; see [`train`] for blob features.
pub fn train_vectors<T: AsRef<[f64]> + Sync>(
    rows: &[T],
    labels: &[Label],
    params: &TrainParams,
) -> Result<(TrainedModel, TrainReport)> {
    params.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == Label::Fire).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InsufficientData(format!(
            "need both labels, got {n_pos} fire and {n_neg} non-fire"
        )));
    }
    let dim = check_rows(rows)?;
    let gram = Gram::compute(&params.kernel, rows);
    let idx: Vec<usize> = (0..rows.len()).collect();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let (w_pos, w_neg) = class_weights(n_pos, n_neg, params.balance);
    let cap: Vec<f64> = labels
        .iter()
        .map(|l| params.c * if *l == Label::Fire { w_pos } else { w_neg })
        .collect();
    let sol = solve(
        &gram,
        &idx,
        &y,
        &cap,
        &SolverSettings {
            tolerance: params.tolerance,
            max_iterations: params.max_iterations,
            record_objective: params.record_objective,
        },
    );
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            violation: sol.violation,
        });
    }
    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.extend_from_slice(rows[i].as_ref());
            alphas.push(a * y[i]);
        }
    }
    let model = TrainedModel {
        kernel: params.kernel,
        c: params.c,
        class_weights: (w_pos, w_neg),
        dim,
        support_vectors,
        alphas,
        bias: -sol.rho,
        codebook: Fingerprint::default(),
    };
    let report = TrainReport {
        iterations: sol.iterations,
        violation: sol.violation,
        objective_trace: sol.objective,
    };
    Ok((model, report))
}

/// Trains on encoded blobs; the model records their codebook fingerprint.
pub fn train(
    samples: &[(BlobFeature, Label)],
    params: &TrainParams,
) -> Result<(TrainedModel, TrainReport)> {
    let Some(first) = samples.first() else {
        return Err(Error::InsufficientData("no training samples".into()));
    };
    let fingerprint = first.0.codebook_fingerprint();
    if samples.iter().any(|(f, _)| f.codebook_fingerprint() != fingerprint) {
        return Err(Error::FingerprintMismatch);
    }
    let rows: Vec<&[f64]> = samples.iter().map(|(f, _)| f.combined()).collect();
    let labels: Vec<Label> = samples.iter().map(|(_, l)| *l).collect();
    let (model, report) = train_vectors(&rows, &labels, params)?;
    Ok((model.with_codebook_fingerprint(fingerprint), report))
}

impl TrainedModel {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kernel: Kernel,
        c: f64,
        class_weights: (f64, f64),
        dim: usize,
        support_vectors: Vec<f64>,
        alphas: Vec<f64>,
        bias: f64,
        codebook: Fingerprint,
    ) -> Result<Self> {
        Kernel::new(kernel.kind, kernel.gamma)?;
        if support_vectors.len() != alphas.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: alphas.len() * dim,
                actual: support_vectors.len(),
            });
        }
        let finite = |v: &f64| v.is_finite();
        if !(support_vectors.iter().all(finite) && alphas.iter().all(finite) && bias.is_finite()) {
            return Err(Error::InvalidParameter("model holds non-finite values".into()));
        }
        Ok(TrainedModel {
            kernel,
            c,
            class_weights,
            dim,
            support_vectors,
            alphas,
            bias,
            codebook,
        })
    }

    pub fn with_codebook_fingerprint(mut self, fingerprint: Fingerprint) -> Self {
        self.codebook = fingerprint;
        self
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn class_weights(&self) -> (f64, f64) {
        self.class_weights
    }

    /// Upper bound on `|α|` for a sample with the given label.
    pub fn box_bound(&self, label: Label) -> f64 {
        self.c
            * match label {
                Label::Fire => self.class_weights.0,
                Label::NonFire => self.class_weights.1,
            }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sv_count(&self) -> usize {
        self.alphas.len()
    }

    pub fn support_vector(&self, i: usize) -> &[f64] {
        &self.support_vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn codebook_fingerprint(&self) -> Fingerprint {
        self.codebook
    }

    /// `Σ α_i y_i K(sv_i, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let mut s = self.bias;
        for (i, a) in self.alphas.iter().enumerate() {
            s += a * self.kernel.eval_unchecked(self.support_vector(i), x);
        }
        Ok(s)
    }

    pub fn predict_vector(&self, x: &[f64]) -> Result<Prediction> {
        let margin = self.decision_value(x)?;
        Ok(Prediction {
            label: Label::from_margin(margin),
            margin,
        })
    }

    pub fn predict(&self, feature: &BlobFeature) -> Result<Prediction> {
        if feature.codebook_fingerprint() != self.codebook {
            return Err(Error::FingerprintMismatch);
        }
        self.predict_vector(feature.combined())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + (self.support_vectors.len() + self.alphas.len()) * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.kernel.kind.code().to_le_bytes());
        for v in [self.kernel.gamma, self.c, self.class_weights.0, self.class_weights.1] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.sv_count() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in self.support_vectors.iter().chain(&self.alphas) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.bias.to_le_bytes());
        out.extend_from_slice(&self.codebook.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("model", "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format("model", format!("unsupported version {version}")));
        }
        let code = r.u32()?;
        let kind = KernelKind::from_code(code)
            .ok_or_else(|| Error::format("model", format!("unknown kernel code {code}")))?;
        let gamma = r.f64()?;
        let c = r.f64()?;
        let w_pos = r.f64()?;
        let w_neg = r.f64()?;
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let sv_len = count
            .checked_mul(dim)
            .filter(|&l| l.saturating_add(count).saturating_mul(8) <= bytes.len())
            .ok_or_else(|| Error::format("model", "truncated"))?;
        let support_vectors = (0..sv_len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let alphas = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let bias = r.f64()?;
        let mut fp = [0u8; 32];
        fp.copy_from_slice(r.take(32)?);
        if r.pos != bytes.len() {
            return Err(Error::format("model", "trailing bytes"));
        }
        let kernel = Kernel::new(kind, gamma).map_err(|e| Error::format("model", e.to_string()))?;
        TrainedModel::from_parts(
            kernel,
            c,
            (w_pos, w_neg),
            dim,
            support_vectors,
            alphas,
            bias,
            Fingerprint(fp),
        )
        .map_err(|e| Error::format("model", e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        TrainedModel::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
