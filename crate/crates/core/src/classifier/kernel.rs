use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Rbf,
    Chi2,
}

impl KernelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Some(KernelKind::Linear),
            "rbf" => Some(KernelKind::Rbf),
            "chi2" | "chi-square" => Some(KernelKind::Chi2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Chi2 => "chi2",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            KernelKind::Linear => 0,
            KernelKind::Rbf => 1,
            KernelKind::Chi2 => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(KernelKind::Linear),
            1 => Some(KernelKind::Rbf),
            2 => Some(KernelKind::Chi2),
            _ => None,
        }
    }

    pub fn has_gamma(self) -> bool {
        !matches!(self, KernelKind::Linear)
    }
}

/// SVM kernel. `gamma` is ignored by the linear kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, gamma: f64) -> Result<Self> {
        if kind.has_gamma() && !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{} kernel needs gamma > 0, got {gamma}",
                kind.name()
            )));
        }
        Ok(Kernel { kind, gamma })
    }

    pub fn linear() -> Self {
        Kernel {
            kind: KernelKind::Linear,
            gamma: 1.0,
        }
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        Kernel::new(KernelKind::Rbf, gamma)
    }

    pub fn chi2(gamma: f64) -> Result<Self> {
        Kernel::new(KernelKind::Chi2, gamma)
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        Ok(self.eval_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Chi2 => {
                let mut chi = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let s = x + y;
                    if s != 0.0 {
                        chi += (x - y) * (x - y) / s;
                    }
                }
                (-self.gamma * chi).exp()
            }
        }
    }
}

pub fn kernel_eval(kernel: &Kernel, a: &[f64], b: &[f64]) -> Result<f64> {
    kernel.eval(a, b)
}
