use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kernel::{Kernel, KernelKind};
use super::model::{check_rows, class_weights, Label};
use super::smo::{solve, Gram, SolverSettings};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CvSettings {
    pub folds: usize,
    pub c_values: Vec<f64>,
    /// Ignored for the linear kernel.
    pub gamma_values: Vec<f64>,
    pub balance: bool,
    pub seed: u64,
    pub tolerance: f64,
    /// Per-solve cap; a capped solve is scored from its last iterate.
    pub max_iterations: usize,
}

/// `2^lo, 2^(lo+1), …, 2^hi`.
pub fn powers_of_two(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            folds: 5,
            c_values: powers_of_two(-8, 8),
            gamma_values: powers_of_two(-8, 8),
            balance: true,
            seed: 0,
            tolerance: 1e-3,
            max_iterations: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvCell {
    pub c: f64,
    /// `None` for the linear kernel.
    pub gamma: Option<f64>,
    /// Mean of the per-fold accuracies.
    pub accuracy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub kind: KernelKind,
    pub folds: usize,
    /// Cells ordered by gamma, then C.
    pub cells: Vec<CvCell>,
    /// First cell reaching the maximum accuracy.
    pub best: CvCell,
}

impl CvReport {
    pub fn best_kernel(&self) -> Kernel {
        Kernel {
            kind: self.kind,
            gamma: self.best.gamma.unwrap_or(1.0),
        }
    }
}

/// Fold id per sample. Each class is shuffled and dealt round-robin, the
/// deal continuing across classes so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need >= 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for class in [Label::Fire, Label::NonFire] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::InsufficientData(format!(
                "{} samples of {class:?} for {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            out[i] = next % folds;
            next += 1;
        }
    }
    Ok(out)
}

struct FoldData {
    train: Vec<usize>,
    test: Vec<usize>,
    y: Vec<f64>,
    weights: (f64, f64),
}

fn fold_accuracy(gram: &Gram, fold: &FoldData, labels: &[Label], c: f64, s: &CvSettings) -> (f64, bool) {
    let cap: Vec<f64> = fold
        .y
        .iter()
        .map(|&y| c * if y > 0.0 { fold.weights.0 } else { fold.weights.1 })
        .collect();
    let sol = solve(
        gram,
        &fold.train,
        &fold.y,
        &cap,
        &SolverSettings {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            record_objective: false,
        },
    );
    let mut correct = 0;
    for &t in &fold.test {
        let mut f = -sol.rho;
        for (k, &i) in fold.train.iter().enumerate() {
            if sol.alpha[k] > 0.0 {
                f += sol.alpha[k] * fold.y[k] * gram.get(t, i);
            }
        }
        if Label::from_margin(f) == labels[t] {
            correct += 1;
        }
    }
    (correct as f64 / fold.test.len() as f64, sol.converged)
}

/// Grid search over `C × γ` scored by stratified k-fold accuracy.
pub fn cross_validate<T: AsRef<[f64]> + Sync>(
    rows: &[T],
    labels: &[Label],
    kind: KernelKind,
    settings: &CvSettings,
) -> Result<CvReport> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    check_rows(rows)?;
    if settings.c_values.is_empty() || (kind.has_gamma() && settings.gamma_values.is_empty()) {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    for &c in &settings.c_values {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid C {c} must be > 0")));
        }
    }
    let assignment = stratified_folds(labels, settings.folds, settings.seed)?;
    let folds: Vec<FoldData> = (0..settings.folds)
        .map(|f| {
            let train: Vec<usize> = (0..rows.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..rows.len()).filter(|&i| assignment[i] == f).collect();
            let y: Vec<f64> = train.iter().map(|&i| labels[i].sign()).collect();
            let n_pos = y.iter().filter(|&&v| v > 0.0).count();
            let weights = class_weights(n_pos, y.len() - n_pos, settings.balance);
            FoldData {
                train,
                test,
                y,
                weights,
            }
        })
        .collect();

    let gammas: Vec<Option<f64>> = if kind.has_gamma() {
        settings.gamma_values.iter().map(|&g| Some(g)).collect()
    } else {
        vec![None]
    };
    let mut cells = Vec::with_capacity(gammas.len() * settings.c_values.len());
    for gamma in gammas {
        let kernel = Kernel::new(kind, gamma.unwrap_or(1.0))?;
        let gram = Gram::compute(&kernel, rows);
        let row: Vec<CvCell> = settings
            .c_values
            .par_iter()
            .map(|&c| {
                let mut acc = 0.0;
                let mut converged = true;
                for fold in &folds {
                    let (a, ok) = fold_accuracy(&gram, fold, labels, c, settings);
                    acc += a;
                    converged &= ok;
                }
                if !converged {
                    log::warn!("cv cell C={c} gamma={gamma:?} hit the iteration cap");
                }
                CvCell {
                    c,
                    gamma,
                    accuracy: acc / folds.len() as f64,
                    converged,
                }
            })
            .collect();
        cells.extend(row);
    }
    let best = *cells
        .iter()
        .fold(None::<&CvCell>, |b, c| match b {
            Some(b) if b.accuracy >= c.accuracy => Some(b),
            _ => Some(c),
        })
        .expect("non-empty grid");
    Ok(CvReport {
        kind,
        folds: settings.folds,
        cells,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<Label> = (0..23)
            .map(|i| if i % 3 == 0 { Label::Fire } else { Label::NonFire })
            .collect();
        let a = stratified_folds(&labels, 5, 9).unwrap();
        assert_eq!(a, stratified_folds(&labels, 5, 9).unwrap());
        assert_ne!(a, stratified_folds(&labels, 5, 10).unwrap());
        for f in 0..5 {
            let fire = (0..23).filter(|&i| a[i] == f && labels[i] == Label::Fire).count();
            assert!((1..=2).contains(&fire));
            let size = a.iter().filter(|&&x| x == f).count();
            assert!((4..=5).contains(&size));
        }
    }

    #[test]
    fn too_few_per_class() {
        let labels = vec![Label::Fire, Label::Fire, Label::NonFire, Label::NonFire];
        assert!(matches!(stratified_folds(&labels, 5, 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn grid_has_seventeen_powers() {
        let g = powers_of_two(-8, 8);
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 1.0 / 256.0);
        assert_eq!(g[16], 256.0);
    }

    #[test]
    fn linear_grid_collapses_gamma() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<Label> = (0..20)
            .map(|i| if i < 10 { Label::NonFire } else { Label::Fire })
            .collect();
        let r = cross_validate(&rows, &labels, KernelKind::Linear, &CvSettings::default()).unwrap();
        assert_eq!(r.cells.len(), 17);
        assert!(r.cells.iter().all(|c| c.gamma.is_none()));
    }
}
