//! Two-class kernel SVM over blob features.

mod cv;
mod kernel;
mod model;
mod smo;

pub use cv::{cross_validate, powers_of_two, stratified_folds, CvCell, CvReport, CvSettings};
pub use kernel::{kernel_eval, Kernel, KernelKind};
pub use model::{
    class_weights, train, train_vectors, Label, Prediction, TrainParams, TrainReport,
    TrainedModel,
};

#[cfg(test)]
mod tests {
    use super::smo::Gram;
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rbf_gram_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..6).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let gram = Gram::compute(&Kernel::rbf(2.0).unwrap(), &rows);
        let m = DMatrix::from_row_slice(20, 20, gram.values());
        assert_eq!(m, m.transpose());
        let min = m.symmetric_eigen().eigenvalues.min();
        assert!(min >= -1e-8, "{min}");
    }

    #[test]
    fn dual_objective_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..4).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let labels: Vec<Label> = rows
            .iter()
            .map(|r| if r[0] + 0.3 * rng.gen::<f64>() > 0.6 { Label::Fire } else { Label::NonFire })
            .collect();
        for kernel in [Kernel::linear(), Kernel::rbf(3.0).unwrap(), Kernel::chi2(1.0).unwrap()] {
            let mut p = TrainParams::new(kernel, 2.0);
            p.record_objective = true;
            let (_, report) = train_vectors(&rows, &labels, &p).unwrap();
            assert!(report.objective_trace.len() > 2);
            for w in report.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{kernel:?}: {w:?}");
            }
        }
    }
}
