use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kdtree::squared_distance;
use super::Codebook;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansReport {
    /// Within-cluster SSE measured at each assignment step.
    pub sse_trace: Vec<f64>,
    /// SSE of the final centers.
    pub final_sse: f64,
    pub iterations: usize,
    /// Number of empty clusters that were re-seeded.
    pub reseeded: usize,
}

fn nearest(centers: &[f64], dim: usize, p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.chunks_exact(dim).enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn flatten<T: AsRef<[f64]>>(points: &[T]) -> Result<(Vec<f64>, usize)> {
    let dim = points.first().map_or(0, |p| p.as_ref().len());
    let mut flat = Vec::with_capacity(points.len() * dim);
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        flat.extend_from_slice(p);
    }
    Ok((flat, dim))
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// Runs `iterations` rounds or stops as soon as no assignment changes.
/// Empty clusters are moved onto the point farthest from its own center.
/// The returned codebook's bandwidth is the mean distance from each point
/// to its nearest final center.
pub fn kmeans<T: AsRef<[f64]> + Sync>(
    points: &[T],
    k: usize,
    iterations: usize,
    seed: u64,
) -> Result<(Codebook, KMeansReport)> {
    if k == 0 || iterations == 0 {
        return Err(Error::InvalidParameter("k and iterations must be >= 1".into()));
    }
    if points.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} descriptors for k = {k}",
            points.len()
        )));
    }
    let (data, dim) = flatten(points)?;
    if dim == 0 {
        return Err(Error::InvalidParameter("zero-dimensional points".into()));
    }
    let n = points.len();
    let point = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(k * dim);
    centers.extend_from_slice(point(rng.gen_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(point(i), &centers[..dim])).collect();
    for chosen in 1..k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::InsufficientData(format!(
                "only {chosen} distinct descriptors for k = {k}"
            )));
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("positive total implies a candidate");
        centers.extend_from_slice(point(pick));
        let c = &centers[chosen * dim..];
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(squared_distance(point(i), c));
        }
    }

    let mut assign = vec![usize::MAX; n];
    let mut report = KMeansReport {
        sse_trace: Vec::with_capacity(iterations),
        final_sse: 0.0,
        iterations: 0,
        reseeded: 0,
    };
    for _ in 0..iterations {
        let fresh: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest(&centers, dim, point(i)))
            .collect();
        let changed = fresh.iter().zip(&assign).any(|(f, &a)| f.0 != a);
        assign.iter_mut().zip(&fresh).for_each(|(a, f)| *a = f.0);
        report.sse_trace.push(fresh.iter().map(|f| f.1).sum());
        report.iterations += 1;
        if !changed {
            break;
        }

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centers[c * dim..(c + 1) * dim]
                    .iter_mut()
                    .zip(&sums[c * dim..(c + 1) * dim])
                {
                    *dst = s * inv;
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .map(|i| (i, fresh[i].1))
                    .fold(None::<(usize, f64)>, |best, cur| match best {
                        Some(b) if b.1 >= cur.1 => Some(b),
                        _ => Some(cur),
                    });
                if let Some((i, _)) = far {
                    taken[i] = true;
                    centers[c * dim..(c + 1) * dim].copy_from_slice(point(i));
                    report.reseeded += 1;
                }
            }
        }
    }

    let final_d: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| nearest(&centers, dim, point(i)).1)
        .collect();
    report.final_sse = final_d.iter().sum();
    let sigma = final_d.iter().map(|d| d.sqrt()).sum::<f64>() / n as f64;
    // all points sitting exactly on centers: any positive bandwidth works
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    let codebook = Codebook::from_flat(dim, centers, sigma)?;
    Ok((codebook, report))
}

/// Mean Euclidean distance from each point to its nearest codebook center.
pub fn mean_nearest_distance<T: AsRef<[f64]> + Sync>(points: &[T], codebook: &Codebook) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let total: f64 = points
        .par_iter()
        .map(|p| nearest(codebook.centers_flat(), codebook.dim(), p.as_ref()).1.sqrt())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sse(points: &[Vec<f64>], cb: &Codebook) -> f64 {
        points
            .iter()
            .map(|p| {
                (0..cb.k())
                    .map(|i| squared_distance(p, cb.center(i)))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    #[test]
    fn k_points_become_the_centers() {
        let pts = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 2.0], vec![1.0, 9.0]];
        for seed in 0..5 {
            let (cb, _) = kmeans(&pts, 4, 10, seed).unwrap();
            let mut got: Vec<Vec<f64>> = (0..4).map(|i| cb.center(i).to_vec()).collect();
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut want = pts.clone();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(got, want);
        }
    }

    #[test]
    fn two_groups_give_group_means() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 2.0], vec![100.0, 0.0], vec![100.0, 4.0]];
        let (cb, _) = kmeans(&pts, 2, 50, 7).unwrap();
        let mut got: Vec<Vec<f64>> = (0..2).map(|i| cb.center(i).to_vec()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![vec![0.0, 1.0], vec![100.0, 2.0]]);
    }

    #[test]
    fn sse_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let pts: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let (cb, report) = kmeans(&pts, 5, 50, 1).unwrap();
        // independent recomputation of the final SSE
        assert!((sse(&pts, &cb) - report.final_sse).abs() < 1e-9);
        let mut trace = report.sse_trace.clone();
        trace.push(report.final_sse);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{trace:?}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..8).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let a = kmeans(&pts, 10, 20, 42).unwrap().0;
        let b = kmeans(&pts, 10, 20, 42).unwrap().0;
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn errors() {
        let pts = vec![vec![1.0], vec![2.0]];
        assert!(matches!(kmeans(&pts, 3, 5, 0), Err(Error::InsufficientData(_))));
        assert!(kmeans(&pts, 1, 0, 0).is_err());
        let same = vec![vec![1.0, 1.0]; 10];
        assert!(matches!(kmeans(&same, 2, 5, 0), Err(Error::InsufficientData(_))));
        let nan = vec![vec![1.0], vec![f64::NAN]];
        assert!(matches!(kmeans(&nan, 1, 5, 0), Err(Error::NonFinite(1))));
    }

    #[test]
    fn sigma_is_mean_nearest_distance() {
        let pts = vec![vec![0.0], vec![2.0], vec![10.0], vec![14.0]];
        let (cb, _) = kmeans(&pts, 2, 20, 3).unwrap();
        assert!((cb.sigma() - 1.5).abs() < 1e-12, "{}", cb.sigma());
        assert!((mean_nearest_distance(&pts, &cb) - 1.5).abs() < 1e-12);
    }
}
