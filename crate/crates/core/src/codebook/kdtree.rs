use super::{Codebook, Fingerprint};

const LEAF_SIZE: usize = 8;

/// A codebook word returned by a nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    /// Euclidean distance to the query.
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact k-d tree over codebook centers. Immutable after construction.
///
/// Results are ordered by distance, ties broken by lower center index, so
/// they agree with [`linear_scan_knn`] element for element.
#[derive(Debug, Clone)]
pub struct NNIndex {
    dim: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    fingerprint: Fingerprint,
    sigma: f64,
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Reference m-NN by scanning every point of a row-major `points` array.
pub fn linear_scan_knn(points: &[f64], dim: usize, query: &[f64], m: usize) -> Vec<Neighbor> {
    let mut all: Vec<(f64, usize)> = points
        .chunks_exact(dim)
        .enumerate()
        .map(|(i, p)| (squared_distance(query, p), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(m);
    all.into_iter()
        .map(|(d2, index)| Neighbor {
            index,
            distance: d2.sqrt(),
        })
        .collect()
}

/// Sorted candidate list holding the best `m` (distance², index) pairs.
struct Candidates {
    m: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn worst(&self) -> f64 {
        if self.items.len() < self.m {
            f64::INFINITY
        } else {
            self.items[self.m - 1].0
        }
    }

    fn offer(&mut self, d2: f64, index: usize) {
        let key = (d2, index);
        let full = self.items.len() == self.m;
        if full {
            let last = self.items[self.m - 1];
            if (key.0, key.1) >= (last.0, last.1) {
                return;
            }
        }
        let pos = self
            .items
            .partition_point(|&(d, i)| d < key.0 || (d == key.0 && i < key.1));
        self.items.insert(pos, key);
        if self.items.len() > self.m {
            self.items.pop();
        }
    }
}

impl NNIndex {
    pub fn build(codebook: &Codebook) -> Self {
        let dim = codebook.dim();
        let mut index = NNIndex {
            dim,
            points: codebook.centers_flat().to_vec(),
            order: (0..codebook.k()).collect(),
            nodes: Vec::new(),
            fingerprint: codebook.fingerprint(),
            sigma: codebook.sigma(),
        };
        let n = index.order.len();
        index.build_node(0, n);
        index
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.points[i * self.dim + axis]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut axis = 0;
        let mut best_spread = -1.0;
        for a in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.coord(i, a);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                axis = a;
            }
        }
        if best_spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut slice = self.order[start..end].to_vec();
        slice.sort_by(|&a, &b| {
            self.coord(a, axis)
                .total_cmp(&self.coord(b, axis))
                .then(a.cmp(&b))
        });
        self.order[start..end].copy_from_slice(&slice);
        let mid = start + (end - start) / 2;
        let value = self.coord(self.order[mid], axis);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Fingerprint of the codebook this index was built from.
    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    /// Bandwidth stored with the codebook.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// The `m` nearest centers to `query` (all of them when `m >= len`).
    pub fn knn(&self, query: &[f64], m: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim, "query dimension");
        let m = m.min(self.len());
        if m == 0 {
            return Vec::new();
        }
        let mut cand = Candidates {
            m,
            items: Vec::with_capacity(m + 1),
        };
        self.search(0, query, &mut cand);
        cand.items
            .into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect()
    }

    fn search(&self, node: usize, query: &[f64], cand: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    cand.offer(squared_distance(query, self.center(i)), i);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, cand);
                // equality still visits the far side so index tie-breaks stay exact
                if diff * diff <= cand.worst() {
                    self.search(far, query, cand);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_codebook(k: usize, dim: usize, seed: u64) -> Codebook {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
            .collect();
        Codebook::new(&c, 1.0).unwrap()
    }

    /// Independent oracle: full sort by (distance², index).
    fn brute(cb: &Codebook, q: &[f64], m: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = (0..cb.k())
            .map(|i| {
                let d2: f64 = cb.center(i).iter().zip(q).map(|(a, b)| (b - a) * (b - a)).sum();
                (i, d2)
            })
            .collect();
        v.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        v.truncate(m);
        v.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect()
    }

    #[test]
    fn center_is_its_own_nearest() {
        let cb = random_codebook(100, 5, 1);
        let idx = cb.index();
        for i in [0, 17, 99] {
            let n = idx.knn(cb.center(i), 1);
            assert_eq!(n[0].index, i);
            assert_eq!(n[0].distance, 0.0);
        }
    }

    #[test]
    fn full_query_returns_everything_sorted() {
        let cb = random_codebook(60, 4, 2);
        let idx = cb.index();
        let n = idx.knn(&[0.5; 4], 500);
        assert_eq!(n.len(), 60);
        assert!(n.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn agrees_with_brute_force() {
        let cb = random_codebook(300, 12, 3);
        let idx = cb.index();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let q: Vec<f64> = (0..12).map(|_| rng.gen::<f64>() * 1.2 - 0.1).collect();
            let got: Vec<(usize, f64)> =
                idx.knn(&q, 10).iter().map(|n| (n.index, n.distance)).collect();
            assert_eq!(got, brute(&cb, &q, 10));
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        // four centers equidistant from the origin
        let cb = Codebook::new(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            1.0,
        )
        .unwrap();
        let n = cb.index().knn(&[0.0, 0.0], 2);
        assert_eq!((n[0].index, n[1].index), (0, 1));
    }

    #[test]
    fn grid_with_many_ties() {
        let mut c = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                c.push(vec![x as f64, y as f64]);
            }
        }
        let cb = Codebook::new(&c, 1.0).unwrap();
        let idx = cb.index();
        for q in [[4.5, 4.5], [0.0, 0.0], [3.0, 7.5], [9.5, 0.5]] {
            let got: Vec<(usize, f64)> =
                idx.knn(&q, 7).iter().map(|n| (n.index, n.distance)).collect();
            assert_eq!(got, brute(&cb, &q, 7), "{q:?}");
        }
    }
}
