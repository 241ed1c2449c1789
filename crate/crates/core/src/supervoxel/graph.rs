use crate::error::{Error, Result};

use super::partition::SupervoxelPartition;

/// Distance substituted for coincident centers.
pub const COINCIDENT_EPS: f64 = 1e-6;

/// k-nearest-neighbour graph over supervoxel centers. Row `i` holds the
/// neighbours `A_k(i)` and the transition probabilities `p_T(i -> j)`, which
/// are proportional to inverse center distance and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervoxelGraph {
    k: usize,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl SupervoxelGraph {
    /// Builds a graph from explicit rows. Each row must have exactly `k`
    /// distinct neighbours, no self loops, and positive weights summing to one.
    pub fn from_rows(k: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let n = rows.len();
        let mut neighbors = Vec::with_capacity(n * k);
        let mut weights = Vec::with_capacity(n * k);
        for (i, (nb, w)) in rows.into_iter().enumerate() {
            if nb.len() != k || w.len() != k {
                return Err(Error::Config(format!("row {i} must have {k} entries")));
            }
            if nb.iter().any(|&j| j == i || j >= n) {
                return Err(Error::Config(format!("row {i} has a self loop or bad id")));
            }
            if w.iter().any(|&p| p.is_nan() || p <= 0.0) {
                return Err(Error::Config(format!("row {i} has a non-positive weight")));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::UnnormalizedRow { row: i, sum });
            }
            neighbors.extend(nb);
            weights.extend(w);
        }
        Ok(Self {
            k,
            neighbors,
            weights,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }

    pub fn transition(&self, i: usize) -> &[f64] {
        &self.weights[i * self.k..(i + 1) * self.k]
    }

    /// One application of the row-stochastic operator: `out_i = sum_j p_T(i->j) p_j`.
    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .neighbors(i)
                .iter()
                .zip(self.transition(i))
                .map(|(&j, &w)| w * p[j])
                .sum();
        }
    }
}

/// Builds the k-NN graph over spacing-scaled supervoxel centers.
pub fn build_graph(partition: &SupervoxelPartition, k: usize) -> Result<SupervoxelGraph> {
    build_graph_from_centers(&partition.physical_centers(), k)
}

/// Builds the k-NN graph over arbitrary points. Distance ties go to the lower id.
pub fn build_graph_from_centers(centers: &[[f64; 3]], k: usize) -> Result<SupervoxelGraph> {
    let n = centers.len();
    if k == 0 || k >= n {
        return Err(Error::Config(format!(
            "k = {k} requires more than k of {n} supervoxels"
        )));
    }
    let mut neighbors = Vec::with_capacity(n * k);
    let mut weights = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for (i, ci) in centers.iter().enumerate() {
        cand.clear();
        cand.extend(
            centers
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, cj)| (dist(ci, cj), j)),
        );
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if cand.len() > k {
            cand.select_nth_unstable_by(k - 1, order);
            cand.truncate(k);
        }
        cand.sort_by(order);
        let inv: Vec<f64> = cand
            .iter()
            .map(|&(d, _)| 1.0 / d.max(COINCIDENT_EPS))
            .collect();
        let total: f64 = inv.iter().sum();
        neighbors.extend(cand.iter().map(|&(_, j)| j));
        weights.extend(inv.iter().map(|w| w / total));
    }
    Ok(SupervoxelGraph {
        k,
        neighbors,
        weights,
    })
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Mean number of face-adjacent supervoxels, rounded and clamped to `[7, 15]`.
pub fn default_k(partition: &SupervoxelPartition) -> usize {
    let adj = partition.face_adjacency();
    let mean = adj.iter().map(Vec::len).sum::<usize>() as f64 / adj.len().max(1) as f64;
    let k = (mean.round() as usize).clamp(7, 15);
    k.min(partition.count().saturating_sub(1)).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn inverse_distance_weights() {
        let centers = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [-3.0, 0.0, 0.0],
            [10.0, 0.0, 0.0],
        ];
        let g = build_graph_from_centers(&centers, 2).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2]);
        let p = g.transition(0);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn equidistant_neighbors_share_evenly() {
        let centers = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
        ];
        let g = build_graph_from_centers(&centers, 4).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3, 4]);
        assert!(g.transition(0).iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn coincident_centers_dominate() {
        let centers = [[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]];
        let g = build_graph_from_centers(&centers, 2).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert!(g.transition(0)[0] > 0.999_998);
    }

    #[test]
    fn k_too_large() {
        assert!(build_graph_from_centers(&[[0.0; 3], [1.0; 3]], 2).is_err());
    }

    #[test]
    fn rows_sum_to_one_on_random_cloud() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let centers: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                [
                    rng.random_range(0.0..30.0),
                    rng.random_range(0.0..30.0),
                    rng.random_range(0.0..30.0),
                ]
            })
            .collect();
        let g = build_graph_from_centers(&centers, 9).unwrap();
        for i in 0..g.len() {
            let sum: f64 = g.transition(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            assert!(g.transition(i).iter().all(|&p| p > 0.0));
            assert!(!g.neighbors(i).contains(&i));
        }
    }

    proptest! {
        #[test]
        fn relabeling_is_equivariant(
            pts in proptest::collection::vec((0.0f64..20.0, 0.0f64..20.0, 0.0f64..20.0), 8..20),
            a in 0usize..8, b in 0usize..8,
        ) {
            let centers: Vec<[f64; 3]> = pts.iter().map(|&(x, y, z)| [x, y, z]).collect();
            let mut swapped = centers.clone();
            swapped.swap(a, b);
            let relabel = |i: usize| if i == a { b } else if i == b { a } else { i };
            let g = build_graph_from_centers(&centers, 4).unwrap();
            let h = build_graph_from_centers(&swapped, 4).unwrap();
            for i in 0..centers.len() {
                let mut lhs: Vec<(usize, u64)> = g.neighbors(i).iter().map(|&j| relabel(j))
                    .zip(g.transition(i).iter().map(|p| p.to_bits())).collect();
                let mut rhs: Vec<(usize, u64)> = h.neighbors(relabel(i)).iter().cloned()
                    .zip(h.transition(relabel(i)).iter().map(|p| p.to_bits())).collect();
                lhs.sort();
                rhs.sort();
                // exact distance ties may resolve differently after relabeling
                let ties = {
                    let mut d: Vec<f64> = centers.iter().enumerate().filter(|&(j, _)| j != i)
                        .map(|(_, c)| dist(c, &centers[i])).collect();
                    d.sort_by(f64::total_cmp);
                    d.windows(2).any(|w| w[0] == w[1])
                };
                if !ties {
                    prop_assert_eq!(lhs.iter().map(|x| x.0).collect::<Vec<_>>(), rhs.iter().map(|x| x.0).collect::<Vec<_>>());
                }
            }
        }
    }
}
