use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::volume::Dims;

/// Voxel-to-supervoxel assignment with per-supervoxel center, size and
/// equivalent-sphere radius. Centers are in voxel coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervoxelPartition {
    dims: Dims,
    spacing: [f64; 3],
    assignment: Vec<u32>,
    centers: Vec<[f64; 3]>,
    radii: Vec<f64>,
    sizes: Vec<usize>,
}

/// Radius of the sphere (disc, for planar grids) holding `size` voxels.
pub(crate) fn equivalent_radius(size: usize, planar: bool) -> f64 {
    let s = size as f64;
    if planar {
        (s / PI).sqrt()
    } else {
        (3.0 * s / (4.0 * PI)).cbrt()
    }
}

impl SupervoxelPartition {
    /// Builds a partition from a dense id array. Ids must cover `[0, count)`.
    pub fn from_assignment(dims: Dims, spacing: [f64; 3], assignment: Vec<u32>) -> Result<Self> {
        if assignment.len() != dims.len() {
            return Err(Error::dims(dims.len(), assignment.len()));
        }
        let count = assignment
            .iter()
            .map(|&a| a as usize + 1)
            .max()
            .unwrap_or(0);
        let mut sizes = vec![0usize; count];
        let mut sums = vec![[0.0f64; 3]; count];
        for (idx, &id) in assignment.iter().enumerate() {
            let [x, y, z] = dims.coords(idx);
            let id = id as usize;
            sizes[id] += 1;
            sums[id][0] += x as f64;
            sums[id][1] += y as f64;
            sums[id][2] += z as f64;
        }
        if let Some(missing) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!(
                "supervoxel ids are not contiguous: id {missing} is unused"
            )));
        }
        let centers = sums
            .iter()
            .zip(&sizes)
            .map(|(s, &n)| {
                let n = n as f64;
                [s[0] / n, s[1] / n, s[2] / n]
            })
            .collect();
        let planar = dims.is_planar();
        let radii = sizes
            .iter()
            .map(|&s| equivalent_radius(s, planar))
            .collect();
        Ok(Self {
            dims,
            spacing,
            assignment,
            centers,
            radii,
            sizes,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn mean_radius(&self) -> f64 {
        self.radii.iter().sum::<f64>() / self.radii.len().max(1) as f64
    }

    /// Centers scaled by voxel spacing.
    pub fn physical_centers(&self) -> Vec<[f64; 3]> {
        let s = self.spacing;
        self.centers
            .iter()
            .map(|c| [c[0] * s[0], c[1] * s[1], c[2] * s[2]])
            .collect()
    }

    /// Voxel indices of every supervoxel, in ascending voxel order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (idx, &id) in self.assignment.iter().enumerate() {
            out[id as usize].push(idx);
        }
        out
    }

    /// Distinct face-adjacent supervoxels of every supervoxel.
    pub fn face_adjacency(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![BTreeSet::new(); self.count()];
        let dims = self.dims;
        for (idx, &a) in self.assignment.iter().enumerate() {
            dims.for_each_face_neighbor(idx, |n| {
                let b = self.assignment[n];
                if b != a {
                    sets[a as usize].insert(b as usize);
                }
            });
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// True when every supervoxel's voxel set is 6-connected.
    pub fn is_connected(&self) -> bool {
        let dims = self.dims;
        let mut seen = vec![false; dims.len()];
        let mut components = vec![0usize; self.count()];
        let mut stack = Vec::new();
        for start in 0..dims.len() {
            if seen[start] {
                continue;
            }
            let id = self.assignment[start];
            components[id as usize] += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                dims.for_each_face_neighbor(v, |n| {
                    if !seen[n] && self.assignment[n] == id {
                        seen[n] = true;
                        stack.push(n);
                    }
                });
            }
        }
        components.iter().all(|&c| c == 1)
    }
}
