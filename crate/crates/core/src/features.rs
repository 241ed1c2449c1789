//! Per-supervoxel intensity, histogram and filter-bank features.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::supervoxel::SupervoxelPartition;
use crate::volume::{Dims, Volume};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Bins of the intensity histogram over `[0, 1]`.
    pub histogram_bins: usize,
    pub gaussian_sigmas: Vec<f64>,
    pub log_sigmas: Vec<f64>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            histogram_bins: 10,
            gaussian_sigmas: vec![1.0, 2.0, 4.0],
            log_sigmas: vec![1.0, 2.0],
        }
    }
}

/// One feature row per supervoxel with a fixed, named column order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = names.len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != d {
                return Err(Error::dims(d, format!("{} in row {i}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("row {i} has a non-finite feature")));
            }
            data.extend(r);
        }
        Ok(Self { names, data })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.data.len() / self.names.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim().max(1))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.names).map_err(csv_err)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn convolve_axis(src: &[f64], dims: Dims, axis: usize, kernel: &[f64]) -> Vec<f64> {
    let ext = dims.as_array();
    if ext[axis] == 1 {
        return src.to_vec();
    }
    let stride = [1, dims.nx, dims.nx * dims.ny][axis];
    let radius = (kernel.len() / 2) as isize;
    let n = ext[axis];
    let mut out = vec![0.0; src.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let pos = dims.coords(idx)[axis];
        let base = idx - pos * stride;
        *o = kernel
            .iter()
            .enumerate()
            .map(|(t, w)| w * src[base + mirror(pos as isize + t as isize - radius, n) * stride])
            .sum();
    }
    out
}

/// Separable Gaussian smoothing with mirrored borders.
pub fn gaussian_smooth(src: &[f64], dims: Dims, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let mut v = src.to_vec();
    for axis in 0..3 {
        v = convolve_axis(&v, dims, axis, &k);
    }
    v
}

fn for_each_axis_pair(src: &[f64], dims: Dims, idx: usize, mut f: impl FnMut(f64, f64, f64)) {
    let c = dims.coords(idx);
    let ext = dims.as_array();
    let strides = [1, dims.nx, dims.nx * dims.ny];
    for a in 0..3 {
        if ext[a] == 1 {
            continue;
        }
        let base = idx - c[a] * strides[a];
        let lo = src[base + mirror(c[a] as isize - 1, ext[a]) * strides[a]];
        let hi = src[base + mirror(c[a] as isize + 1, ext[a]) * strides[a]];
        f(lo, src[idx], hi);
    }
}

fn gradient_magnitude(src: &[f64], dims: Dims) -> Vec<f64> {
    (0..src.len())
        .map(|idx| {
            let mut sq = 0.0;
            for_each_axis_pair(src, dims, idx, |lo, _, hi| sq += ((hi - lo) / 2.0).powi(2));
            sq.sqrt()
        })
        .collect()
}

fn laplacian(src: &[f64], dims: Dims) -> Vec<f64> {
    (0..src.len())
        .map(|idx| {
            let mut acc = 0.0;
            for_each_axis_pair(src, dims, idx, |lo, mid, hi| acc += lo + hi - 2.0 * mid);
            acc
        })
        .collect()
}

/// Column names produced by [`extract_features`] for `config`.
pub fn feature_names(config: &FeatureConfig) -> Vec<String> {
    let mut names = vec!["mean".to_string(), "std".to_string()];
    names.extend((0..config.histogram_bins).map(|b| format!("hist_{b}")));
    names.extend(config.gaussian_sigmas.iter().map(|s| format!("gauss_s{s}")));
    names.push("grad_mag".into());
    names.extend(config.log_sigmas.iter().map(|s| format!("log_s{s}")));
    names.push("radius".into());
    names
}

/// Computes one feature row per supervoxel.
pub fn extract_features(
    volume: &Volume,
    partition: &SupervoxelPartition,
    config: &FeatureConfig,
) -> Result<FeatureMatrix> {
    let dims = volume.dims();
    if dims != partition.dims() {
        return Err(Error::dims(dims, partition.dims()));
    }
    if config.histogram_bins == 0 {
        return Err(Error::Config("histogram_bins must be positive".into()));
    }
    let raw: Vec<f64> = volume.data().iter().map(|&v| v as f64).collect();

    // voxelwise maps averaged per supervoxel after the histogram block
    let mut maps: Vec<Vec<f64>> = config
        .gaussian_sigmas
        .iter()
        .map(|&s| gaussian_smooth(&raw, dims, s))
        .collect();
    maps.push(gradient_magnitude(&gaussian_smooth(&raw, dims, 1.0), dims));
    for &s in &config.log_sigmas {
        let lap = laplacian(&gaussian_smooth(&raw, dims, s), dims);
        maps.push(lap.into_iter().map(|v| v * s * s).collect());
    }

    let bins = config.histogram_bins;
    let n = partition.count();
    let d = 2 + bins + maps.len() + 1;
    let mut rows = vec![vec![0.0; d]; n];
    let assignment = partition.assignment();
    for (idx, &id) in assignment.iter().enumerate() {
        let row = &mut rows[id as usize];
        let v = raw[idx];
        row[0] += v;
        let bin = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        row[2 + bin] += 1.0;
        for (m, map) in maps.iter().enumerate() {
            row[2 + bins + m] += map[idx];
        }
    }
    let sizes = partition.sizes();
    for (id, row) in rows.iter_mut().enumerate() {
        let s = sizes[id] as f64;
        row[0] /= s;
        for v in &mut row[2..] {
            *v /= s;
        }
        row[d - 1] = partition.radii()[id];
    }
    // second pass for the standard deviation around the mean
    for (idx, &id) in assignment.iter().enumerate() {
        let row = &mut rows[id as usize];
        row[1] += (raw[idx] - row[0]).powi(2);
    }
    for (id, row) in rows.iter_mut().enumerate() {
        row[1] = (row[1] / sizes[id] as f64).sqrt();
    }
    FeatureMatrix::new(feature_names(config), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supervoxel::slic_oversegment;

    #[test]
    fn default_dimensionality() {
        assert_eq!(feature_names(&FeatureConfig::default()).len(), 19);
    }

    #[test]
    fn constant_volume_rows_identical() {
        let vol = Volume::filled(Dims::cube(12), 0.42).unwrap();
        let p = slic_oversegment(&vol, 8, 0.2).unwrap();
        let f = extract_features(&vol, &p, &FeatureConfig::default()).unwrap();
        let std = f.column_index("std").unwrap();
        for r in f.rows() {
            assert_eq!(r, f.row(0));
            assert_eq!(r[std], 0.0);
        }
    }

    #[test]
    fn histograms_sum_to_one() {
        let dims = Dims::cube(10);
        let data = (0..dims.len())
            .map(|i| ((i * 37) % 101) as f32 / 80.0 - 0.1)
            .collect();
        let vol = Volume::new(dims, [1.0; 3], data).unwrap();
        let p = slic_oversegment(&vol, 12, 0.3).unwrap();
        let f = extract_features(&vol, &p, &FeatureConfig::default()).unwrap();
        let h0 = f.column_index("hist_0").unwrap();
        for r in f.rows() {
            let s: f64 = r[h0..h0 + 10].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hand_built_means() {
        // 4x1x1: ids [0, 0, 1, 1], intensities [0.1, 0.3, 0.5, 0.9]
        let dims = Dims::new(4, 1, 1);
        let vol = Volume::new(dims, [1.0; 3], vec![0.1, 0.3, 0.5, 0.9]).unwrap();
        let p = SupervoxelPartition::from_assignment(dims, [1.0; 3], vec![0, 0, 1, 1]).unwrap();
        let f = extract_features(&vol, &p, &FeatureConfig::default()).unwrap();
        let expect = [
            (0.1f32 as f64 + 0.3f32 as f64) / 2.0,
            (0.5f32 as f64 + 0.9f32 as f64) / 2.0,
        ];
        assert!((f.row(0)[0] - expect[0]).abs() < 1e-12);
        assert!((f.row(1)[0] - expect[1]).abs() < 1e-12);
        // std of a pair is half its spread
        assert!((f.row(1)[1] - (0.9f32 as f64 - 0.5f32 as f64) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_preserves_constants() {
        let dims = Dims::new(5, 4, 3);
        let out = gaussian_smooth(&vec![2.5; dims.len()], dims, 2.0);
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn shift_moves_means_not_derivatives() {
        let dims = Dims::cube(16);
        let data: Vec<f32> = (0..dims.len())
            .map(|i| {
                let [x, y, z] = dims.coords(i);
                ((x as f32 * 0.4).sin() + (y as f32 * 0.3).cos() + z as f32 * 0.05) * 0.2 + 0.4
            })
            .collect();
        let shifted: Vec<f32> = data.iter().map(|v| v + 0.25).collect();
        let a = Volume::new(dims, [1.0; 3], data).unwrap();
        let b = Volume::new(dims, [1.0; 3], shifted).unwrap();
        let p = slic_oversegment(&a, 27, 10.0).unwrap();
        let cfg = FeatureConfig::default();
        let fa = extract_features(&a, &p, &cfg).unwrap();
        let fb = extract_features(&b, &p, &cfg).unwrap();
        let cols = |names: &[&str]| {
            names
                .iter()
                .map(|n| fa.column_index(n).unwrap())
                .collect::<Vec<_>>()
        };
        for i in 0..p.count() {
            for c in cols(&["mean", "gauss_s1", "gauss_s2", "gauss_s4"]) {
                assert!((fb.row(i)[c] - fa.row(i)[c] - 0.25).abs() < 1e-6);
            }
            for c in cols(&["std", "grad_mag", "log_s1", "log_s2"]) {
                assert!((fb.row(i)[c] - fa.row(i)[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dims_mismatch() {
        let vol = Volume::filled(Dims::cube(4), 0.0).unwrap();
        let other = Volume::filled(Dims::cube(3), 0.0).unwrap();
        let p = slic_oversegment(&other, 1, 0.2).unwrap();
        assert!(matches!(
            extract_features(&vol, &p, &FeatureConfig::default()),
            Err(Error::DimsMismatch { .. })
        ));
    }
}
