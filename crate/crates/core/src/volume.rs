//! Dense volumes, ground-truth label volumes and the synthetic blob generator.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Grid extents, x-fastest ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub fn cube(n: usize) -> Self {
        Self::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A volume of depth one is treated as a 2D image.
    pub fn is_planar(&self) -> bool {
        self.nz == 1
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.nx;
        let y = (idx / self.nx) % self.ny;
        let z = idx / (self.nx * self.ny);
        [x, y, z]
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Calls `f` with the linear index of every face neighbour of `idx`.
    pub fn for_each_face_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        let [x, y, z] = self.coords(idx);
        if x > 0 {
            f(idx - 1);
        }
        if x + 1 < self.nx {
            f(idx + 1);
        }
        if y > 0 {
            f(idx - self.nx);
        }
        if y + 1 < self.ny {
            f(idx + self.nx);
        }
        let plane = self.nx * self.ny;
        if z > 0 {
            f(idx - plane);
        }
        if z + 1 < self.nz {
            f(idx + plane);
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::Config(format!("dims must be positive, got {self}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Scalar intensity volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: Dims,
    spacing: [f64; 3],
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: Dims, spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::dims(dims.len(), data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: Dims, value: f32) -> Result<Self> {
        Self::new(dims, [1.0; 3], vec![value; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Binary ground truth on the grid of a [`Volume`]; 1 is foreground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Dims,
    labels: Vec<u8>,
}

impl LabelVolume {
    pub fn new(dims: Dims, labels: Vec<u8>) -> Result<Self> {
        dims.validate()?;
        if labels.len() != dims.len() {
            return Err(Error::dims(dims.len(), labels.len()));
        }
        if let Some(i) = labels.iter().position(|&v| v > 1) {
            return Err(Error::LabelDomain {
                index: i,
                value: labels[i] as u32,
            });
        }
        Ok(Self { dims, labels })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Parameters of the ellipsoidal-blob phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dims: Dims,
    pub blob_count: usize,
    /// Semi-axis range in voxels, `[lo, hi]`.
    pub blob_radius_range: [f64; 2],
    pub noise_sigma: f64,
    pub fg_intensity: f64,
    pub bg_intensity: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dims: Dims::cube(64),
            blob_count: 6,
            blob_radius_range: [6.0, 10.0],
            noise_sigma: 0.2,
            fg_intensity: 0.6,
            bg_intensity: 0.4,
            rng_seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Smallest extent among the axes the blobs live in (depth is ignored for planar volumes).
    fn min_extent(&self) -> usize {
        let d = self.dims;
        if d.is_planar() {
            d.nx.min(d.ny)
        } else {
            d.nx.min(d.ny).min(d.nz)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let [lo, hi] = self.blob_radius_range;
        if self.blob_count == 0 {
            return Err(Error::Config("blob_count must be positive".into()));
        }
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!(
                "invalid blob radius range [{lo}, {hi}]"
            )));
        }
        if hi >= self.min_extent() as f64 / 2.0 {
            return Err(Error::Config(format!(
                "blob radius {hi} does not fit inside {}",
                self.dims
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be nonnegative".into()));
        }
        if self.fg_intensity == self.bg_intensity {
            return Err(Error::Config(
                "fg_intensity must differ from bg_intensity".into(),
            ));
        }
        Ok(())
    }
}

struct Blob {
    center: [f64; 3],
    semi_axes: [f64; 3],
}

impl Blob {
    fn contains(&self, p: [f64; 3], planar: bool) -> bool {
        let axes = if planar { 2 } else { 3 };
        (0..axes)
            .map(|a| ((p[a] - self.center[a]) / self.semi_axes[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

/// Generates a phantom made of `blob_count` solid ellipsoids (label 1) on a
/// uniform background, with additive Gaussian noise.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(Volume, LabelVolume)> {
    config.validate()?;
    let dims = config.dims;
    let planar = dims.is_planar();
    let [lo, hi] = config.blob_radius_range;
    let mut rng = seed::stream_rng(config.rng_seed, &[0xB10B]);

    let extents = dims.as_array();
    let blobs: Vec<Blob> = (0..config.blob_count)
        .map(|_| {
            let mut semi_axes = [0.0; 3];
            for s in &mut semi_axes {
                *s = if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                };
            }
            let mut center = [0.0; 3];
            for a in 0..3 {
                let n = extents[a] as f64;
                center[a] = if planar && a == 2 {
                    0.0
                } else {
                    // keep the whole blob inside the grid
                    let (min, max) = (semi_axes[a], n - 1.0 - semi_axes[a]);
                    if max > min {
                        rng.random_range(min..max)
                    } else {
                        (n - 1.0) / 2.0
                    }
                };
            }
            Blob { center, semi_axes }
        })
        .collect();

    let mut labels = vec![0u8; dims.len()];
    for (idx, label) in labels.iter_mut().enumerate() {
        let [x, y, z] = dims.coords(idx);
        let p = [x as f64, y as f64, z as f64];
        if blobs.iter().any(|b| b.contains(p, planar)) {
            *label = 1;
        }
    }

    let normal = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| Error::Config(format!("noise_sigma: {e}")))?;
    let data: Vec<f32> = labels
        .iter()
        .map(|&l| {
            let base = if l == 1 {
                config.fg_intensity
            } else {
                config.bg_intensity
            };
            let noise = if config.noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            (base + noise) as f32
        })
        .collect();

    Ok((
        Volume::new(dims, [1.0; 3], data)?,
        LabelVolume::new(dims, labels)?,
    ))
}
