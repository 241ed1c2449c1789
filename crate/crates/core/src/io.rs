//! Header + raw container format.
//!
//! A dataset is a UTF-8 header with one `key: value` per line and one or two
//! raw little-endian payload files, x-fastest then y then z:
//!
//! ```text
//! dims: 64 64 64
//! spacing: 1 1 1
//! dtype: f32
//! data: train.raw
//! labels: train.labels.raw
//! ```
//!
//! Payload paths are resolved relative to the header's directory. Labels are
//! always stored as one `u8` per voxel. `u8` intensities are scaled to `[0, 1]`
//! on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{Dims, LabelVolume, Volume};

/// Payload element type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    U8,
    F32,
    U32,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::F32 | Dtype::U32 => 4,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::F32 => "f32",
            Dtype::U32 => "u32",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "u8" => Some(Dtype::U8),
            "f32" => Some(Dtype::F32),
            "u32" => Some(Dtype::U32),
            _ => None,
        }
    }
}

/// Parsed header contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub dims: Dims,
    pub spacing: [f64; 3],
    pub dtype: Dtype,
    pub data: PathBuf,
    pub labels: Option<PathBuf>,
}

impl Header {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|reason| Error::Header {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| format!("line {}: expected `key: value`", n + 1))?;
            if map
                .insert(k.trim().to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(format!("duplicate key `{}`", k.trim()));
            }
        }
        let take = |key: &str| map.get(key).ok_or_else(|| format!("missing key `{key}`"));
        let dims: Vec<usize> = parse_triple(take("dims")?)?;
        let spacing: Vec<f64> = match map.get("spacing") {
            Some(s) => parse_triple(s)?,
            None => vec![1.0; 3],
        };
        let dtype_str = take("dtype")?;
        let dtype =
            Dtype::parse(dtype_str).ok_or_else(|| format!("unknown dtype `{dtype_str}`"))?;
        Ok(Header {
            dims: Dims::new(dims[0], dims[1], dims[2]),
            spacing: [spacing[0], spacing[1], spacing[2]],
            dtype,
            data: PathBuf::from(take("data")?),
            labels: map.get("labels").map(PathBuf::from),
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "dims: {} {} {}\nspacing: {} {} {}\ndtype: {}\ndata: {}\n",
            self.dims.nx,
            self.dims.ny,
            self.dims.nz,
            self.spacing[0],
            self.spacing[1],
            self.spacing[2],
            self.dtype.as_str(),
            self.data.display()
        );
        if let Some(labels) = &self.labels {
            out.push_str(&format!("labels: {}\n", labels.display()));
        }
        out
    }
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    let parts: Vec<T> = s
        .split_whitespace()
        .map(|p| p.parse::<T>().map_err(|_| format!("bad number `{p}`")))
        .collect::<std::result::Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(format!("expected three values, got `{s}`"));
    }
    Ok(parts)
}

fn sibling(header_path: &Path, rel: &Path) -> PathBuf {
    match header_path.parent() {
        Some(dir) if rel.is_relative() => dir.join(rel),
        _ => rel.to_path_buf(),
    }
}

fn read_payload(path: &Path, dims: Dims, dtype: Dtype) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = dims.len() * dtype.width();
    if bytes.len() != expected {
        return Err(Error::dims(
            format!("{expected} bytes for {dims} {}", dtype.as_str()),
            format!("{} bytes in {}", bytes.len(), path.display()),
        ));
    }
    Ok(bytes)
}

fn payload_names(header_path: &Path) -> (PathBuf, PathBuf) {
    let stem = header_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".into());
    (
        PathBuf::from(format!("{stem}.raw")),
        PathBuf::from(format!("{stem}.labels.raw")),
    )
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a volume and, when the header declares one, its label volume.
pub fn load_dataset(header_path: impl AsRef<Path>) -> Result<(Volume, Option<LabelVolume>)> {
    let header_path = header_path.as_ref();
    let header = Header::read(header_path)?;
    let dims = header.dims;
    dims.validate()?;
    let bytes = read_payload(&sibling(header_path, &header.data), dims, header.dtype)?;
    let data: Vec<f32> = match header.dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        Dtype::U8 => bytes.iter().map(|&b| b as f32 / 255.0).collect(),
        Dtype::U32 => {
            return Err(Error::Header {
                path: header_path.to_path_buf(),
                reason: "u32 payloads hold partitions, not intensities".into(),
            })
        }
    };
    let volume = Volume::new(dims, header.spacing, data)?;
    let labels = match &header.labels {
        Some(rel) => {
            let bytes = read_payload(&sibling(header_path, rel), dims, Dtype::U8)?;
            Some(LabelVolume::new(dims, bytes)?)
        }
        None => None,
    };
    Ok((volume, labels))
}

/// Writes `volume` (as `f32`) and optional labels next to `header_path`.
pub fn save_dataset(
    volume: &Volume,
    labels: Option<&LabelVolume>,
    header_path: impl AsRef<Path>,
) -> Result<()> {
    let header_path = header_path.as_ref();
    if let Some(l) = labels {
        if l.dims() != volume.dims() {
            return Err(Error::dims(volume.dims(), l.dims()));
        }
    }
    let (data_name, label_name) = payload_names(header_path);
    let header = Header {
        dims: volume.dims(),
        spacing: volume.spacing(),
        dtype: Dtype::F32,
        data: data_name.clone(),
        labels: labels.map(|_| label_name.clone()),
    };
    let bytes: Vec<u8> = volume.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    write(&sibling(header_path, &data_name), &bytes)?;
    if let Some(l) = labels {
        write(&sibling(header_path, &label_name), l.labels())?;
    }
    write(header_path, header.render().as_bytes())
}

/// Writes a `u32` id per voxel using the same container.
pub fn save_ids(
    dims: Dims,
    spacing: [f64; 3],
    ids: &[u32],
    header_path: impl AsRef<Path>,
) -> Result<()> {
    let header_path = header_path.as_ref();
    if ids.len() != dims.len() {
        return Err(Error::dims(dims.len(), ids.len()));
    }
    let (data_name, _) = payload_names(header_path);
    let header = Header {
        dims,
        spacing,
        dtype: Dtype::U32,
        data: data_name.clone(),
        labels: None,
    };
    let bytes: Vec<u8> = ids.iter().flat_map(|v| v.to_le_bytes()).collect();
    write(&sibling(header_path, &data_name), &bytes)?;
    write(header_path, header.render().as_bytes())
}

/// Reads a `u32` id array written by [`save_ids`].
pub fn load_ids(header_path: impl AsRef<Path>) -> Result<(Dims, [f64; 3], Vec<u32>)> {
    let header_path = header_path.as_ref();
    let header = Header::read(header_path)?;
    if header.dtype != Dtype::U32 {
        return Err(Error::Header {
            path: header_path.to_path_buf(),
            reason: format!("expected dtype u32, found {}", header.dtype.as_str()),
        });
    }
    let bytes = read_payload(&sibling(header_path, &header.data), header.dims, Dtype::U32)?;
    let ids = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header.dims, header.spacing, ids))
}
