//! On-disk formats. All integers and floats are little-endian.
//!
//! ```text
//! ACTV: "ACTV" u32 version=1, u32 N, u32 d, N*d f32 row-major
//! ITNS: "ITNS" u32 version=1, u32 M, u32 N, u32 T, f32 gamma_corr,
//!       f32 gamma_data, u64 nnz, nnz * (u32 m, u32 n, u32 t) sorted
//! PRED: "PRED" u32 version=1, u32 N, N u16 labels
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{ActivationMatrix, InteractionTensor, TensorError};

pub const ACTV_MAGIC: &[u8; 4] = b"ACTV";
pub const ITNS_MAGIC: &[u8; 4] = b"ITNS";
pub const PRED_MAGIC: &[u8; 4] = b"PRED";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad {0} header")]
    BadMagic(&'static str),
    #[error("unsupported {format} version {version}")]
    Version { format: &'static str, version: u32 },
    #[error("truncated {0} payload")]
    Truncated(&'static str),
    #[error("{0} payload has {1} trailing bytes")]
    Trailing(&'static str, usize),
    #[error("{0} triples are not sorted and unique")]
    Unsorted(&'static str),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], format: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            format,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(FormatError::Truncated(self.format))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        if self.bytes.len() < 4 || &self.bytes[..4] != magic {
            return Err(FormatError::BadMagic(self.format));
        }
        self.pos = 4;
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Version {
                format: self.format,
                version,
            });
        }
        Ok(())
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(self) -> Result<(), FormatError> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            extra => Err(FormatError::Trailing(self.format, extra)),
        }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn encode_activations(act: &ActivationMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + act.values().len() * 4);
    out.extend_from_slice(ACTV_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(act.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(act.cols() as u32).to_le_bytes());
    for v in act.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_activations(model_id: &str, bytes: &[u8]) -> Result<ActivationMatrix, FormatError> {
    let mut r = Reader::new(bytes, "ACTV");
    r.header(ACTV_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or(FormatError::Truncated("ACTV"))?;
    if r.remaining() / 4 < count {
        return Err(FormatError::Truncated("ACTV"));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(r.f32()?);
    }
    r.finish()?;
    Ok(ActivationMatrix::new(model_id, rows, cols, values)?)
}

pub fn read_activations(model_id: &str, path: &Path) -> Result<ActivationMatrix, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_activations(model_id, &bytes)
}

pub fn write_activations(act: &ActivationMatrix, path: &Path) -> Result<(), FormatError> {
    fs::write(path, encode_activations(act)).map_err(io_err(path))
}

pub fn encode_tensor(tensor: &InteractionTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(36 + tensor.nnz() * 12);
    out.extend_from_slice(ITNS_MAGIC);
    for v in [FORMAT_VERSION, tensor.m, tensor.n, tensor.t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(tensor.gamma_corr as f32).to_le_bytes());
    out.extend_from_slice(&(tensor.gamma_data as f32).to_le_bytes());
    out.extend_from_slice(&(tensor.nnz() as u64).to_le_bytes());
    for &(m, n, t) in tensor.entries() {
        for v in [m, n, t] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<InteractionTensor, FormatError> {
    let mut r = Reader::new(bytes, "ITNS");
    r.header(ITNS_MAGIC)?;
    let (m, n, t) = (r.u32()?, r.u32()?, r.u32()?);
    let gamma_corr = f64::from(r.f32()?);
    let gamma_data = f64::from(r.f32()?);
    let nnz = r.u64()?;
    if (r.remaining() as u64) / 12 < nnz {
        return Err(FormatError::Truncated("ITNS"));
    }
    let mut entries = Vec::with_capacity(nnz as usize);
    for _ in 0..nnz {
        entries.push((r.u32()?, r.u32()?, r.u32()?));
    }
    r.finish()?;
    if entries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FormatError::Unsorted("ITNS"));
    }
    Ok(InteractionTensor::new((m, n, t), gamma_corr, gamma_data, entries)?)
}

pub fn read_tensor(path: &Path) -> Result<InteractionTensor, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_tensor(&bytes)
}

pub fn write_tensor(tensor: &InteractionTensor, path: &Path) -> Result<(), FormatError> {
    fs::write(path, encode_tensor(tensor)).map_err(io_err(path))
}

pub fn encode_labels(labels: &[u16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + labels.len() * 2);
    out.extend_from_slice(PRED_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u16>, FormatError> {
    let mut r = Reader::new(bytes, "PRED");
    r.header(PRED_MAGIC)?;
    let n = r.u32()? as usize;
    if r.remaining() / 2 < n {
        return Err(FormatError::Truncated("PRED"));
    }
    let labels = (0..n).map(|_| r.u16()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok(labels)
}

/// Predictions and ground-truth labels share the PRED layout.
pub fn read_labels(path: &Path) -> Result<Vec<u16>, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_labels(&bytes)
}

pub fn write_labels(labels: &[u16], path: &Path) -> Result<(), FormatError> {
    fs::write(path, encode_labels(labels)).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestModel {
    pub id: String,
    pub activations: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
}

fn default_pcs() -> usize {
    50
}

fn default_percentile() -> f64 {
    90.0
}

/// Pipeline inputs. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub models: Vec<ManifestModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default = "default_pcs")]
    pub pcs: usize,
    #[serde(default = "default_percentile")]
    pub corr_percentile: f64,
    #[serde(default = "default_percentile")]
    pub data_percentile: f64,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut manifest: Manifest =
            serde_json::from_str(&text).map_err(|source| FormatError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for m in &mut manifest.models {
            resolve(&mut m.activations);
            if let Some(p) = m.predictions.as_mut() {
                resolve(p);
            }
        }
        if let Some(p) = manifest.labels.as_mut() {
            resolve(p);
        }
        Ok(manifest)
    }

    pub fn load_activations(&self) -> Result<Vec<ActivationMatrix>, FormatError> {
        self.models
            .iter()
            .map(|m| read_activations(&m.id, &m.activations))
            .collect()
    }
}
