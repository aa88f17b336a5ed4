//! Model checkpoint: a text header followed by a little-endian `f64` blob.
//!
//! ```text
//! respiro-checkpoint 1
//! mode bi
//! merge concat
//! readout last
//! input_dim 13
//! hidden 32
//! classes 8
//! seed 7
//! standardizer 1
//! meta.feature mfcc
//! blob_bytes 123456
//! ---
//! <blocks in ModelParams::blocks order, then standardizer mean and scale>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::lstm::LstmParams;
use super::model::{Architecture, DenseParams, Direction, ModelParams};
use crate::features::Standardizer;
use crate::linalg::Matrix;
use crate::NUM_CLASSES;

pub const CHECKPOINT_MAGIC: &str = "respiro-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const SEPARATOR: &str = "---\n";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (missing `{CHECKPOINT_MAGIC}` header)")]
    NotACheckpoint,
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    Version { found: String },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn malformed(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Malformed(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub seed: u64,
    pub standardizer: Option<Standardizer>,
    /// Free-form settings (feature and window configuration) stored as
    /// `meta.<key> <value>` header lines.
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(model: ModelParams, seed: u64) -> Self {
        Self {
            model,
            seed,
            standardizer: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        let m = &self.model;
        m.validate().map_err(|e| malformed(e.to_string()))?;
        if let Some(s) = &self.standardizer {
            if s.dim() != m.input_dim() {
                return Err(malformed(format!(
                    "standardizer dim {} does not match input_dim {}",
                    s.dim(),
                    m.input_dim()
                )));
            }
        }
        let mut blob = Vec::new();
        for block in m.blocks() {
            blob.extend(block.iter().flat_map(|v| v.to_le_bytes()));
        }
        if let Some(s) = &self.standardizer {
            blob.extend(s.mean().iter().chain(s.scale()).flat_map(|v| v.to_le_bytes()));
        }

        let mut header = format!(
            "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\nmode {}\nmerge {}\nreadout {}\ninput_dim {}\nhidden {}\nclasses {NUM_CLASSES}\nseed {}\nstandardizer {}\n",
            m.arch.direction,
            m.arch.merge,
            m.arch.readout,
            m.input_dim(),
            m.hidden(),
            self.seed,
            u8::from(self.standardizer.is_some()),
        );
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') {
                return Err(malformed(format!(
                    "metadata entry `{k}` cannot be stored in a header line"
                )));
            }
            header.push_str(&format!("meta.{k} {v}\n"));
        }
        header.push_str(&format!("blob_bytes {}\n{SEPARATOR}", blob.len()));
        let mut out = header.into_bytes();
        out.extend(blob);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let split = bytes
            .windows(SEPARATOR.len() + 1)
            .position(|w| w[0] == b'\n' && &w[1..] == SEPARATOR.as_bytes())
            .ok_or_else(|| {
                if bytes.starts_with(CHECKPOINT_MAGIC.as_bytes()) {
                    malformed("missing header separator")
                } else {
                    CheckpointError::NotACheckpoint
                }
            })?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| malformed("header is not UTF-8"))?;
        let blob = &bytes[split + 1 + SEPARATOR.len()..];

        let mut lines = header.lines();
        let first = lines.next().unwrap_or_default();
        let version = first
            .strip_prefix(CHECKPOINT_MAGIC)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or(CheckpointError::NotACheckpoint)?;
        if version != CHECKPOINT_VERSION.to_string() {
            return Err(CheckpointError::Version {
                found: version.to_string(),
            });
        }
        let mut fields = BTreeMap::new();
        let mut meta = BTreeMap::new();
        for line in lines {
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| malformed(format!("header line `{line}`")))?;
            if let Some(mk) = k.strip_prefix("meta.") {
                meta.insert(mk.to_string(), v.to_string());
            } else if fields.insert(k, v).is_some() {
                return Err(malformed(format!("duplicate header key `{k}`")));
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| malformed(format!("missing header key `{k}`")))
        };
        let num = |k: &str| -> Result<usize, CheckpointError> {
            get(k)?
                .parse()
                .map_err(|_| malformed(format!("`{k}` is not an integer")))
        };
        let arch = Architecture {
            direction: get("mode")?
                .parse()
                .map_err(|e: super::NnError| malformed(e.to_string()))?,
            merge: get("merge")?
                .parse()
                .map_err(|e: super::NnError| malformed(e.to_string()))?,
            readout: get("readout")?
                .parse()
                .map_err(|e: super::NnError| malformed(e.to_string()))?,
        };
        let (d, h) = (num("input_dim")?, num("hidden")?);
        if d == 0 || h == 0 {
            return Err(malformed("input_dim and hidden must be positive"));
        }
        if num("classes")? != NUM_CLASSES {
            return Err(malformed(format!("class count must be {NUM_CLASSES}")));
        }
        let seed: u64 = get("seed")?
            .parse()
            .map_err(|_| malformed("`seed` is not an integer"))?;
        let has_std = match get("standardizer")? {
            "0" => false,
            "1" => true,
            other => return Err(malformed(format!("standardizer flag `{other}`"))),
        };
        if num("blob_bytes")? != blob.len() {
            return Err(malformed(format!(
                "blob is {} bytes, header declares {}",
                blob.len(),
                num("blob_bytes")?
            )));
        }
        if !blob.len().is_multiple_of(8) {
            return Err(malformed("blob length is not a multiple of 8"));
        }
        let mut values = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));

        let mut model = skeleton(arch, d, h);
        let expected = model.num_params() + if has_std { 2 * d } else { 0 };
        if values.len() != expected {
            return Err(malformed(format!(
                "blob holds {} values, layout needs {expected}",
                values.len()
            )));
        }
        for block in model.blocks_mut() {
            for (slot, v) in block.iter_mut().zip(&mut values) {
                *slot = v;
            }
        }
        model.validate().map_err(|e| malformed(e.to_string()))?;
        let standardizer = if has_std {
            let mean: Vec<f64> = values.by_ref().take(d).collect();
            let scale: Vec<f64> = values.collect();
            Some(Standardizer::from_parts(mean, scale).map_err(|e| malformed(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            model,
            seed,
            standardizer,
            meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| io_error(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| io_error(path, e))?)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn skeleton(arch: Architecture, d: usize, h: usize) -> ModelParams {
    let width = match (arch.direction, arch.merge) {
        (Direction::Bidirectional, super::Merge::Concat) => 2 * h,
        _ => h,
    };
    ModelParams {
        arch,
        forward: LstmParams::zeros(d, h),
        backward: (arch.direction == Direction::Bidirectional).then(|| LstmParams::zeros(d, h)),
        dense: DenseParams {
            w: Matrix::zeros(NUM_CLASSES, width),
            b: vec![0.0; NUM_CLASSES],
        },
    }
}
