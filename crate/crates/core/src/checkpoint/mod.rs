//! Checkpoint storage: a single-file named-tensor container plus a JSON
//! model config stored next to it.
//!
//! The container uses the common single-file layout: an 8-byte little-endian
//! header length `N`, `N` bytes of UTF-8 JSON index, then packed tensor data.
//! Each index entry is `{"dtype", "shape", "data_offsets": [begin, end]}` with
//! offsets relative to the start of the data section.

mod container;
mod dtype;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{self, ConfigError, ModelConfig};

pub use container::encode_container;
pub use dtype::DType;

/// A single tensor: element type, shape, and raw little-endian bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl Tensor {
    pub fn zeros(dtype: DType, shape: Vec<usize>) -> Self {
        let len = shape.iter().product::<usize>() * dtype.size();
        // +0.0 is all-zero bits in every supported float format
        Tensor { dtype, shape, data: vec![0; len] }
    }

    pub fn from_f32(dtype: DType, shape: Vec<usize>, values: &[f32]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor { dtype, shape, data: dtype.encode(values) }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.dtype.decode(&self.data)
    }
}

/// A model config plus its named tensors, ordered by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, Tensor>,
    /// Free-form string metadata carried in the container header.
    pub metadata: BTreeMap<String, String>,
}

/// One structural problem found while loading or validating a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MalformedHeaderLength { declared: u64, available: u64 },
    MalformedHeader(String),
    MalformedEntry { tensor: String, reason: String },
    UnsupportedDType { tensor: String, dtype: String },
    OutOfBoundsExtent { tensor: String, begin: u64, end: u64, data_len: u64 },
    OverlappingExtent { first: String, second: String },
    ByteLength { tensor: String, expected: usize, actual: usize },
    EmptyCheckpoint,
    Config(String),
    NonContiguousLayers { found: Vec<usize> },
    MissingTensor(String),
    ShapeMismatch { tensor: String, expected: Vec<usize>, actual: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MalformedHeaderLength { declared, available } => write!(
                f,
                "malformed header length: declared {declared} bytes but only {available} follow"
            ),
            Violation::MalformedHeader(reason) => write!(f, "malformed header: {reason}"),
            Violation::MalformedEntry { tensor, reason } => {
                write!(f, "malformed index entry for {tensor}: {reason}")
            }
            Violation::UnsupportedDType { tensor, dtype } => {
                write!(f, "{tensor}: unsupported dtype {dtype}")
            }
            Violation::OutOfBoundsExtent { tensor, begin, end, data_len } => write!(
                f,
                "{tensor}: out-of-bounds extent [{begin}, {end}) in a {data_len}-byte data section"
            ),
            Violation::OverlappingExtent { first, second } => {
                write!(f, "overlapping extents: {first} and {second}")
            }
            Violation::ByteLength { tensor, expected, actual } => write!(
                f,
                "{tensor}: byte length {actual} does not match shape and dtype ({expected} expected)"
            ),
            Violation::EmptyCheckpoint => f.write_str("empty checkpoint"),
            Violation::Config(msg) => write!(f, "config: {msg}"),
            Violation::NonContiguousLayers { found } => {
                write!(f, "non-contiguous layer indices: found {found:?}")
            }
            Violation::MissingTensor(name) => write!(f, "missing tensor {name}"),
            Violation::ShapeMismatch { tensor, expected, actual } => write!(
                f,
                "{tensor}: shape {actual:?} does not match config ({expected:?} expected)"
            ),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: config is not valid JSON: {source}", path.display())]
    ConfigJson { path: PathBuf, source: serde_json::Error },
    #[error("invalid checkpoint: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl CheckpointError {
    pub fn is_io(&self) -> bool {
        matches!(self, CheckpointError::Io { .. })
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl From<ConfigError> for Violation {
    fn from(e: ConfigError) -> Self {
        Violation::Config(e.0.join("; "))
    }
}

impl Checkpoint {
    /// Layer indices present in tensor names, sorted.
    pub fn layer_indices(&self) -> BTreeSet<usize> {
        self.tensors
            .keys()
            .filter_map(|name| config::split_layer_name(name).map(|(i, _)| i))
            .collect()
    }

    /// Tensors belonging to one layer, keyed by suffix.
    pub fn layer_tensors(&self, layer: usize) -> BTreeMap<&str, &Tensor> {
        self.tensors
            .iter()
            .filter_map(|(name, t)| match config::split_layer_name(name) {
                Some((i, suffix)) if i == layer => Some((suffix, t)),
                _ => None,
            })
            .collect()
    }

    pub fn structural_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.tensors.is_empty() {
            out.push(Violation::EmptyCheckpoint);
            return out;
        }
        for (name, t) in &self.tensors {
            let expected = t.numel() * t.dtype.size();
            if expected != t.data.len() {
                out.push(Violation::ByteLength {
                    tensor: name.clone(),
                    expected,
                    actual: t.data.len(),
                });
            }
        }
        if let Err(e) = self.config.validate() {
            out.push(e.into());
            return out;
        }

        let layers = self.layer_indices();
        let contiguous = layers.iter().copied().eq(0..layers.len());
        if !contiguous {
            out.push(Violation::NonContiguousLayers { found: layers.iter().copied().collect() });
        }
        let required = (0..self.config.num_layers)
            .flat_map(|i| config::LAYER_TENSORS.iter().map(move |s| config::layer_tensor_name(i, s)))
            .chain(config::GLOBAL_TENSORS.iter().map(|s| s.to_string()));
        for name in required {
            match self.tensors.get(&name) {
                None => out.push(Violation::MissingTensor(name)),
                Some(t) => {
                    let expected = self.config.expected_shape(&name).expect("declared tensor");
                    if t.shape != expected {
                        out.push(Violation::ShapeMismatch {
                            tensor: name,
                            expected,
                            actual: t.shape.clone(),
                        });
                    }
                }
            }
        }
        if contiguous && layers.len() > self.config.num_layers {
            out.push(Violation::Config(format!(
                "num_layers is {} but tensors cover {} layers",
                self.config.num_layers,
                layers.len()
            )));
        }
        out
    }

    pub fn validate(&self) -> Result<(), CheckpointError> {
        let violations = self.structural_violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CheckpointError::Invalid(violations))
        }
    }
}

/// Path of the config file that accompanies a tensor container:
/// `dir/name.safetensors` pairs with `dir/name.config.json`.
pub fn config_path(path: &Path) -> PathBuf {
    path.with_extension("config.json")
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    })?;
    let cfg_path = config_path(path);
    let cfg_bytes = std::fs::read(&cfg_path).map_err(|source| CheckpointError::Io {
        path: cfg_path.clone(),
        source,
    })?;
    let config: ModelConfig = serde_json::from_slice(&cfg_bytes)
        .map_err(|source| CheckpointError::ConfigJson { path: cfg_path, source })?;

    let decoded = container::decode_container(&bytes);
    let mut violations = decoded.violations;
    let ckpt = Checkpoint { config, tensors: decoded.tensors, metadata: decoded.metadata };
    // A broken header leaves nothing meaningful to check structurally.
    let header_broken = violations.iter().any(|v| {
        matches!(v, Violation::MalformedHeaderLength { .. } | Violation::MalformedHeader(_))
    });
    if !header_broken {
        violations.extend(ckpt.structural_violations());
    }
    if violations.is_empty() {
        Ok(ckpt)
    } else {
        Err(CheckpointError::Invalid(violations))
    }
}

/// Writes the container and its config atomically: both files are staged in
/// the destination directory and renamed into place only after every byte is
/// written. Invalid checkpoints are refused before anything touches disk.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    ckpt.validate()?;
    let body = container::encode_container(ckpt);
    let mut config_json =
        serde_json::to_vec_pretty(&ckpt.config).expect("config serializes to JSON");
    config_json.push(b'\n');

    let cfg_path = config_path(path);
    let staged_body = stage(path, &body)?;
    let staged_cfg = stage(&cfg_path, &config_json)?;
    staged_cfg.persist(&cfg_path).map_err(|e| CheckpointError::Io {
        path: cfg_path.clone(),
        source: e.error,
    })?;
    staged_body.persist(path).map_err(|e| CheckpointError::Io {
        path: path.to_owned(),
        source: e.error,
    })?;
    Ok(())
}

fn stage(dest: &Path, bytes: &[u8]) -> Result<tempfile::NamedTempFile, CheckpointError> {
    let io_err = |source| CheckpointError::Io { path: dest.to_owned(), source };
    let dir = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".babelkit-")
        .tempfile_in(dir)
        .map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    Ok(tmp)
}
