//! Checkpoints and the initialisation regimes used for transfer.
//!
//! On-disk layout (all integers little-endian):
//!
//! ```text
//! "CTLC"                      magic
//! u32                         format version (1)
//! u32 + bytes                 metadata, UTF-8 `key=value` lines
//! u32                         tensor count
//! per tensor:
//!   u16 + bytes               name
//!   u8                        rank
//!   u32 * rank                dims
//!   f32 * prod(dims)          IEEE-754 values
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::env::VariantId;
use crate::nn::{self, NetworkParams, TensorId, TrainableMask, TENSOR_COUNT};

pub const MAGIC: &[u8; 4] = b"CTLC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes {found:?}, expected \"CTLC\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported checkpoint version {found} (this build reads version {FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(&'static str),
    #[error("duplicate tensor `{0}`")]
    DuplicateTensor(String),
    #[error("invalid metadata entry `{0}`")]
    InvalidMetadata(String),
}

/// Free-form `key=value` metadata. Keys used by this crate are listed as
/// associated constants.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metadata(pub BTreeMap<String, String>);

impl Metadata {
    pub const SOURCE_VARIANT: &'static str = "source_variant";
    pub const SEED: &'static str = "seed";
    pub const ENV_STEPS: &'static str = "env_steps";
    pub const CREATED: &'static str = "created_unix";
    pub const REGIME: &'static str = "regime";
    pub const BODY_SOURCE: &'static str = "body_source";
    pub const HEAD_SOURCE: &'static str = "head_source";

    pub fn new() -> Self {
        Metadata::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn source_variant(&self) -> Option<VariantId> {
        self.get(Self::SOURCE_VARIANT)?.parse().ok()
    }

    /// One-line summary used when recording provenance of composed checkpoints.
    pub fn provenance(&self) -> String {
        self.0
            .iter()
            .filter(|(k, _)| k.as_str() != Self::BODY_SOURCE && k.as_str() != Self::HEAD_SOURCE)
            .map(|(k, v)| format!("{k}:{v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    fn encode(&self) -> Result<String, CheckpointError> {
        let mut out = String::new();
        for (k, v) in &self.0 {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
                return Err(CheckpointError::InvalidMetadata(format!("{k}={v}")));
            }
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        Ok(out)
    }

    fn decode(text: &str) -> Result<Self, CheckpointError> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CheckpointError::InvalidMetadata(line.to_string()))?;
            map.insert(k.to_string(), v.to_string());
        }
        Ok(Metadata(map))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

/// A saved network: metadata plus its named tensor table.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub metadata: Metadata,
    tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(params: &NetworkParams, metadata: Metadata) -> Self {
        let tensors = params
            .iter()
            .map(|(id, values)| NamedTensor {
                name: id.name().to_string(),
                dims: id.shape().to_vec(),
                values: values.to_vec(),
            })
            .collect();
        Checkpoint { metadata, tensors }
    }

    /// A checkpoint from an arbitrary tensor table. Nothing is validated
    /// until [`Checkpoint::params`] is called.
    pub fn from_raw(metadata: Metadata, tensors: Vec<NamedTensor>) -> Self {
        Checkpoint { metadata, tensors }
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    /// Validates names and shapes against the fixed architecture.
    pub fn params(&self) -> Result<NetworkParams, CheckpointError> {
        let mut slots: [Option<Vec<f32>>; TENSOR_COUNT] = Default::default();
        for t in &self.tensors {
            let id = TensorId::from_name(&t.name)
                .ok_or_else(|| CheckpointError::UnknownTensor(t.name.clone()))?;
            if t.dims != id.shape() || t.values.len() != id.len() {
                return Err(CheckpointError::ShapeMismatch {
                    name: t.name.clone(),
                    found: t.dims.clone(),
                    expected: id.shape().to_vec(),
                });
            }
            let slot = &mut slots[id.index()];
            if slot.is_some() {
                return Err(CheckpointError::DuplicateTensor(t.name.clone()));
            }
            *slot = Some(t.values.clone());
        }
        let mut tensors: [Vec<f32>; TENSOR_COUNT] = Default::default();
        for id in TensorId::ALL {
            tensors[id.index()] = slots[id.index()]
                .take()
                .ok_or(CheckpointError::MissingTensor(id.name()))?;
        }
        Ok(NetworkParams::from_tensors(tensors).expect("lengths checked above"))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        let meta = self.metadata.encode()?;
        let mut out = Vec::with_capacity(
            64 + meta.len() + self.tensors.iter().map(|t| 64 + 4 * t.values.len()).sum::<usize>(),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            let name = t.name.as_bytes();
            let name_len = u16::try_from(name.len())
                .map_err(|_| CheckpointError::Corrupt(format!("tensor name too long: {}", t.name)))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name);
            out.push(t.dims.len() as u8);
            for d in &t.dims {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decodes and validates a checkpoint image.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic {
                found: magic.to_vec(),
            });
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch { found: version });
        }
        let meta_len = r.u32("metadata length")? as usize;
        let meta_bytes = r.take(meta_len, "metadata")?;
        let meta_text = std::str::from_utf8(meta_bytes)
            .map_err(|_| CheckpointError::Corrupt("metadata is not UTF-8".into()))?;
        let metadata = Metadata::decode(meta_text)?;

        let count = r.u32("tensor count")? as usize;
        if count > 64 {
            return Err(CheckpointError::Corrupt(format!("implausible tensor count {count}")));
        }
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u16("tensor name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
                .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.u8("rank")? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32("dimension")? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d))
                .ok_or_else(|| CheckpointError::Corrupt(format!("tensor `{name}` is too large")))?;
            let raw = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| CheckpointError::Corrupt("tensor too large".into()))?,
                "tensor values",
            )?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(NamedTensor { name, dims, values });
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let ckpt = Checkpoint { metadata, tensors };
        ckpt.params()?;
        Ok(ckpt)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        write_atomic(path, &bytes).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Checkpoint::from_bytes(&bytes)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Corrupt(format!("truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CheckpointError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Convenience wrappers matching the file-level operations.
pub fn save(
    params: &NetworkParams,
    metadata: &Metadata,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    Checkpoint::new(params, metadata.clone()).save(path)
}

pub fn load(path: impl AsRef<Path>) -> Result<(NetworkParams, Metadata), CheckpointError> {
    let ckpt = Checkpoint::load(path)?;
    let params = ckpt.params()?;
    Ok((params, ckpt.metadata))
}

/// Body tensors from `body`, head tensors from `head`.
pub fn compose_hybrid(body: &Checkpoint, head: &Checkpoint) -> Result<Checkpoint, CheckpointError> {
    let body_params = body.params()?;
    let head_params = head.params()?;
    let mut params = body_params;
    for id in TensorId::ALL.into_iter().filter(|t| t.is_head()) {
        params.get_mut(id).copy_from_slice(head_params.get(id));
    }
    let mut metadata = Metadata::new()
        .with(Metadata::REGIME, "hybrid")
        .with(Metadata::BODY_SOURCE, body.metadata.provenance())
        .with(Metadata::HEAD_SOURCE, head.metadata.provenance());
    if let Some(v) = body.metadata.get(Metadata::SOURCE_VARIANT) {
        metadata.set(Metadata::SOURCE_VARIANT, v);
    }
    Ok(Checkpoint::new(&params, metadata))
}

/// How a training run's network is initialised.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Scratch { seed: u64 },
    /// Body from `source`, fresh head, everything trainable.
    FineTune { source: Checkpoint, head_seed: u64 },
    /// Body from `source` and frozen, fresh head.
    OnlyHead { source: Checkpoint, head_seed: u64 },
    /// Body from one checkpoint, head from another, everything trainable.
    Hybrid { body: Checkpoint, head: Checkpoint },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    Scratch,
    FineTune,
    OnlyHead,
    Hybrid,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Scratch => "scratch",
            Regime::FineTune => "fine-tune",
            Regime::OnlyHead => "only-head",
            Regime::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "scratch" => Ok(Regime::Scratch),
            "fine-tune" | "finetune" => Ok(Regime::FineTune),
            "only-head" | "onlyhead" => Ok(Regime::OnlyHead),
            "hybrid" => Ok(Regime::Hybrid),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

impl InitSpec {
    pub fn regime(&self) -> Regime {
        match self {
            InitSpec::Scratch { .. } => Regime::Scratch,
            InitSpec::FineTune { .. } => Regime::FineTune,
            InitSpec::OnlyHead { .. } => Regime::OnlyHead,
            InitSpec::Hybrid { .. } => Regime::Hybrid,
        }
    }

    pub fn trainable_mask(&self) -> TrainableMask {
        match self {
            InitSpec::OnlyHead { .. } => TrainableMask::head_only(),
            _ => TrainableMask::all(),
        }
    }

    /// Variant the transferred body was trained on, if any.
    pub fn source_variant(&self) -> Option<VariantId> {
        match self {
            InitSpec::Scratch { .. } => None,
            InitSpec::FineTune { source, .. } | InitSpec::OnlyHead { source, .. } => {
                source.metadata.source_variant()
            }
            InitSpec::Hybrid { body, .. } => body.metadata.source_variant(),
        }
    }

    /// Builds the initial parameters and the trainable mask.
    pub fn materialize(&self) -> Result<(NetworkParams, TrainableMask), CheckpointError> {
        let params = match self {
            InitSpec::Scratch { seed } => nn::init_params(*seed),
            InitSpec::FineTune { source, head_seed } | InitSpec::OnlyHead { source, head_seed } => {
                let mut p = source.params()?;
                nn::reinit_head(&mut p, *head_seed);
                p
            }
            InitSpec::Hybrid { body, head } => compose_hybrid(body, head)?.params()?,
        };
        Ok((params, self.trainable_mask()))
    }
}
