//! Sentence-embedding cache and model input assembly.
//!
//! Cache layout (little-endian):
//!
//! ```text
//! magic   "BLME"            4 bytes
//! version u32 = 1
//! dim     u32
//! pooling u8                0 = synthetic, 1 = first-token, 2 = mean
//! count   u64
//! count × { len u32, text [len] (UTF-8, normalized), dim × f32 }
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ablate::AblatedContext;
use crate::seed::{derived_rng, Tag};
use crate::text::normalize_key;

pub const MAGIC: &[u8; 4] = b"BLME";
pub const VERSION: u32 = 1;
/// Byte length of the header alone.
pub const HEADER_LEN: usize = 4 + 4 + 4 + 1 + 8;
/// Context slots fed to the model.
pub const SLOTS: usize = 7;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("not an embedding cache (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported cache version {found} (expected {VERSION})")]
    VersionMismatch { found: u32 },
    #[error("cache file is truncated")]
    TruncatedFile,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("unknown pooling code {0}")]
    UnknownPooling(u8),
    #[error("non-finite component in the vector for `{0}`")]
    NonFinite(String),
    #[error("corrupt cache: {0}")]
    Corrupt(String),
    #[error("no embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, EmbedError>;

/// How the exporter reduced token states to one sentence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Not from an encoder: hash-seeded pseudo-embeddings or hand-built vectors.
    Synthetic,
    FirstToken,
    Mean,
}

impl Pooling {
    pub fn code(self) -> u8 {
        match self {
            Pooling::Synthetic => 0,
            Pooling::FirstToken => 1,
            Pooling::Mean => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Pooling::Synthetic),
            1 => Ok(Pooling::FirstToken),
            2 => Ok(Pooling::Mean),
            other => Err(EmbedError::UnknownPooling(other)),
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "synthetic" => Ok(Pooling::Synthetic),
            "first-token" | "cls" => Ok(Pooling::FirstToken),
            "mean" => Ok(Pooling::Mean),
            other => Err(format!("unknown pooling `{other}` (expected synthetic|first-token|mean)")),
        }
    }
}

/// Normalized sentence text → vector. Entry order is insertion order and is
/// preserved by the file format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    pooling: Pooling,
    entries: IndexMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, pooling: Pooling) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(EmbedError::DimMismatch { expected: 1, found: dim });
        }
        Ok(EmbeddingTable { dim, pooling, entries: IndexMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert or replace. The key is normalized first.
    pub fn insert(&mut self, text: &str, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(EmbedError::DimMismatch { expected: self.dim, found: vector.len() });
        }
        let key = normalize_key(text);
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite(key));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn get(&self, text: &str) -> Option<&[f32]> {
        self.entries.get(&normalize_key(text)).map(Vec::as_slice)
    }

    pub fn lookup(&self, text: &str) -> Result<&[f32]> {
        self.get(text).ok_or_else(|| EmbedError::MissingEmbedding(normalize_key(text)))
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.contains_key(&normalize_key(text))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.entries.len() * (16 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(self.pooling.code());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (text, vector) in &self.entries {
            out.extend_from_slice(&(text.len() as u32).to_le_bytes());
            out.extend_from_slice(text.as_bytes());
            for x in vector {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(EmbedError::BadMagic(magic));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(EmbedError::VersionMismatch { found: version });
        }
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(EmbedError::DimMismatch { expected: 1, found: 0 });
        }
        let pooling = Pooling::from_code(r.u8()?)?;
        let count = r.u64()?;
        let mut table = EmbeddingTable::new(dim, pooling)?;
        for _ in 0..count {
            let len = r.u32()? as usize;
            let text = std::str::from_utf8(r.take(len)?)
                .map_err(|e| EmbedError::Corrupt(format!("entry text is not UTF-8: {e}")))?
                .to_string();
            let raw = r.take(4 * dim)?;
            let vector: Vec<f32> =
                raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::NonFinite(text));
            }
            if table.entries.insert(text.clone(), vector).is_some() {
                return Err(EmbedError::Corrupt(format!("duplicate entry `{text}`")));
            }
        }
        if r.pos != bytes.len() {
            return Err(EmbedError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(table)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(EmbedError::TruncatedFile)?;
        let slice = self.bytes.get(self.pos..end).ok_or(EmbedError::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_table(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&table.to_bytes())?;
    file.flush()?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    EmbeddingTable::from_bytes(&fs::read(path)?)
}

/// Deterministic unit-norm stand-in for an encoder: a Gaussian draw seeded by
/// the normalized text, dimension and seed.
pub fn pseudo_embed(text: &str, dim: usize, seed: u64) -> Vec<f32> {
    let key = normalize_key(text);
    let mut rng = derived_rng(seed, &[Tag::Str("pseudo-embed"), Tag::U64(dim as u64), Tag::Str(&key)]);
    let mut draw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = draw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // probability zero for dim >= 1; fall back to a basis vector
        draw[0] = 1.0;
        return draw.into_iter().map(|x| x as f32).collect();
    }
    draw.iter_mut().for_each(|x| *x /= norm);
    draw.into_iter().map(|x| x as f32).collect()
}

/// Pseudo-embed every distinct sentence, in first-appearance order.
pub fn pseudo_table<'a>(texts: impl IntoIterator<Item = &'a str>, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dim, Pooling::Synthetic)?;
    for text in texts {
        if !table.contains(text) {
            table.insert(text, pseudo_embed(text, dim, seed))?;
        }
    }
    Ok(table)
}

/// Seven context rows, row-major, `dim` columns. Masked slots are zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    dim: usize,
    data: Vec<f32>,
}

impl InputTensor {
    pub fn from_rows(dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != SLOTS * dim {
            return Err(EmbedError::DimMismatch { expected: SLOTS * dim, found: data.len() });
        }
        Ok(InputTensor { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row(i).iter().all(|&x| x == 0.0)
    }
}

pub fn assemble_input(table: &EmbeddingTable, ablated: &AblatedContext) -> Result<InputTensor> {
    if ablated.slots.len() != SLOTS {
        return Err(EmbedError::DimMismatch { expected: SLOTS, found: ablated.slots.len() });
    }
    let dim = table.dim();
    let mut data = vec![0.0f32; SLOTS * dim];
    for (i, slot) in ablated.slots.iter().enumerate() {
        if let Some(text) = &slot.text {
            data[i * dim..(i + 1) * dim].copy_from_slice(table.lookup(text)?);
        }
    }
    Ok(InputTensor { dim, data })
}
