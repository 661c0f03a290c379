//! Precomputed encoder outputs and the ZSBA binary container.
//!
//! Layout (little-endian, no padding):
//!
//! ```text
//! magic "ZSBA" | version u32 = 1 | dimension u32 | count u32
//! count × ( key_len u32 | key bytes (UTF-8) | dimension × f32 )
//! ```
//!
//! Keys follow a fixed schema shared with the exporter:
//! `text::<prompt>` for text embeddings, `img::<image_id>` for full
//! images and `img::<image_id>::mask::<mask_id>` for masked images.

use std::path::Path;

use indexmap::map::Entry;
use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::similarity::Embedding;

pub const MAGIC: [u8; 4] = *b"ZSBA";
pub const VERSION: u32 = 1;

pub const TEXT_PREFIX: &str = "text::";
pub const IMAGE_PREFIX: &str = "img::";
pub const MASK_INFIX: &str = "::mask::";

pub fn text_key(prompt: &str) -> String {
    format!("{TEXT_PREFIX}{prompt}")
}

pub fn image_key(image_id: &str, mask_id: Option<&str>) -> String {
    match mask_id {
        Some(m) => format!("{IMAGE_PREFIX}{image_id}{MASK_INFIX}{m}"),
        None => format!("{IMAGE_PREFIX}{image_id}"),
    }
}

/// Source of image and text embeddings.
///
/// Implementations must be pure: the same key always yields the same vector.
pub trait EmbeddingBackend: Sync {
    fn text_embedding(&self, prompt: &str) -> Result<Embedding>;

    /// Full-image embedding when `mask_id` is `None`, masked-image embedding otherwise.
    fn image_embedding(&self, image_id: &str, mask_id: Option<&str>) -> Result<Embedding>;
}

/// Keyed embeddings of a single dimension, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    entries: IndexMap<String, Embedding>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 || u32::try_from(dimension).is_err() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: dimension,
            });
        }
        Ok(EmbeddingStore {
            dimension,
            entries: IndexMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, embedding: Embedding) -> Result<()> {
        let key = key.into();
        if key.is_empty() {
            return Err(Error::InvalidKey("empty key".into()));
        }
        if embedding.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: embedding.dim(),
            });
        }
        match self.entries.entry(key) {
            Entry::Occupied(e) => Err(Error::DuplicateKey(e.key().clone())),
            Entry::Vacant(e) => {
                e.insert(embedding);
                Ok(())
            }
        }
    }

    /// Removes `key`, keeping the order of the remaining entries.
    pub fn remove(&mut self, key: &str) -> Option<Embedding> {
        self.entries.shift_remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&Embedding> {
        self.entries.get(key)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn lookup(&self, key: String) -> Result<Embedding> {
        self.entries.get(&key).cloned().ok_or(Error::MissingKey(key))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::BadVersion(version));
        }
        let dimension = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut store = EmbeddingStore::new(dimension)?;
        for _ in 0..count {
            let key_len = r.u32()? as usize;
            let key = std::str::from_utf8(r.take(key_len)?)
                .map_err(|e| Error::InvalidKey(format!("key is not UTF-8: {e}")))?
                .to_owned();
            let payload = r.take(dimension.checked_mul(4).ok_or(Error::TruncatedFile {
                offset: r.pos,
                needed: usize::MAX,
                available: bytes.len() - r.pos,
            })?)?;
            let values = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            store.insert(key, Embedding::new(values)?)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(store)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let record = |k: &String| 4 + k.len() + 4 * self.dimension;
        let mut out = Vec::with_capacity(16 + self.entries.keys().map(record).sum::<usize>());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (key, emb) in &self.entries {
            out.extend_from_slice(&(key.len() as u32).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for v in emb.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

impl EmbeddingBackend for EmbeddingStore {
    fn text_embedding(&self, prompt: &str) -> Result<Embedding> {
        self.lookup(text_key(prompt))
    }

    fn image_embedding(&self, image_id: &str, mask_id: Option<&str>) -> Result<Embedding> {
        self.lookup(image_key(image_id, mask_id))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::TruncatedFile {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes)
}

pub fn write_embeddings(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, store.to_bytes()).map_err(|e| Error::io(path, e))
}
