//! Binary vector cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! PATSIM-VEC v1 <model_id> <d>\n        ASCII header line
//! repeated per patent:
//!   u32   id byte length
//!   [u8]  id, UTF-8
//!   u32   n (rows)
//!   f32   n × d values, row-major
//! ```
//!
//! The file ends exactly after the last record.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use thiserror::Error;

use super::{EmbeddingMatrix, EmbeddingProvider, ProviderError};

pub const CACHE_MAGIC: &str = "PATSIM-VEC";
pub const CACHE_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad cache header: {0}")]
    Header(String),
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
    #[error("duplicate patent id {0:?} in cache")]
    DuplicateId(String),
    #[error("model id {0:?} must be non-empty and contain no whitespace")]
    ModelId(String),
    #[error("matrix for {patent_id:?} has dimension {got}, cache expects {expected}")]
    Dimension {
        patent_id: String,
        got: usize,
        expected: usize,
    },
}

/// In-memory view of a cache file, records kept in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorCache {
    model_id: String,
    dim: usize,
    records: Vec<EmbeddingMatrix<f32>>,
    index: HashMap<String, usize>,
}

impl VectorCache {
    pub fn new(model_id: impl Into<String>, dim: usize) -> Result<Self, CacheError> {
        let model_id = model_id.into();
        if model_id.is_empty() || model_id.chars().any(char::is_whitespace) {
            return Err(CacheError::ModelId(model_id));
        }
        if dim == 0 {
            return Err(CacheError::Header("dimension must be >= 1".into()));
        }
        Ok(Self {
            model_id,
            dim,
            records: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, patent_id: &str) -> Option<&EmbeddingMatrix<f32>> {
        self.index.get(patent_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[EmbeddingMatrix<f32>] {
        &self.records
    }

    pub fn insert(&mut self, m: EmbeddingMatrix<f32>) -> Result<(), CacheError> {
        if m.dim() != self.dim {
            return Err(CacheError::Dimension {
                patent_id: m.patent_id().to_string(),
                got: m.dim(),
                expected: self.dim,
            });
        }
        if self.index.contains_key(m.patent_id()) {
            return Err(CacheError::DuplicateId(m.patent_id().to_string()));
        }
        self.index.insert(m.patent_id().to_string(), self.records.len());
        self.records.push(m);
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), CacheError> {
        writeln!(out, "{CACHE_MAGIC} {CACHE_VERSION} {} {}", self.model_id, self.dim)?;
        for m in &self.records {
            let id = m.patent_id().as_bytes();
            out.write_all(&(id.len() as u32).to_le_bytes())?;
            out.write_all(id)?;
            out.write_all(&(m.rows() as u32).to_le_bytes())?;
            for v in m.as_slice() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut input: R) -> Result<Self, CacheError> {
        let mut header = Vec::new();
        input.read_until(b'\n', &mut header)?;
        if header.last() != Some(&b'\n') {
            return Err(CacheError::Header("missing header line".into()));
        }
        header.pop();
        let header = String::from_utf8(header).map_err(|_| CacheError::Header("header is not UTF-8".into()))?;
        let parts: Vec<&str> = header.split(' ').collect();
        let [magic, version, model_id, dim] = parts[..] else {
            return Err(CacheError::Header(format!("expected 4 fields, got {:?}", header)));
        };
        if magic != CACHE_MAGIC {
            return Err(CacheError::Header(format!("bad magic {magic:?}")));
        }
        if version != CACHE_VERSION {
            return Err(CacheError::Header(format!("unsupported version {version:?}")));
        }
        let dim: usize = dim
            .parse()
            .map_err(|_| CacheError::Header(format!("bad dimension {dim:?}")))?;
        let mut cache = VectorCache::new(model_id, dim)?;

        let mut index = 0;
        loop {
            let mut len = [0u8; 4];
            match read_exact_or_eof(&mut input, &mut len)? {
                Fill::Eof => break,
                Fill::Partial => return Err(record_err(index, "truncated id length")),
                Fill::Full => {}
            }
            let mut id = vec![0u8; u32::from_le_bytes(len) as usize];
            input
                .read_exact(&mut id)
                .map_err(|_| record_err(index, "truncated id"))?;
            let id = String::from_utf8(id).map_err(|_| record_err(index, "id is not UTF-8"))?;
            let mut n = [0u8; 4];
            input
                .read_exact(&mut n)
                .map_err(|_| record_err(index, "truncated row count"))?;
            let rows = u32::from_le_bytes(n) as usize;
            let mut body = vec![0u8; rows * dim * 4];
            input
                .read_exact(&mut body)
                .map_err(|_| record_err(index, "truncated vector body"))?;
            let data: Vec<f32> = body
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let m = EmbeddingMatrix::new(id, cache.model_id.clone(), rows, dim, data)
                .map_err(|e| record_err(index, &e.to_string()))?;
            cache.insert(m)?;
            index += 1;
        }
        Ok(cache)
    }
}

fn record_err(index: usize, message: &str) -> CacheError {
    CacheError::Record {
        index,
        message: message.to_string(),
    }
}

enum Fill {
    Full,
    Partial,
    Eof,
}

fn read_exact_or_eof<R: Read>(input: &mut R, buf: &mut [u8]) -> std::io::Result<Fill> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => return Ok(if filled == 0 { Fill::Eof } else { Fill::Partial }),
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Fill::Full)
}

/// Serves precomputed matrices by patent id. Text is ignored.
#[derive(Debug, Clone)]
pub struct CacheProvider {
    cache: VectorCache,
    pooled: bool,
}

impl CacheProvider {
    pub fn new(cache: VectorCache) -> Self {
        let pooled = !cache.is_empty() && cache.records().iter().all(|m| m.rows() == 1);
        Self { cache, pooled }
    }

    pub fn open(path: &std::path::Path) -> Result<Self, CacheError> {
        let file = std::fs::File::open(path)?;
        Ok(Self::new(VectorCache::read(std::io::BufReader::new(file))?))
    }

    pub fn cache(&self) -> &VectorCache {
        &self.cache
    }
}

impl EmbeddingProvider for CacheProvider {
    fn model_id(&self) -> &str {
        self.cache.model_id()
    }

    fn dimension(&self) -> usize {
        self.cache.dim()
    }

    fn pooled(&self) -> bool {
        self.pooled
    }

    fn embed(&self, patent_id: &str, _text: &str) -> Result<EmbeddingMatrix<f32>, ProviderError> {
        self.cache
            .get(patent_id)
            .cloned()
            .ok_or_else(|| ProviderError::Missing {
                model_id: self.cache.model_id().to_string(),
                patent_id: patent_id.to_string(),
            })
    }
}
