//! Precomputed vector tables: sentence embeddings (binary `GNATEMB1`) and
//! static word vectors (whitespace-separated text).
//!
//! `GNATEMB1` layout, all integers little-endian `u32`:
//!
//! ```text
//! "GNATEMB1" | version = 1 | dim | record count
//! record: doc-id byte length | doc-id UTF-8 | segment index | dim × f32 (LE)
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"GNATEMB1";
pub const EMBEDDING_VERSION: u32 = 1;
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    vectors: HashMap<String, HashMap<usize, Vec<f32>>>,
    pub normalized: bool,
}

fn l2(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            normalized: true,
        })
    }

    pub fn insert(&mut self, doc_id: &str, index: usize, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        if (l2(&vector) - 1.0).abs() > NORM_TOLERANCE {
            self.normalized = false;
        }
        self.vectors
            .entry(doc_id.to_owned())
            .or_default()
            .insert(index, vector);
        Ok(())
    }

    pub fn get(&self, doc_id: &str, index: usize) -> Option<&[f32]> {
        self.vectors
            .get(doc_id)
            .and_then(|segs| segs.get(&index))
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records in `(doc_id, segment index)` order.
    pub fn records(&self) -> Vec<(&str, usize, &[f32])> {
        let mut out: Vec<_> = self
            .vectors
            .iter()
            .flat_map(|(d, segs)| segs.iter().map(move |(i, v)| (d.as_str(), *i, v.as_slice())))
            .collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |d: String| Error::format("embedding file", d);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header".into()))?;
        if &magic != EMBEDDING_MAGIC {
            return Err(bad("bad magic bytes".into()));
        }
        let read_u32 = |r: &mut dyn Read, what: &str| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|_| bad(format!("truncated {what}")))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = read_u32(&mut r, "version")?;
        if version != EMBEDDING_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut r, "dim")? as usize;
        let count = read_u32(&mut r, "record count")? as usize;
        let mut table = EmbeddingTable::new(dim)?;

        let mut buf = vec![0u8; dim * 4];
        for k in 0..count {
            let id_len = read_u32(&mut r, "doc id length")? as usize;
            let mut id = vec![0u8; id_len];
            r.read_exact(&mut id)
                .map_err(|_| bad(format!("truncated doc id in record {k}")))?;
            let id = String::from_utf8(id).map_err(|_| bad(format!("doc id of record {k} is not UTF-8")))?;
            let index = read_u32(&mut r, "segment index")? as usize;
            r.read_exact(&mut buf)
                .map_err(|_| bad(format!("truncated vector in record {k}")))?;
            let v: Vec<f32> = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let norm = l2(&v);
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(bad(format!(
                    "record {k} (`{id}` segment {index}) has L2 norm {norm}, expected 1"
                )));
            }
            table.insert(&id, index, v)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let records = self.records();
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(records.len() as u32).to_le_bytes())?;
        for (id, index, v) in records {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            w.write_all(&(index as u32).to_le_bytes())?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Writes to `path` through a temporary sibling file and a rename.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let write = || -> std::io::Result<()> {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            self.write_to(&mut f)?;
            f.into_inner().map_err(|e| e.into_error())?.sync_all()
        };
        write().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordVectorTable {
    pub fn from_pairs<S: Into<String>>(
        dim: usize,
        pairs: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (token, v) in pairs {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: v.len(),
                });
            }
            vectors.insert(token.into(), v);
        }
        Ok(WordVectorTable { dim, vectors })
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// One `token v1 ... vdim` line per word; the first line fixes `dim`.
    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::format("word-vector file", e.to_string()))?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let v = fields
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| {
                    Error::format("word-vector file", format!("line {}: {e}", lineno + 1))
                })?;
            let d = *dim.get_or_insert(v.len());
            if v.len() != d || d == 0 {
                return Err(Error::format(
                    "word-vector file",
                    format!("line {}: expected {d} values, found {}", lineno + 1, v.len()),
                ));
            }
            vectors.insert(token.to_owned(), v);
        }
        let dim = dim.ok_or_else(|| Error::format("word-vector file", "no vectors"))?;
        Ok(WordVectorTable { dim, vectors })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|e| e.in_file(path))
    }
}
