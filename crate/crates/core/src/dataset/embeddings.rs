use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"FGE1";
const HEADER_LEN: usize = 12;

/// Dense row-major `f32` matrix with one id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    values: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        let expected = ids
            .len()
            .checked_mul(dim)
            .ok_or_else(|| Error::Invalid(format!("{} rows x {} dims overflows", ids.len(), dim)))?;
        if values.len() != expected {
            return Err(Error::PayloadLength {
                expected: expected * 4,
                found: values.len() * 4,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        let index = super::index_ids(&ids)?;
        Ok(Self {
            ids,
            dim,
            values,
            index,
        })
    }

    /// Builds a matrix from per-row vectors; every row must have length `dim`.
    pub fn from_rows(ids: Vec<String>, dim: usize, rows: Vec<Vec<f32>>) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        if rows.len() != ids.len() {
            return Err(Error::CountMismatch {
                rows: rows.len(),
                ids: ids.len(),
            });
        }
        Self::new(ids, dim, values)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row_by_id(&self, id: &str) -> Option<&[f32]> {
        self.index_of(id).map(|i| self.row(i))
    }

    /// Serializes the binary payload (header plus values).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(&EMBEDDING_MAGIC);
        out.extend_from_slice(&(self.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Serializes the id sidecar: one id per line, each newline-terminated.
    pub fn ids_to_string(&self) -> String {
        let mut out = String::new();
        for id in &self.ids {
            out.push_str(id);
            out.push('\n');
        }
        out
    }

    /// Decodes a binary payload together with its id sidecar text.
    pub fn from_bytes(bytes: &[u8], ids_text: &str) -> Result<Self> {
        let (rows, dim) = decode_header(bytes)?;
        let ids = parse_ids(ids_text)?;
        if ids.len() != rows {
            return Err(Error::CountMismatch { rows, ids: ids.len() });
        }
        let values = decode_payload(&bytes[HEADER_LEN..], rows, dim)?;
        Self::new(ids, dim, values)
    }
}

fn decode_header(bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < HEADER_LEN || bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::BadMagic {
            expected: EMBEDDING_MAGIC,
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    Ok((rows, dim))
}

/// Decodes `rows * dim` little-endian floats, requiring the exact byte length.
pub(crate) fn decode_payload(payload: &[u8], rows: usize, dim: usize) -> Result<Vec<f32>> {
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Invalid(format!("{rows} rows x {dim} dims overflows")))?;
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            found: payload.len(),
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / dim,
            col: pos % dim,
        });
    }
    Ok(values)
}

/// Parses an id sidecar. Every id must be non-empty and newline-terminated.
pub fn parse_ids(text: &str) -> Result<Vec<String>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let Some(body) = text.strip_suffix('\n') else {
        return Err(Error::parse("id file", "last id is not newline-terminated"));
    };
    body.split('\n')
        .enumerate()
        .map(|(i, id)| {
            if id.is_empty() || id.contains('\r') {
                Err(Error::parse(
                    "id file",
                    format!("line {} is empty or contains a carriage return", i + 1),
                ))
            } else {
                Ok(id.to_string())
            }
        })
        .collect()
}

/// Sidecar id path for an embedding file: the same path with `.ids` appended.
pub fn ids_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub fn load_embeddings(path: &Path, ids_path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ids = super::read_to_string(ids_path)?;
    EmbeddingMatrix::from_bytes(&bytes, &ids)
}

pub fn write_embeddings(matrix: &EmbeddingMatrix, path: &Path, ids_path: &Path) -> Result<()> {
    super::write_file(path, &matrix.to_bytes())?;
    super::write_file(ids_path, matrix.ids_to_string().as_bytes())
}
