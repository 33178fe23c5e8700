use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_MAGIC: [u8; 4] = *b"FGS1";

/// Similarities of every query against every candidate, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    query_ids: Vec<String>,
    candidate_ids: Vec<String>,
    scores: Vec<f32>,
    candidate_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    query_ids: Vec<String>,
    candidate_ids: Vec<String>,
}

impl ScoreMatrix {
    pub fn new(query_ids: Vec<String>, candidate_ids: Vec<String>, scores: Vec<f32>) -> Result<Self> {
        let cols = candidate_ids.len();
        if scores.len() != query_ids.len() * cols {
            return Err(Error::PayloadLength {
                expected: query_ids.len() * cols * 4,
                found: scores.len() * 4,
            });
        }
        if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        super::index_ids(&query_ids)?;
        let candidate_index = super::index_ids(&candidate_ids)?;
        Ok(Self {
            query_ids,
            candidate_ids,
            scores,
            candidate_index,
        })
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn candidate_ids(&self) -> &[String] {
        &self.candidate_ids
    }

    pub fn n_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = self.candidate_ids.len();
        &self.scores[i * c..(i + 1) * c]
    }

    pub fn values(&self) -> &[f32] {
        &self.scores
    }

    pub fn candidate_index(&self, id: &str) -> Option<usize> {
        self.candidate_index.get(id).copied()
    }

    pub fn query_index(&self, id: &str) -> Option<usize> {
        self.query_ids.iter().position(|q| q == id)
    }

    /// Dump layout: magic, u32 LE header length, JSON header, f32 LE payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&DumpHeader {
            query_ids: self.query_ids.clone(),
            candidate_ids: self.candidate_ids.clone(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(8 + header.len() + self.scores.len() * 4);
        out.extend_from_slice(&SCORE_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.scores {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || bytes[..4] != SCORE_MAGIC {
            return Err(Error::BadMagic {
                expected: SCORE_MAGIC,
                found: bytes[..bytes.len().min(4)].to_vec(),
            });
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header_end = 8usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::parse("score dump", "header length exceeds file"))?;
        let header: DumpHeader =
            serde_json::from_slice(&bytes[8..header_end]).map_err(|e| Error::parse("score dump header", e))?;
        let scores = super::embeddings::decode_payload(
            &bytes[header_end..],
            header.query_ids.len(),
            header.candidate_ids.len(),
        )?;
        Self::new(header.query_ids, header.candidate_ids, scores)
    }
}

pub fn load_scores(path: &Path) -> Result<ScoreMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ScoreMatrix::from_bytes(&bytes)
}

pub fn write_scores(scores: &ScoreMatrix, path: &Path) -> Result<()> {
    super::write_file(path, &scores.to_bytes())
}
