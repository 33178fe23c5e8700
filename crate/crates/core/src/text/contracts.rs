//! JSONL records exchanged with generation, merging and scoring backends.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prompted input sent to the detail generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub caption_id: String,
    pub image_id: String,
    pub prompted_input: String,
}

/// One generated detail sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub caption_id: String,
    pub generated_detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub caption_id: String,
    pub image_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub caption_id: String,
    pub clipscore: f64,
}

/// Two-sentence text to be merged into one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRequest {
    pub caption_id: String,
    pub original_text: String,
    pub generated_detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub caption_id: String,
    pub merged_text: String,
}

/// Checks a decoded record beyond what deserialization enforces.
pub trait Record {
    fn caption_id(&self) -> &str;

    /// Text fields that must not be blank.
    fn texts(&self) -> Vec<&str> {
        Vec::new()
    }

    fn extra_problem(&self) -> Option<String> {
        None
    }
}

impl Record for PromptRecord {
    fn caption_id(&self) -> &str {
        &self.caption_id
    }

    fn texts(&self) -> Vec<&str> {
        vec![&self.image_id, &self.prompted_input]
    }
}

impl Record for GenerationRecord {
    fn caption_id(&self) -> &str {
        &self.caption_id
    }

    fn texts(&self) -> Vec<&str> {
        vec![&self.generated_detail]
    }
}

impl Record for ScoreRecord {
    fn caption_id(&self) -> &str {
        &self.caption_id
    }

    fn extra_problem(&self) -> Option<String> {
        (!self.clipscore.is_finite()).then(|| format!("clipscore {} is not finite", self.clipscore))
    }
}

impl Record for MergeRecord {
    fn caption_id(&self) -> &str {
        &self.caption_id
    }

    fn texts(&self) -> Vec<&str> {
        vec![&self.merged_text]
    }
}

/// Problems per record, as (1-based record number, message).
pub fn record_problems<T: Record>(records: &[T]) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.caption_id().trim().is_empty() {
            out.push((i + 1, "empty caption_id".to_string()));
        }
        if r.texts().iter().any(|t| t.trim().is_empty()) {
            out.push((i + 1, format!("blank text field for {:?}", r.caption_id())));
        }
        if let Some(p) = r.extra_problem() {
            out.push((i + 1, p));
        }
    }
    out
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, context: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(format!("{context} line {}", i + 1), e)))
        .collect()
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text, &path.display().to_string())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    std::fs::write(path, to_jsonl(records)).map_err(|e| Error::io(path, e))
}
