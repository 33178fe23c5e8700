//! Persistent data types and their on-disk formats.
//!
//! Every stage of the pipeline talks to the others through the files defined
//! here: the JSON manifest, caption JSONL, `FGE1` embedding matrices with an
//! id sidecar, and `FGS1` score-matrix dumps.

mod captions;
mod embeddings;
mod manifest;
mod scores;
mod validate;

pub use captions::{detokenize, load_captions, parse_captions, write_captions, CaptionRecord, Token, Upos};
pub use embeddings::{ids_sidecar, load_embeddings, parse_ids, write_embeddings, EmbeddingMatrix, EMBEDDING_MAGIC};
pub use manifest::{load_manifest, read_manifest, Manifest};
pub use scores::{load_scores, write_scores, ScoreMatrix, SCORE_MAGIC};
pub use validate::{validate_dataset, Issue, ValidationReport};

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// A manifest with its captions and both embedding matrices loaded.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub captions: Vec<CaptionRecord>,
    pub image_embeddings: EmbeddingMatrix,
    pub text_embeddings: EmbeddingMatrix,
}

impl Dataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let mut manifest = read_manifest(manifest_path)?;
        let captions = load_captions(&manifest.captions_file())?;
        manifest.check(&captions)?;
        let img = manifest.image_embeddings_file();
        let txt = manifest.text_embeddings_file();
        Ok(Self {
            image_embeddings: load_embeddings(&img, &ids_sidecar(&img))?,
            text_embeddings: load_embeddings(&txt, &ids_sidecar(&txt))?,
            manifest,
            captions,
        })
    }

    /// Captioned images in manifest order, each with its caption ids.
    pub fn targets(&self) -> Vec<(String, Vec<String>)> {
        let mut by_image: HashMap<&str, Vec<String>> = HashMap::new();
        for c in &self.captions {
            by_image
                .entry(c.image_id.as_str())
                .or_default()
                .push(c.caption_id.clone());
        }
        self.manifest
            .image_ids
            .iter()
            .filter_map(|id| by_image.remove(id.as_str()).map(|caps| (id.clone(), caps)))
            .collect()
    }
}

/// Builds an id → position map, failing on the first repeated id.
pub(crate) fn index_ids(ids: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(index)
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
