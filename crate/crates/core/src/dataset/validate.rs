use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{ids_sidecar, load_captions, load_embeddings, Manifest};

/// One inconsistency found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    DuplicateImageId {
        id: String,
    },
    ExclusionOverlap {
        id: String,
    },
    DanglingCaption {
        caption_id: String,
        image_id: String,
    },
    CaptionCount {
        image_id: String,
        found: usize,
        expected: usize,
    },
    MissingEmbedding {
        file: String,
        id: String,
    },
    UnexpectedEmbedding {
        file: String,
        id: String,
    },
    TokensMismatchText {
        caption_id: String,
    },
    Unreadable {
        file: String,
        message: String,
    },
    BadRecord {
        file: String,
        record: usize,
        message: String,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DuplicateImageId { id } => write!(f, "image id {id:?} listed more than once"),
            Issue::ExclusionOverlap { id } => write!(f, "pool image {id:?} is in the exclusion list"),
            Issue::DanglingCaption { caption_id, image_id } => {
                write!(f, "caption {caption_id:?} references unknown image {image_id:?}")
            }
            Issue::CaptionCount {
                image_id,
                found,
                expected,
            } => write!(f, "image {image_id:?}: caption count {found} ≠ {expected}"),
            Issue::MissingEmbedding { file, id } => write!(f, "{file}: no row for {id:?}"),
            Issue::UnexpectedEmbedding { file, id } => {
                write!(f, "{file}: row {id:?} is not in the dataset")
            }
            Issue::TokensMismatchText { caption_id } => {
                write!(f, "caption {caption_id:?}: tokens do not reconstruct the text")
            }
            Issue::Unreadable { file, message } => write!(f, "{file}: {message}"),
            Issue::BadRecord { file, record, message } => write!(f, "{file} record {record}: {message}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks a dataset for consistency. Problems are collected, never raised.
///
/// Images without any caption are auxiliary-style candidates and are not
/// held to the per-image caption count.
pub fn validate_dataset(manifest: &Manifest) -> ValidationReport {
    let mut issues = Vec::new();
    for id in manifest.duplicate_image_ids() {
        issues.push(Issue::DuplicateImageId { id });
    }
    for id in manifest.excluded_pool_ids() {
        issues.push(Issue::ExclusionOverlap { id });
    }

    let captions_file = manifest.captions_file();
    let captions = match load_captions(&captions_file) {
        Ok(c) => c,
        Err(e) => {
            issues.push(Issue::Unreadable {
                file: captions_file.display().to_string(),
                message: e.to_string(),
            });
            Vec::new()
        }
    };

    let pool: HashSet<&str> = manifest.image_ids.iter().map(String::as_str).collect();
    let mut per_image: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &captions {
        if pool.contains(c.image_id.as_str()) {
            *per_image.entry(c.image_id.as_str()).or_default() += 1;
        } else {
            issues.push(Issue::DanglingCaption {
                caption_id: c.caption_id.clone(),
                image_id: c.image_id.clone(),
            });
        }
        if !c.tokens.is_empty() && !c.tokens_match_text() {
            issues.push(Issue::TokensMismatchText {
                caption_id: c.caption_id.clone(),
            });
        }
    }
    if let Some(expected) = manifest.captions_per_image {
        let mut seen = HashSet::new();
        for id in &manifest.image_ids {
            if !seen.insert(id.as_str()) {
                continue;
            }
            let found = per_image.get(id.as_str()).copied().unwrap_or(0);
            if found != 0 && found != expected {
                issues.push(Issue::CaptionCount {
                    image_id: id.clone(),
                    found,
                    expected,
                });
            }
        }
    }

    check_alignment(
        &mut issues,
        &manifest.image_embeddings_file(),
        manifest.image_ids.iter().map(String::as_str),
    );
    check_alignment(
        &mut issues,
        &manifest.text_embeddings_file(),
        captions.iter().map(|c| c.caption_id.as_str()),
    );

    ValidationReport { issues }
}

fn check_alignment<'a>(issues: &mut Vec<Issue>, path: &std::path::Path, expected: impl Iterator<Item = &'a str>) {
    let file = path.display().to_string();
    let matrix = match load_embeddings(path, &ids_sidecar(path)) {
        Ok(m) => m,
        Err(e) => {
            issues.push(Issue::Unreadable {
                file,
                message: e.to_string(),
            });
            return;
        }
    };
    let mut wanted = HashSet::new();
    for id in expected {
        if wanted.insert(id) && matrix.index_of(id).is_none() {
            issues.push(Issue::MissingEmbedding {
                file: file.clone(),
                id: id.to_string(),
            });
        }
    }
    for id in matrix.ids() {
        if !wanted.contains(id.as_str()) {
            issues.push(Issue::UnexpectedEmbedding {
                file: file.clone(),
                id: id.clone(),
            });
        }
    }
}
