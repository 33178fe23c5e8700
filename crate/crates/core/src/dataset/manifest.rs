use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::captions::CaptionRecord;
use crate::error::{Error, Result};

/// Dataset index. Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub image_ids: Vec<String>,
    pub captions_path: PathBuf,
    pub image_embeddings_path: PathBuf,
    pub text_embeddings_path: PathBuf,
    #[serde(default)]
    pub exclusion_ids: BTreeSet<String>,
    /// Captions per image. Derived from the caption file when omitted.
    #[serde(default)]
    pub captions_per_image: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("manifest", e))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn captions_file(&self) -> PathBuf {
        self.resolve(&self.captions_path)
    }

    pub fn image_embeddings_file(&self) -> PathBuf {
        self.resolve(&self.image_embeddings_path)
    }

    pub fn text_embeddings_file(&self) -> PathBuf {
        self.resolve(&self.text_embeddings_path)
    }

    /// Image ids listed more than once, each reported once in first-seen order.
    pub fn duplicate_image_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut reported = HashSet::new();
        let mut out = Vec::new();
        for id in &self.image_ids {
            if !seen.insert(id.as_str()) && reported.insert(id.as_str()) {
                out.push(id.clone());
            }
        }
        out
    }

    /// Pool ids that also appear in the exclusion list, sorted.
    pub fn excluded_pool_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .image_ids
            .iter()
            .filter(|id| self.exclusion_ids.contains(*id))
            .cloned()
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Captions per image; 0 until known.
    pub fn m(&self) -> usize {
        self.captions_per_image.unwrap_or(0)
    }

    /// Checks the structural invariants and fills in `captions_per_image`
    /// from `captions` when absent.
    pub fn check(&mut self, captions: &[CaptionRecord]) -> Result<()> {
        if let Some(dup) = self.duplicate_image_ids().into_iter().next() {
            return Err(Error::DuplicateId(dup));
        }
        let overlap = self.excluded_pool_ids();
        if !overlap.is_empty() {
            return Err(Error::ExclusionOverlap(overlap));
        }
        let pool: HashSet<&str> = self.image_ids.iter().map(String::as_str).collect();
        if let Some(c) = captions.iter().find(|c| !pool.contains(c.image_id.as_str())) {
            return Err(Error::DanglingImage {
                caption_id: c.caption_id.clone(),
                image_id: c.image_id.clone(),
            });
        }
        if self.captions_per_image.is_none() {
            self.captions_per_image = Some(modal_caption_count(captions));
        }
        Ok(())
    }
}

/// Most common per-image caption count over captioned images; ties go to the
/// larger count.
fn modal_caption_count(captions: &[CaptionRecord]) -> usize {
    let mut per_image: BTreeMap<&str, usize> = BTreeMap::new();
    for c in captions {
        *per_image.entry(c.image_id.as_str()).or_default() += 1;
    }
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for n in per_image.values() {
        *freq.entry(*n).or_default() += 1;
    }
    freq.into_iter()
        .max_by_key(|&(count, f)| (f, count))
        .map(|(count, _)| count)
        .unwrap_or(0)
}

/// Reads a manifest without checking its invariants.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let mut m = Manifest::from_json_str(&super::read_to_string(path)?)?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(m)
}

/// Reads a manifest and its caption file, enforcing every manifest invariant.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let mut m = read_manifest(path)?;
    let captions = super::load_captions(&m.captions_file())?;
    m.check(&captions)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caption(cid: &str, iid: &str) -> CaptionRecord {
        CaptionRecord {
            caption_id: cid.into(),
            image_id: iid.into(),
            text: "x".into(),
            tokens: vec![],
        }
    }

    fn manifest(images: &[&str], exclusions: &[&str]) -> Manifest {
        Manifest {
            name: "t".into(),
            image_ids: images.iter().map(|s| s.to_string()).collect(),
            captions_path: "c.jsonl".into(),
            image_embeddings_path: "i.fge1".into(),
            text_embeddings_path: "t.fge1".into(),
            exclusion_ids: exclusions.iter().map(|s| s.to_string()).collect(),
            captions_per_image: None,
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn derives_m_from_captions() {
        let mut m = manifest(&["a", "b", "c"], &[]);
        let caps: Vec<_> = (0..15)
            .map(|i| caption(&format!("c{i}"), ["a", "b", "c"][i / 5]))
            .collect();
        m.check(&caps).unwrap();
        assert_eq!(m.captions_per_image, Some(5));
    }

    #[test]
    fn duplicate_image_is_named() {
        let mut m = manifest(&["x", "y", "x"], &[]);
        assert!(matches!(m.check(&[]), Err(Error::DuplicateId(id)) if id == "x"));
    }

    #[test]
    fn exclusion_overlap_is_an_error() {
        let mut m = manifest(&["a", "b"], &["b", "z"]);
        assert!(matches!(m.check(&[]), Err(Error::ExclusionOverlap(ids)) if ids == vec!["b"]));
    }

    #[test]
    fn dangling_caption_is_an_error() {
        let mut m = manifest(&["a"], &[]);
        let err = m.check(&[caption("c0", "nope")]).unwrap_err();
        assert!(matches!(err, Error::DanglingImage { image_id, .. } if image_id == "nope"));
    }

    #[test]
    fn json_shape() {
        let m = Manifest::from_json_str(
            r#"{"name":"n","image_ids":["a"],"captions_path":"c","image_embeddings_path":"i",
                "text_embeddings_path":"t","exclusion_ids":["q"],"captions_per_image":5}"#,
        )
        .unwrap();
        assert_eq!(m.m(), 5);
        assert!(m.exclusion_ids.contains("q"));
    }
}
