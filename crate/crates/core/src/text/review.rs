use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::candidates::Selection;
use super::contracts::{parse_jsonl, to_jsonl};
use crate::dataset::CaptionRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Corrected,
    Rejected,
}

/// One renovated caption awaiting human review. Reviewers edit only
/// `status` and `corrected_text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub caption_id: String,
    pub image_id: String,
    pub original_text: String,
    pub candidate_text: String,
    pub status: ReviewStatus,
    #[serde(default)]
    pub corrected_text: Option<String>,
}

impl ReviewItem {
    fn check(&self) -> Result<()> {
        let corrected = self.status == ReviewStatus::Corrected;
        if corrected != self.corrected_text.is_some() {
            return Err(Error::Invalid(format!(
                "review item {:?}: corrected_text must be set exactly when status is corrected",
                self.caption_id
            )));
        }
        Ok(())
    }

    /// Text the caption ends up with, or `None` while pending.
    pub fn final_text(&self) -> Option<&str> {
        match self.status {
            ReviewStatus::Pending => None,
            ReviewStatus::Accepted => Some(&self.candidate_text),
            ReviewStatus::Corrected => self.corrected_text.as_deref(),
            ReviewStatus::Rejected => Some(&self.original_text),
        }
    }
}

pub fn parse_review_queue(text: &str) -> Result<Vec<ReviewItem>> {
    let items: Vec<ReviewItem> = parse_jsonl(text, "review queue")?;
    let mut seen = std::collections::HashSet::new();
    for item in &items {
        item.check()?;
        if !seen.insert(item.caption_id.as_str()) {
            return Err(Error::DuplicateId(item.caption_id.clone()));
        }
    }
    Ok(items)
}

pub fn write_review_queue(path: &Path, items: &[ReviewItem]) -> Result<()> {
    std::fs::write(path, to_jsonl(items)).map_err(|e| Error::io(path, e))
}

/// Writes one pending review item per selection and returns them.
pub fn export_review_queue(selections: &[Selection], path: &Path) -> Result<Vec<ReviewItem>> {
    let items: Vec<ReviewItem> = selections
        .iter()
        .map(|s| ReviewItem {
            caption_id: s.caption_id.clone(),
            image_id: s.image_id.clone(),
            original_text: s.original_text.clone(),
            candidate_text: s.candidate_text.clone(),
            status: ReviewStatus::Pending,
            corrected_text: None,
        })
        .collect();
    write_review_queue(path, &items)?;
    Ok(items)
}

/// Resolves every item to its final text, keyed by caption id.
pub fn apply_corrections(items: &[ReviewItem]) -> Result<BTreeMap<String, String>> {
    let pending: Vec<String> = items
        .iter()
        .filter(|i| i.status == ReviewStatus::Pending)
        .map(|i| i.caption_id.clone())
        .collect();
    if !pending.is_empty() {
        return Err(Error::PendingReview(pending));
    }
    items
        .iter()
        .map(|i| {
            i.check()?;
            let text = i.final_text().unwrap_or_default().to_string();
            Ok((i.caption_id.clone(), text))
        })
        .collect()
}

/// Replaces caption texts in place. Captions whose text changes lose their
/// token annotation, which no longer describes them.
pub fn apply_to_captions(captions: &[CaptionRecord], finals: &BTreeMap<String, String>) -> Result<Vec<CaptionRecord>> {
    let known: HashMap<&str, ()> = captions.iter().map(|c| (c.caption_id.as_str(), ())).collect();
    if let Some(id) = finals.keys().find(|id| !known.contains_key(id.as_str())) {
        return Err(Error::UnknownId(id.clone()));
    }
    Ok(captions
        .iter()
        .map(|c| match finals.get(&c.caption_id) {
            Some(text) if *text != c.text => CaptionRecord {
                text: text.clone(),
                tokens: Vec::new(),
                ..c.clone()
            },
            _ => c.clone(),
        })
        .collect())
}
