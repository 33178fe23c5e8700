use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::contracts::{GenerationRecord, MergeRecord, ScoreRecord};
use crate::dataset::CaptionRecord;
use crate::error::{Error, Result};

/// A coarse caption paired with one generated detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenovationCandidate {
    pub caption_id: String,
    pub image_id: String,
    pub original_text: String,
    pub generated_detail: String,
    /// Original caption and detail as two sentences.
    pub combined_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_text: Option<String>,
    #[serde(default)]
    pub clipscore_original: Option<f64>,
    /// Score of the combined text, or of the merged text once merged.
    #[serde(default)]
    pub clipscore_candidate: Option<f64>,
}

impl RenovationCandidate {
    fn scores(&self) -> Result<(f64, f64)> {
        match (self.clipscore_original, self.clipscore_candidate) {
            (Some(o), Some(c)) => Ok((o, c)),
            _ => Err(Error::MissingScore(self.caption_id.clone())),
        }
    }
}

/// Appends a detail sentence to a caption, terminating the caption with a
/// period first if it has no sentence-final punctuation.
pub fn combine_detail(original: &str, detail: &str) -> String {
    let original = original.trim();
    let detail = detail.trim();
    if original.ends_with(['.', '!', '?']) {
        format!("{original} {detail}")
    } else {
        format!("{original}. {detail}")
    }
}

/// Keeps candidates scoring at least as well as their original caption.
pub fn filter_candidates(candidates: Vec<RenovationCandidate>) -> Result<Vec<RenovationCandidate>> {
    let mut kept = Vec::with_capacity(candidates.len());
    for c in candidates {
        let (orig, cand) = c.scores()?;
        if cand >= orig {
            kept.push(c);
        }
    }
    Ok(kept)
}

/// Highest-scoring candidate, earliest on ties. `None` means the caption
/// keeps its original text.
pub fn select_best(candidates: &[RenovationCandidate]) -> Result<Option<&RenovationCandidate>> {
    let mut best: Option<(&RenovationCandidate, f64)> = None;
    for c in candidates {
        if c.merged_text.is_none() {
            return Err(Error::Invalid(format!(
                "candidate for {:?} has no merged text",
                c.caption_id
            )));
        }
        let (_, score) = c.scores()?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    Ok(best.map(|(c, _)| c))
}

/// Final renovated text chosen for one caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub caption_id: String,
    pub image_id: String,
    pub original_text: String,
    pub candidate_text: String,
    pub clipscore_original: f64,
    pub clipscore_candidate: f64,
}

/// Filters, then selects the best merged candidate of every caption, in
/// first-seen caption order. Captions with no survivor are omitted.
pub fn select_per_caption(candidates: Vec<RenovationCandidate>) -> Result<Vec<Selection>> {
    let survivors = filter_candidates(candidates)?;
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<RenovationCandidate>> = HashMap::new();
    for c in &survivors {
        let group = groups.entry(c.caption_id.as_str()).or_default();
        if group.is_empty() {
            order.push(c.caption_id.as_str());
        }
        group.push(c.clone());
    }
    let mut out = Vec::new();
    for id in order {
        if let Some(best) = select_best(&groups[id])? {
            let (orig, cand) = best.scores()?;
            out.push(Selection {
                caption_id: best.caption_id.clone(),
                image_id: best.image_id.clone(),
                original_text: best.original_text.clone(),
                candidate_text: best.merged_text.clone().unwrap_or_default(),
                clipscore_original: orig,
                clipscore_candidate: cand,
            });
        }
    }
    Ok(out)
}

fn check_aligned(kind: &str, expected: &str, found: &str, line: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Invalid(format!(
            "{kind} line {line}: expected caption {expected:?}, found {found:?}"
        )));
    }
    Ok(())
}

/// Builds candidates from generated details.
///
/// `candidate_scores` must be line-aligned with `generations`; original
/// scores are looked up by caption id.
pub fn collect_candidates(
    captions: &[CaptionRecord],
    generations: &[GenerationRecord],
    original_scores: &[ScoreRecord],
    candidate_scores: &[ScoreRecord],
) -> Result<Vec<RenovationCandidate>> {
    if candidate_scores.len() != generations.len() {
        return Err(Error::Invalid(format!(
            "{} candidate scores for {} generations",
            candidate_scores.len(),
            generations.len()
        )));
    }
    let by_id: HashMap<&str, &CaptionRecord> = captions.iter().map(|c| (c.caption_id.as_str(), c)).collect();
    let originals: HashMap<&str, f64> = original_scores
        .iter()
        .map(|s| (s.caption_id.as_str(), s.clipscore))
        .collect();
    generations
        .iter()
        .zip(candidate_scores)
        .enumerate()
        .map(|(i, (g, s))| {
            check_aligned("candidate scores", &g.caption_id, &s.caption_id, i + 1)?;
            let caption = by_id
                .get(g.caption_id.as_str())
                .ok_or_else(|| Error::UnknownId(g.caption_id.clone()))?;
            Ok(RenovationCandidate {
                caption_id: g.caption_id.clone(),
                image_id: caption.image_id.clone(),
                original_text: caption.text.clone(),
                generated_detail: g.generated_detail.clone(),
                combined_text: combine_detail(&caption.text, &g.generated_detail),
                merged_text: None,
                clipscore_original: originals.get(g.caption_id.as_str()).copied(),
                clipscore_candidate: Some(s.clipscore),
            })
        })
        .collect()
}

/// Attaches merged texts and their scores, both line-aligned with `candidates`.
pub fn attach_merges(
    candidates: Vec<RenovationCandidate>,
    merges: &[MergeRecord],
    merged_scores: &[ScoreRecord],
) -> Result<Vec<RenovationCandidate>> {
    if merges.len() != candidates.len() || merged_scores.len() != candidates.len() {
        return Err(Error::Invalid(format!(
            "{} candidates, {} merges, {} merged scores",
            candidates.len(),
            merges.len(),
            merged_scores.len()
        )));
    }
    candidates
        .into_iter()
        .zip(merges.iter().zip(merged_scores))
        .enumerate()
        .map(|(i, (mut c, (m, s)))| {
            check_aligned("merges", &c.caption_id, &m.caption_id, i + 1)?;
            check_aligned("merged scores", &c.caption_id, &s.caption_id, i + 1)?;
            c.merged_text = Some(m.merged_text.clone());
            c.clipscore_candidate = Some(s.clipscore);
            Ok(c)
        })
        .collect()
}
