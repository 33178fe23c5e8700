use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::ScoreMatrix;
use crate::error::{Error, Result};
use crate::similarity::rank_of_target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Coarse,
    Fine,
}

/// Labels a caption fine when its own image is ranked strictly first among
/// the candidate images, coarse otherwise. A tie at the top counts as coarse.
///
/// `t2i_scores` rows are captions and columns are images; `targets` maps
/// every caption to label onto its ground-truth image.
pub fn detect_coarse(
    t2i_scores: &ScoreMatrix,
    targets: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, Granularity>> {
    let rows: HashMap<&str, usize> = t2i_scores
        .query_ids()
        .iter()
        .enumerate()
        .map(|(i, q)| (q.as_str(), i))
        .collect();
    targets
        .iter()
        .map(|(caption, image)| {
            let row = *rows
                .get(caption.as_str())
                .ok_or_else(|| Error::UnknownId(caption.clone()))?;
            let col = t2i_scores
                .candidate_index(image)
                .ok_or_else(|| Error::TruthNotInCandidates {
                    query: caption.clone(),
                    truth: image.clone(),
                })?;
            let label = if rank_of_target(t2i_scores.row(row), col)? == 1 {
                Granularity::Fine
            } else {
                Granularity::Coarse
            };
            Ok((caption.clone(), label))
        })
        .collect()
}
