//! Recall@K evaluation and the benchmark protocols built on it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::dataset::{CaptionRecord, EmbeddingMatrix, ScoreMatrix, Upos};
use crate::error::{Error, Result};
use crate::similarity::{topk_row, CosineIndex};
use crate::synth;

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];
/// Candidates per query in the similar setting of the mini-test.
pub const MINI_TEST_POOL: usize = 100;
pub const MINI_TEST_QUERIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    T2i,
    I2t,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::T2i => "t2i",
            Task::I2t => "i2t",
        })
    }
}

/// Query id → ids of every candidate that counts as a hit.
pub type GroundTruth = BTreeMap<String, Vec<String>>;

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn serialize_recalls<S: Serializer>(recalls: &BTreeMap<usize, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rounded: BTreeMap<String, f64> = recalls.iter().map(|(k, v)| (k.to_string(), round2(*v))).collect();
    rounded.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub task: Task,
    pub pool_label: String,
    pub n_queries: usize,
    pub pool_size: usize,
    /// K → percentage of queries with a hit in the top K.
    #[serde(serialize_with = "serialize_recalls")]
    pub recalls: BTreeMap<usize, f64>,
}

impl fmt::Display for RetrievalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] queries={} pool={}",
            self.task, self.pool_label, self.n_queries, self.pool_size
        )?;
        for (k, v) in &self.recalls {
            write!(f, " R@{k}={v:.2}")?;
        }
        Ok(())
    }
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!(
            "ks must be non-empty, positive and strictly ascending, got {ks:?}"
        )));
    }
    Ok(())
}

/// Pessimistic-by-index rank of the best truth column, counting only columns
/// in `allowed` (all columns when `None`).
fn best_truth_rank(row: &[f32], truth: &[usize], allowed: Option<&[usize]>) -> usize {
    truth
        .iter()
        .map(|&t| {
            let st = row[t];
            let beats = |j: usize| row[j] > st || (row[j] == st && j < t);
            1 + match allowed {
                Some(cols) => cols.iter().filter(|&&j| beats(j)).count(),
                None => (0..row.len()).filter(|&j| beats(j)).count(),
            }
        })
        .min()
        .unwrap_or(usize::MAX)
}

struct QuerySpec<'a> {
    row: usize,
    truth: Vec<usize>,
    allowed: Option<&'a [usize]>,
}

fn report_from_ranks(task: Task, pool_label: &str, pool_size: usize, ranks: &[usize], ks: &[usize]) -> RetrievalReport {
    let n = ranks.len();
    let recalls = ks
        .iter()
        .map(|&k| {
            let hits = ranks.iter().filter(|&&r| r <= k).count();
            let pct = if n == 0 { 0.0 } else { 100.0 * hits as f64 / n as f64 };
            (k, pct)
        })
        .collect();
    RetrievalReport {
        task,
        pool_label: pool_label.to_string(),
        n_queries: n,
        pool_size,
        recalls,
    }
}

fn evaluate(scores: &ScoreMatrix, specs: &[QuerySpec<'_>]) -> Vec<usize> {
    specs
        .par_iter()
        .map(|q| best_truth_rank(scores.row(q.row), &q.truth, q.allowed))
        .collect()
}

fn truth_columns(scores: &ScoreMatrix, query: &str, truth: &GroundTruth) -> Result<Vec<usize>> {
    let ids = truth
        .get(query)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| Error::MissingTruth(query.to_string()))?;
    ids.iter()
        .map(|t| {
            scores.candidate_index(t).ok_or_else(|| Error::TruthNotInCandidates {
                query: query.to_string(),
                truth: t.clone(),
            })
        })
        .collect()
}

/// Recall@K over every query row. A query hits at K when any of its truth
/// candidates is among the top K under the score-then-index order.
pub fn recall_at_k(
    scores: &ScoreMatrix,
    truth: &GroundTruth,
    ks: &[usize],
    task: Task,
    pool_label: &str,
) -> Result<RetrievalReport> {
    check_ks(ks)?;
    let specs = scores
        .query_ids()
        .iter()
        .enumerate()
        .map(|(row, q)| {
            Ok(QuerySpec {
                row,
                truth: truth_columns(scores, q, truth)?,
                allowed: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ranks = evaluate(scores, &specs);
    Ok(report_from_ranks(task, pool_label, scores.n_candidates(), &ranks, ks))
}

fn query_rows(scores: &ScoreMatrix) -> HashMap<&str, usize> {
    scores
        .query_ids()
        .iter()
        .enumerate()
        .map(|(i, q)| (q.as_str(), i))
        .collect()
}

fn columns_of(scores: &ScoreMatrix, ids: &[String]) -> Result<Vec<usize>> {
    let mut cols: Vec<usize> = ids
        .iter()
        .map(|id| scores.candidate_index(id).ok_or_else(|| Error::UnknownId(id.clone())))
        .collect::<Result<_>>()?;
    cols.sort_unstable();
    if cols.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Invalid("candidate restriction lists an id twice".into()));
    }
    Ok(cols)
}

/// Truth columns of `query` that fall inside the sorted column set `allowed`.
fn restricted_truth(scores: &ScoreMatrix, query: &str, truth: &GroundTruth, allowed: &[usize]) -> Result<Vec<usize>> {
    let ids = truth
        .get(query)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| Error::MissingTruth(query.to_string()))?;
    let cols: Vec<usize> = ids
        .iter()
        .filter_map(|t| scores.candidate_index(t))
        .filter(|c| allowed.binary_search(c).is_ok())
        .collect();
    if cols.is_empty() {
        return Err(Error::TruthNotInCandidates {
            query: query.to_string(),
            truth: ids[0].clone(),
        });
    }
    Ok(cols)
}

/// Draws `n` query ids without replacement, returned in their original order.
pub fn sample_queries(ids: &[String], n: usize, seed: u64) -> Result<Vec<String>> {
    if n > ids.len() {
        return Err(Error::Invalid(format!("cannot sample {n} of {} queries", ids.len())));
    }
    let mut picked = sample(&mut synth::sub_rng(seed, "mini-test"), ids.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| ids[i].clone()).collect())
}

/// Mini-test: the sampled queries against the full pool, then each against
/// its own list of similar candidates.
pub fn mini_test(
    scores_full: &ScoreMatrix,
    truth: &GroundTruth,
    similar_sets: &BTreeMap<String, Vec<String>>,
    sample: &[String],
    ks: &[usize],
    task: Task,
) -> Result<[RetrievalReport; 2]> {
    check_ks(ks)?;
    let rows = query_rows(scores_full);
    let mut original = Vec::with_capacity(sample.len());
    let mut restricted_cols = Vec::with_capacity(sample.len());
    for q in sample {
        let row = *rows.get(q.as_str()).ok_or_else(|| Error::UnknownId(q.clone()))?;
        let list = similar_sets
            .get(q)
            .ok_or_else(|| Error::Invalid(format!("no similar candidate list for query {q:?}")))?;
        if list.len() != MINI_TEST_POOL {
            return Err(Error::Invalid(format!(
                "query {q:?} has {} similar candidates, expected {MINI_TEST_POOL}",
                list.len()
            )));
        }
        original.push(QuerySpec {
            row,
            truth: truth_columns(scores_full, q, truth)?,
            allowed: None,
        });
        restricted_cols.push(columns_of(scores_full, list)?);
    }
    let similar = original
        .iter()
        .zip(&restricted_cols)
        .zip(sample)
        .map(|((spec, cols), q)| {
            Ok(QuerySpec {
                row: spec.row,
                truth: restricted_truth(scores_full, q, truth, cols)?,
                allowed: Some(cols.as_slice()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok([
        report_from_ranks(
            task,
            "original",
            scores_full.n_candidates(),
            &evaluate(scores_full, &original),
            ks,
        ),
        report_from_ranks(task, "similar", MINI_TEST_POOL, &evaluate(scores_full, &similar), ks),
    ])
}

/// For each target image, the image itself followed by its `size - 1`
/// nearest images by cosine.
pub fn nearest_lists(
    images: &EmbeddingMatrix,
    targets: &[String],
    size: usize,
) -> Result<BTreeMap<String, Vec<String>>> {
    let index = CosineIndex::new(images)?;
    targets
        .par_iter()
        .map(|t| {
            let i = images.index_of(t).ok_or_else(|| Error::UnknownId(t.clone()))?;
            let scores = index.scores(images.row(i))?;
            let mut list = vec![t.clone()];
            list.extend(
                topk_row(&scores, size.saturating_sub(1), Some(i))
                    .into_iter()
                    .map(|(j, _)| images.ids()[j].clone()),
            );
            Ok((t.clone(), list))
        })
        .collect()
}

/// The same queries evaluated against two equal-size candidate pools.
pub fn compare_pools(
    scores: &ScoreMatrix,
    truth: &GroundTruth,
    pool_a: (&str, &[String]),
    pool_b: (&str, &[String]),
    ks: &[usize],
    task: Task,
) -> Result<[RetrievalReport; 2]> {
    check_ks(ks)?;
    if pool_a.1.len() != pool_b.1.len() {
        return Err(Error::PoolSizeMismatch {
            left: pool_a.1.len(),
            right: pool_b.1.len(),
        });
    }
    let run = |(label, ids): (&str, &[String])| -> Result<RetrievalReport> {
        let cols = columns_of(scores, ids)?;
        let specs = scores
            .query_ids()
            .iter()
            .enumerate()
            .map(|(row, q)| {
                Ok(QuerySpec {
                    row,
                    truth: restricted_truth(scores, q, truth, &cols)?,
                    allowed: Some(cols.as_slice()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(report_from_ranks(
            task,
            label,
            cols.len(),
            &evaluate(scores, &specs),
            ks,
        ))
    };
    Ok([run(pool_a)?, run(pool_b)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub image_id: String,
    pub score_correct: f64,
    pub score_wrong: f64,
}

/// Percentage of pairs whose correct text strictly outscores the wrong one.
pub fn pair_match_accuracy(pairs: &[PairScore]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Invalid("pair list is empty".into()));
    }
    let wins = pairs.iter().filter(|p| p.score_correct > p.score_wrong).count();
    Ok(100.0 * wins as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStats {
    pub n_texts: usize,
    pub total_nouns: usize,
    pub total_adjs: usize,
    pub avg_nouns: f64,
    pub avg_adjs: f64,
    /// Tokens per text, trailing punctuation excluded.
    pub avg_length: f64,
}

impl fmt::Display for TextStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "texts={} nouns={} adjs={} avg_nouns={:.2} avg_adjs={:.2} avg_length={:.2}",
            self.n_texts, self.total_nouns, self.total_adjs, self.avg_nouns, self.avg_adjs, self.avg_length
        )
    }
}

pub fn text_stats(captions: &[CaptionRecord]) -> TextStats {
    let mut nouns = 0;
    let mut adjs = 0;
    let mut length = 0;
    for c in captions {
        nouns += c.tokens.iter().filter(|t| t.pos.is_nominal()).count();
        adjs += c.tokens.iter().filter(|t| t.pos == Upos::Adj).count();
        let trailing = c.tokens.iter().rev().take_while(|t| t.pos == Upos::Punct).count();
        length += c.tokens.len() - trailing;
    }
    let n = captions.len();
    let avg = |total: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    TextStats {
        n_texts: n,
        total_nouns: nouns,
        total_adjs: adjs,
        avg_nouns: avg(nouns),
        avg_adjs: avg(adjs),
        avg_length: avg(length),
    }
}

/// Ground truth implied by the captions: caption → its image for T2I,
/// image → its captions for I2T.
pub fn truth_from_captions(captions: &[CaptionRecord], task: Task) -> GroundTruth {
    let mut truth = GroundTruth::new();
    for c in captions {
        match task {
            Task::T2i => {
                truth.insert(c.caption_id.clone(), vec![c.image_id.clone()]);
            }
            Task::I2t => truth.entry(c.image_id.clone()).or_default().push(c.caption_id.clone()),
        }
    }
    truth
}
