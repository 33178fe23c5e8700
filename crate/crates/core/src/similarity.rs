//! Exact cosine similarity and top-k selection.
//!
//! Dot products are accumulated in `f64` in a fixed order per row, and rows
//! are processed independently, so results do not depend on the size of the
//! rayon pool.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingMatrix, ScoreMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub candidate_id: String,
    pub score: f32,
    /// Column of the candidate in the source matrix.
    pub index: usize,
}

/// Top-k candidates for one query, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub k: usize,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.candidate_id.as_str())
    }
}

/// Ranking order: higher score first, then lower index.
#[inline]
pub fn rank_cmp(a: (f32, usize), b: (f32, usize)) -> Ordering {
    b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

fn inverse_norm(row: &[f32]) -> Option<f64> {
    let sq: f64 = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum();
    (sq > 0.0).then(|| 1.0 / sq.sqrt())
}

fn inverse_norms(m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    (0..m.rows())
        .map(|i| inverse_norm(m.row(i)).ok_or_else(|| Error::ZeroRow(m.ids()[i].clone())))
        .collect()
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Scales every row to unit Euclidean norm.
pub fn l2_normalize(matrix: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let inv = inverse_norms(matrix)?;
    let dim = matrix.dim();
    let mut values = Vec::with_capacity(matrix.values().len());
    for (i, scale) in inv.iter().enumerate() {
        values.extend(matrix.row(i).iter().map(|&v| (f64::from(v) * scale) as f32));
    }
    EmbeddingMatrix::new(matrix.ids().to_vec(), dim, values)
}

/// Cosine similarity of one vector against every row of `candidates`.
pub(crate) fn cosine_row(query: &[f32], candidates: &EmbeddingMatrix, cand_inv: &[f64]) -> Result<Vec<f32>> {
    let q_inv = inverse_norm(query).ok_or_else(|| Error::ZeroRow("<query>".into()))?;
    Ok((0..candidates.rows())
        .map(|j| (dot(query, candidates.row(j)) * q_inv * cand_inv[j]).clamp(-1.0, 1.0) as f32)
        .collect())
}

/// Precomputed candidate side for repeated cosine queries.
#[derive(Debug, Clone)]
pub struct CosineIndex<'a> {
    candidates: &'a EmbeddingMatrix,
    inv_norms: Vec<f64>,
}

impl<'a> CosineIndex<'a> {
    pub fn new(candidates: &'a EmbeddingMatrix) -> Result<Self> {
        Ok(Self {
            inv_norms: inverse_norms(candidates)?,
            candidates,
        })
    }

    pub fn candidates(&self) -> &EmbeddingMatrix {
        self.candidates
    }

    pub fn scores(&self, query: &[f32]) -> Result<Vec<f32>> {
        if query.len() != self.candidates.dim() {
            return Err(Error::DimMismatch {
                left: query.len(),
                right: self.candidates.dim(),
            });
        }
        cosine_row(query, self.candidates, &self.inv_norms)
    }
}

/// Full query × candidate cosine matrix.
pub fn cosine_scores(queries: &EmbeddingMatrix, candidates: &EmbeddingMatrix) -> Result<ScoreMatrix> {
    if queries.dim() != candidates.dim() {
        return Err(Error::DimMismatch {
            left: queries.dim(),
            right: candidates.dim(),
        });
    }
    let index = CosineIndex::new(candidates)?;
    inverse_norms(queries)?;
    let rows: Vec<Vec<f32>> = (0..queries.rows())
        .into_par_iter()
        .map(|i| index.scores(queries.row(i)))
        .collect::<Result<_>>()?;
    ScoreMatrix::new(queries.ids().to_vec(), candidates.ids().to_vec(), rows.concat())
}

/// Top-k `(index, score)` pairs of a row, optionally skipping one column.
pub fn topk_row(row: &[f32], k: usize, exclude: Option<usize>) -> Vec<(usize, f32)> {
    let mut idx: Vec<usize> = (0..row.len()).filter(|&j| Some(j) != exclude).collect();
    let cmp = |a: &usize, b: &usize| rank_cmp((row[*a], *a), (row[*b], *b));
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx.into_iter().map(|j| (j, row[j])).collect()
}

/// Per-query top-k lists. `k` larger than the candidate count returns all candidates.
pub fn topk(scores: &ScoreMatrix, k: usize) -> Result<Vec<RankedList>> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let cands = scores.candidate_ids();
    Ok((0..scores.n_queries())
        .into_par_iter()
        .map(|i| RankedList {
            query_id: scores.query_ids()[i].clone(),
            k,
            entries: topk_row(scores.row(i), k, None)
                .into_iter()
                .map(|(j, s)| RankedEntry {
                    candidate_id: cands[j].clone(),
                    score: s,
                    index: j,
                })
                .collect(),
        })
        .collect())
}

/// Pessimistic 1-based rank: every other candidate scoring at least as high
/// as the target is counted ahead of it.
pub fn rank_of_target(row: &[f32], target: usize) -> Result<usize> {
    let t = *row.get(target).ok_or(Error::InvalidIndex {
        index: target,
        len: row.len(),
    })?;
    Ok(1 + row.iter().enumerate().filter(|&(j, &s)| j != target && s >= t).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        EmbeddingMatrix::from_rows(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            dim,
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn score_row(row: &[f32]) -> ScoreMatrix {
        ScoreMatrix::new(
            vec!["q".into()],
            (0..row.len()).map(|i| format!("c{i}")).collect(),
            row.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn normalizes_three_four_five() {
        let n = l2_normalize(&matrix(&[&[3.0, 4.0], &[1.0, 0.0]])).unwrap();
        assert!((n.row(0)[0] - 0.6).abs() < 1e-7);
        assert!((n.row(0)[1] - 0.8).abs() < 1e-7);
        assert_eq!(n.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn zero_row_is_named() {
        let err = l2_normalize(&matrix(&[&[1.0, 1.0], &[0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroRow(id) if id == "r1"));
    }

    #[test]
    fn cosine_examples() {
        let s = cosine_scores(&matrix(&[&[1.0, 0.0]]), &matrix(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(s.row(0), &[1.0, 0.0]);
        // 11 / (sqrt(5) * 5)
        let expected = 11.0 / (5f64.sqrt() * 5.0);
        let s = cosine_scores(&matrix(&[&[1.0, 2.0]]), &matrix(&[&[3.0, 4.0]])).unwrap();
        assert!((f64::from(s.row(0)[0]) - expected).abs() < 1e-6);
        assert!((expected - 0.9839).abs() < 1e-4);
    }

    #[test]
    fn cosine_dim_mismatch() {
        let err = cosine_scores(&matrix(&[&[1.0, 0.0]]), &matrix(&[&[1.0, 0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { left: 2, right: 3 }));
    }

    #[test]
    fn topk_examples() {
        let lists = topk(&score_row(&[0.1, 0.9, 0.5]), 2).unwrap();
        let got: Vec<_> = lists[0].entries.iter().map(|e| (e.index, e.score)).collect();
        assert_eq!(got, vec![(1, 0.9), (2, 0.5)]);

        let lists = topk(&score_row(&[0.5, 0.5]), 1).unwrap();
        assert_eq!(lists[0].entries[0].index, 0);

        let lists = topk(&score_row(&[0.5, 0.2]), 10).unwrap();
        assert_eq!(lists[0].entries.len(), 2);
        assert!(topk(&score_row(&[0.5]), 0).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_of_target(&[0.2, 0.9, 0.5], 1).unwrap(), 1);
        assert_eq!(rank_of_target(&[0.9, 0.9, 0.1], 1).unwrap(), 2);
        assert!(matches!(
            rank_of_target(&[0.1], 3),
            Err(Error::InvalidIndex { index: 3, len: 1 })
        ));
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f32>> {
        proptest::collection::vec(-10.0f32..10.0, 4).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn unit_diagonal_after_normalize(rows in proptest::collection::vec(vec_strategy(), 1..8)) {
            let m = EmbeddingMatrix::from_rows(
                (0..rows.len()).map(|i| i.to_string()).collect(), 4, rows).unwrap();
            let n = l2_normalize(&m).unwrap();
            for i in 0..n.rows() {
                let norm = dot(n.row(i), n.row(i)).sqrt();
                prop_assert!((norm - 1.0).abs() < 1e-6);
            }
            let s = cosine_scores(&n, &n).unwrap();
            for i in 0..n.rows() {
                prop_assert!((s.row(i)[i] - 1.0).abs() < 1e-5);
            }
        }

        #[test]
        fn cosine_scale_invariant(q in vec_strategy(), c in vec_strategy(), a in 0.01f32..100.0, b in 0.01f32..100.0) {
            let base = cosine_scores(&matrix(&[&q]), &matrix(&[&c])).unwrap().row(0)[0];
            let qs: Vec<f32> = q.iter().map(|v| v * a).collect();
            let cs: Vec<f32> = c.iter().map(|v| v * b).collect();
            let scaled = cosine_scores(&matrix(&[&qs]), &matrix(&[&cs])).unwrap().row(0)[0];
            prop_assert!((base - scaled).abs() < 1e-5);
        }

        #[test]
        fn topk_unbounded_is_stable_sort(row in proptest::collection::vec((0u8..8).prop_map(|v| v as f32 / 4.0), 1..40)) {
            let lists = topk(&score_row(&row), usize::MAX).unwrap();
            let mut oracle: Vec<usize> = (0..row.len()).collect();
            oracle.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
            let got: Vec<usize> = lists[0].entries.iter().map(|e| e.index).collect();
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn rank_matches_ties_first_sort(row in proptest::collection::vec((0u8..6).prop_map(f32::from), 1..60), t in 0usize..60) {
            let t = t % row.len();
            let mut order: Vec<usize> = (0..row.len()).collect();
            // ties-first: the target goes after every equal competitor
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then((a == t).cmp(&(b == t))));
            let oracle = order.iter().position(|&j| j == t).unwrap() + 1;
            prop_assert_eq!(rank_of_target(&row, t).unwrap(), oracle);
        }
    }
}
