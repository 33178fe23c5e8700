//! Similar-image pool construction.
//!
//! For every captioned target image two rankings are computed over the
//! candidate pool: image-to-image cosine and the best caption-to-image cosine
//! over the target's captions. The two rankings are combined with reciprocal
//! rank fusion into a set of ten images headed by the target, and the union of
//! all sets becomes the new retrieval pool.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, EmbeddingMatrix, Manifest};
use crate::error::{Error, Result};
use crate::similarity::{l2_normalize, topk_row, CosineIndex, RankedEntry, RankedList};

/// Images per similar set, target included.
pub const SET_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub k_prime: usize,
    pub k_dprime: usize,
    pub rrf_constant: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            k_prime: 30,
            k_dprime: 30,
            rrf_constant: 60,
        }
    }
}

impl PoolConfig {
    pub fn check(&self) -> Result<()> {
        if self.k_prime == 0 || self.k_dprime == 0 {
            return Err(Error::Invalid("k' and k'' must be at least 1".into()));
        }
        if self.k_prime + self.k_dprime < SET_SIZE - 1 {
            return Err(Error::Invalid(format!(
                "k' + k'' = {} cannot supply {} similar images",
                self.k_prime + self.k_dprime,
                SET_SIZE - 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Auxiliary,
}

/// Original pool images plus auxiliary images, with unit-norm embeddings in pool order.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    old_pool_ids: BTreeSet<String>,
    source_tags: BTreeMap<String, Source>,
    embeddings: EmbeddingMatrix,
}

impl CandidatePool {
    pub fn ids(&self) -> &[String] {
        self.embeddings.ids()
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn old_pool_ids(&self) -> &BTreeSet<String> {
        &self.old_pool_ids
    }

    pub fn source(&self, id: &str) -> Option<Source> {
        self.source_tags.get(id).copied()
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.embeddings.index_of(id)
    }
}

/// Merges the original pool with auxiliary images.
///
/// Auxiliary ids already in the pool (or repeated) are dropped; any auxiliary
/// id on the exclusion list is an error.
pub fn prepare_candidates(
    manifest: &Manifest,
    image_embeddings: &EmbeddingMatrix,
    auxiliary: &EmbeddingMatrix,
) -> Result<CandidatePool> {
    let mut excluded: Vec<String> = auxiliary
        .ids()
        .iter()
        .filter(|id| manifest.exclusion_ids.contains(*id))
        .cloned()
        .collect();
    if !excluded.is_empty() {
        excluded.sort();
        return Err(Error::ExclusionOverlap(excluded));
    }
    let overlap = manifest.excluded_pool_ids();
    if !overlap.is_empty() {
        return Err(Error::ExclusionOverlap(overlap));
    }
    if auxiliary.rows() > 0 && auxiliary.dim() != image_embeddings.dim() {
        return Err(Error::DimMismatch {
            left: image_embeddings.dim(),
            right: auxiliary.dim(),
        });
    }

    let dim = image_embeddings.dim();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut source_tags = BTreeMap::new();
    for id in &manifest.image_ids {
        if source_tags.contains_key(id) {
            return Err(Error::DuplicateId(id.clone()));
        }
        let row = image_embeddings
            .row_by_id(id)
            .ok_or_else(|| Error::MissingEmbedding(id.clone()))?;
        ids.push(id.clone());
        values.extend_from_slice(row);
        source_tags.insert(id.clone(), Source::Original);
    }
    let old_count = ids.len();
    for (i, id) in auxiliary.ids().iter().enumerate() {
        if source_tags.contains_key(id) {
            continue;
        }
        ids.push(id.clone());
        values.extend_from_slice(auxiliary.row(i));
        source_tags.insert(id.clone(), Source::Auxiliary);
    }
    let added = ids.len() - old_count;
    if added <= old_count {
        log::warn!(
            "auxiliary source adds {added} images to a pool of {old_count}; \
             similar sets may be dominated by original images"
        );
    }

    let embeddings = l2_normalize(&EmbeddingMatrix::new(ids, dim, values)?)?;
    Ok(CandidatePool {
        old_pool_ids: manifest.image_ids.iter().cloned().collect(),
        source_tags,
        embeddings,
    })
}

fn ranked(query_id: &str, k: usize, pool: &CandidatePool, top: Vec<(usize, f32)>) -> RankedList {
    RankedList {
        query_id: query_id.to_string(),
        k,
        entries: top
            .into_iter()
            .map(|(j, score)| RankedEntry {
                candidate_id: pool.ids()[j].clone(),
                score,
                index: j,
            })
            .collect(),
    }
}

/// Top-`k` pool images by cosine to the target's image embedding, target excluded.
pub fn image_similar_set(
    target_id: &str,
    pool: &CandidatePool,
    index: &CosineIndex<'_>,
    k: usize,
) -> Result<RankedList> {
    let t = pool
        .index_of(target_id)
        .ok_or_else(|| Error::UnknownId(target_id.to_string()))?;
    let scores = index.scores(pool.embeddings.row(t))?;
    Ok(ranked(target_id, k, pool, topk_row(&scores, k, Some(t))))
}

/// Top-`k` pool images by the maximum caption-to-image cosine over the
/// target's captions, target excluded.
pub fn text_similar_set(
    target_id: &str,
    caption_ids: &[String],
    text_embeddings: &EmbeddingMatrix,
    pool: &CandidatePool,
    index: &CosineIndex<'_>,
    k: usize,
) -> Result<RankedList> {
    let t = pool
        .index_of(target_id)
        .ok_or_else(|| Error::UnknownId(target_id.to_string()))?;
    if caption_ids.is_empty() {
        return Err(Error::Invalid(format!("target {target_id:?} has no captions")));
    }
    let mut best = vec![f32::NEG_INFINITY; pool.len()];
    for cid in caption_ids {
        let q = text_embeddings
            .row_by_id(cid)
            .ok_or_else(|| Error::MissingEmbedding(cid.clone()))?;
        for (b, s) in best.iter_mut().zip(index.scores(q)?) {
            *b = b.max(s);
        }
    }
    Ok(ranked(target_id, k, pool, topk_row(&best, k, Some(t))))
}

/// A target image and its nine fused nearest neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarSet {
    pub target_id: String,
    pub member_ids: Vec<String>,
    /// Fusion score of every non-target member.
    pub fusion_scores: BTreeMap<String, f64>,
}

/// Reciprocal rank fusion of the two rankings; the target is placed first.
pub fn fuse_similar_sets(
    image_list: &RankedList,
    text_list: &RankedList,
    target_id: &str,
    rrf_constant: usize,
) -> Result<SimilarSet> {
    if image_list.entries.is_empty() || text_list.entries.is_empty() {
        return Err(Error::Invalid(format!("empty ranking for target {target_id:?}")));
    }
    // id -> (score, candidate index)
    let mut fused: HashMap<&str, (f64, usize)> = HashMap::new();
    for list in [image_list, text_list] {
        for (rank, e) in list.entries.iter().enumerate() {
            if e.candidate_id == target_id {
                continue;
            }
            let contribution = 1.0 / (rrf_constant as f64 + (rank + 1) as f64);
            let slot = fused.entry(e.candidate_id.as_str()).or_insert((0.0, e.index));
            slot.0 += contribution;
        }
    }
    let needed = SET_SIZE - 1;
    if fused.len() < needed {
        return Err(Error::TooFewCandidates {
            found: fused.len(),
            needed,
        });
    }
    let mut order: Vec<(&str, f64, usize)> = fused.into_iter().map(|(id, (s, i))| (id, s, i)).collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.2.cmp(&b.2))
    });
    order.truncate(needed);

    let mut member_ids = Vec::with_capacity(SET_SIZE);
    member_ids.push(target_id.to_string());
    let mut fusion_scores = BTreeMap::new();
    for (id, score, _) in order {
        member_ids.push(id.to_string());
        fusion_scores.insert(id.to_string(), score);
    }
    Ok(SimilarSet {
        target_id: target_id.to_string(),
        member_ids,
        fusion_scores,
    })
}

/// Builds one similar set per target, in target order.
pub fn build_similar_sets(
    pool: &CandidatePool,
    targets: &[(String, Vec<String>)],
    text_embeddings: &EmbeddingMatrix,
    config: &PoolConfig,
) -> Result<Vec<SimilarSet>> {
    config.check()?;
    if text_embeddings.rows() > 0 && text_embeddings.dim() != pool.embeddings.dim() {
        return Err(Error::DimMismatch {
            left: pool.embeddings.dim(),
            right: text_embeddings.dim(),
        });
    }
    let index = CosineIndex::new(&pool.embeddings)?;
    targets
        .par_iter()
        .map(|(target, captions)| {
            let by_image = image_similar_set(target, pool, &index, config.k_prime)?;
            let by_text = text_similar_set(target, captions, text_embeddings, pool, &index, config.k_dprime)?;
            fuse_similar_sets(&by_image, &by_text, target, config.rrf_constant)
        })
        .collect()
}

/// Deduplicated union of similar sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewPool {
    pub ids: Vec<String>,
    /// For each pooled image, the targets whose sets contained it.
    pub provenance: BTreeMap<String, Vec<String>>,
}

/// Unions the sets in the order given, keeping first-seen order.
pub fn assemble_pool(sets: &[SimilarSet]) -> NewPool {
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut provenance: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for set in sets {
        for id in &set.member_ids {
            if seen.insert(id.clone()) {
                ids.push(id.clone());
            }
            provenance.entry(id.clone()).or_default().push(set.target_id.clone());
        }
    }
    NewPool { ids, provenance }
}

/// `pools.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolsFile {
    pub targets: Vec<SimilarSet>,
    pub new_pool_ids: Vec<String>,
    pub provenance: BTreeMap<String, Vec<String>>,
}

impl PoolsFile {
    pub fn from_sets(sets: Vec<SimilarSet>) -> Self {
        let pool = assemble_pool(&sets);
        Self {
            targets: sets,
            new_pool_ids: pool.ids,
            provenance: pool.provenance,
        }
    }
}

/// Runs candidate preparation, per-target search, fusion and assembly.
pub fn build_pool(dataset: &Dataset, auxiliary: &EmbeddingMatrix, config: &PoolConfig) -> Result<PoolsFile> {
    let pool = prepare_candidates(&dataset.manifest, &dataset.image_embeddings, auxiliary)?;
    let sets = build_similar_sets(&pool, &dataset.targets(), &dataset.text_embeddings, config)?;
    Ok(PoolsFile::from_sets(sets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn manifest(images: &[&str], exclusions: &[&str]) -> Manifest {
        Manifest {
            name: "t".into(),
            image_ids: images.iter().map(|s| s.to_string()).collect(),
            captions_path: PathBuf::new(),
            image_embeddings_path: PathBuf::new(),
            text_embeddings_path: PathBuf::new(),
            exclusion_ids: exclusions.iter().map(|s| s.to_string()).collect(),
            captions_per_image: Some(1),
            base_dir: PathBuf::new(),
        }
    }

    fn emb(ids: &[&str], rows: &[[f32; 2]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            ids.iter().map(|s| s.to_string()).collect(),
            2,
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn list(ids: &[&str]) -> RankedList {
        RankedList {
            query_id: "t".into(),
            k: ids.len(),
            entries: ids
                .iter()
                .map(|id| RankedEntry {
                    candidate_id: id.to_string(),
                    score: 0.0,
                    index: id
                        .trim_start_matches(|c: char| !c.is_ascii_digit())
                        .parse()
                        .unwrap_or(0),
                })
                .collect(),
        }
    }

    #[test]
    fn prepare_tags_sources() {
        let m = manifest(&["a", "b"], &[]);
        let old = emb(&["a", "b"], &[[1.0, 0.0], [0.0, 1.0]]);
        let aux = emb(&["c", "d", "a"], &[[1.0, 1.0], [2.0, 1.0], [5.0, 5.0]]);
        let pool = prepare_candidates(&m, &old, &aux).unwrap();
        assert_eq!(pool.ids(), &["a", "b", "c", "d"]);
        assert_eq!(pool.source("a"), Some(Source::Original));
        assert_eq!(pool.source("d"), Some(Source::Auxiliary));
        assert!(pool.old_pool_ids().iter().all(|id| pool.index_of(id).is_some()));
    }

    #[test]
    fn prepare_rejects_excluded_auxiliary() {
        let m = manifest(&["a"], &["t17"]);
        let old = emb(&["a"], &[[1.0, 0.0]]);
        let aux = emb(&["t17", "c"], &[[1.0, 1.0], [0.0, 1.0]]);
        let err = prepare_candidates(&m, &old, &aux).unwrap_err();
        assert!(matches!(err, Error::ExclusionOverlap(ids) if ids == vec!["t17"]));
    }

    #[test]
    fn prepare_rejects_dim_mismatch() {
        let m = manifest(&["a"], &[]);
        let old = emb(&["a"], &[[1.0, 0.0]]);
        let aux = EmbeddingMatrix::from_rows(vec!["c".into()], 3, vec![vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            prepare_candidates(&m, &old, &aux),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_embedding_ranks_first() {
        let m = manifest(&["t"], &[]);
        let old = emb(&["t"], &[[0.3, 0.7]]);
        let aux = emb(&["x", "c", "y"], &[[1.0, 0.0], [0.3, 0.7], [0.0, 1.0]]);
        let pool = prepare_candidates(&m, &old, &aux).unwrap();
        let index = CosineIndex::new(pool.embeddings()).unwrap();
        let l = image_similar_set("t", &pool, &index, 2).unwrap();
        assert_eq!(l.entries[0].candidate_id, "c");
        assert!((l.entries[0].score - 1.0).abs() < 1e-6);

        let all = image_similar_set("t", &pool, &index, 100).unwrap();
        assert_eq!(all.entries.len(), 3);
        assert!(all.ids().all(|id| id != "t"));
        assert!(matches!(
            image_similar_set("zz", &pool, &index, 2),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn text_set_takes_max_over_captions() {
        let m = manifest(&["t"], &[]);
        let old = emb(&["t"], &[[1.0, 0.0]]);
        let aux = emb(&["c", "d"], &[[0.0, 1.0], [1.0, 0.2]]);
        let pool = prepare_candidates(&m, &old, &aux).unwrap();
        let index = CosineIndex::new(pool.embeddings()).unwrap();
        let texts = emb(&["cap1", "cap2"], &[[1.0, 0.1], [0.0, 1.0]]);
        let caps = vec!["cap1".to_string(), "cap2".to_string()];
        let l = text_similar_set("t", &caps, &texts, &pool, &index, 5).unwrap();
        let c = l.entries.iter().find(|e| e.candidate_id == "c").unwrap();
        // caption 2 is identical in direction to c
        assert!((c.score - 1.0).abs() < 1e-6);

        let single = text_similar_set("t", &caps[..1], &texts, &pool, &index, 5).unwrap();
        assert_eq!(single.entries[0].candidate_id, "d");

        let missing = vec!["nope".to_string()];
        assert!(matches!(
            text_similar_set("t", &missing, &texts, &pool, &index, 5),
            Err(Error::MissingEmbedding(_))
        ));
    }

    #[test]
    fn fusion_agreement_keeps_order() {
        let ids: Vec<String> = (1..=12).map(|i| format!("c{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let s = fuse_similar_sets(&list(&refs), &list(&refs), "t", 60).unwrap();
        assert_eq!(s.member_ids[0], "t");
        assert_eq!(&s.member_ids[1..], &refs[..9]);
    }

    #[test]
    fn fusion_prefers_agreement_over_single_top_rank() {
        // c sits at rank 1 of the image list only; d at rank 5 of both lists
        let a = list(&["c1", "x2", "x3", "x4", "d5", "x6", "x7", "x8", "x9", "x10"]);
        let b = list(&["y11", "y12", "y13", "y14", "d5", "y16", "y17", "y18", "y19", "y20"]);
        let s = fuse_similar_sets(&a, &b, "t", 60).unwrap();
        let c = s.fusion_scores["c1"];
        let d = s.fusion_scores["d5"];
        assert!((c - 1.0 / 61.0).abs() < 1e-12);
        assert!((d - 2.0 / 65.0).abs() < 1e-12);
        assert_eq!(s.member_ids[1], "d5");
        assert_eq!(s.member_ids[2], "c1");
    }

    #[test]
    fn fusion_needs_nine_candidates() {
        let err = fuse_similar_sets(
            &list(&["a1", "a2", "a3", "a4"]),
            &list(&["b5", "b6", "b7", "b8"]),
            "t",
            60,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooFewCandidates { found: 8, needed: 9 }));
    }

    fn set(target: &str, members: &[&str]) -> SimilarSet {
        let mut ids = vec![target.to_string()];
        ids.extend(members.iter().map(|s| s.to_string()));
        SimilarSet {
            target_id: target.into(),
            member_ids: ids,
            fusion_scores: BTreeMap::new(),
        }
    }

    #[test]
    fn assemble_disjoint_and_shared() {
        let a: Vec<String> = (0..9).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..9).map(|i| format!("b{i}")).collect();
        let ar: Vec<&str> = a.iter().map(String::as_str).collect();
        let br: Vec<&str> = b.iter().map(String::as_str).collect();
        let p = assemble_pool(&[set("t1", &ar), set("t2", &br)]);
        assert_eq!(p.ids.len(), 20);

        // share a0..a2 with the second set
        let mut shared = br[..6].to_vec();
        shared.extend(&ar[..3]);
        let p = assemble_pool(&[set("t1", &ar), set("t2", &shared)]);
        assert_eq!(p.ids.len(), 17);
        assert_eq!(p.provenance["a1"], vec!["t1", "t2"]);
        assert_eq!(p.provenance["t2"], vec!["t2"]);
    }
}
