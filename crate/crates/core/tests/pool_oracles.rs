use std::collections::{BTreeMap, HashSet};

use fgbench::pool::{assemble_pool, build_pool, build_similar_sets, prepare_candidates, PoolConfig, SimilarSet};
use fgbench::synth::{PlantedConfig, PlantedFixture};
use proptest::prelude::*;

fn cos(a: &[f32], b: &[f32]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Candidate indices sorted by (−score, index), target dropped, first k kept.
fn ranking(scores: &[f64], skip: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&j| j != skip).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn small_fixture(seed: u64) -> PlantedFixture {
    PlantedFixture::generate(
        PlantedConfig {
            targets: 12,
            distractors: 150,
            ..Default::default()
        },
        seed,
    )
    .unwrap()
}

#[test]
fn similar_sets_match_brute_force_fusion() {
    let fx = small_fixture(5);
    let ds = fx.dataset();
    let pool = prepare_candidates(&ds.manifest, &ds.image_embeddings, &fx.auxiliary).unwrap();
    let config = PoolConfig {
        k_prime: 12,
        k_dprime: 10,
        rrf_constant: 60,
    };
    let sets = build_similar_sets(&pool, &ds.targets(), &ds.text_embeddings, &config).unwrap();

    // raw (unnormalised) vectors for the oracle
    let raw = |id: &str| {
        ds.image_embeddings
            .row_by_id(id)
            .or_else(|| fx.auxiliary.row_by_id(id))
            .unwrap()
            .to_vec()
    };
    let pool_vecs: Vec<Vec<f32>> = pool.ids().iter().map(|id| raw(id)).collect();
    for (set, (target, caps)) in sets.iter().zip(ds.targets()) {
        let t = pool.index_of(&target).unwrap();
        let img: Vec<f64> = pool_vecs.iter().map(|v| cos(&pool_vecs[t], v)).collect();
        let txt: Vec<f64> = pool_vecs
            .iter()
            .map(|v| {
                caps.iter()
                    .map(|c| cos(ds.text_embeddings.row_by_id(c).unwrap(), v))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let mut fused: BTreeMap<usize, f64> = BTreeMap::new();
        for list in [ranking(&img, t, 12), ranking(&txt, t, 10)] {
            for (r, j) in list.into_iter().enumerate() {
                *fused.entry(j).or_default() += 1.0 / (60.0 + (r + 1) as f64);
            }
        }
        let mut order: Vec<(usize, f64)> = fused.into_iter().collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut expected = vec![target.clone()];
        expected.extend(order.iter().take(9).map(|(j, _)| pool.ids()[*j].clone()));
        assert_eq!(set.member_ids, expected, "target {target}");
        for (j, s) in order.iter().take(9) {
            assert!((set.fusion_scores[&pool.ids()[*j]] - s).abs() < 1e-12);
        }
    }
}

#[test]
fn planted_neighbours_are_recovered() {
    let fx = PlantedFixture::generate(PlantedConfig::default(), 17).unwrap();
    let pools = build_pool(&fx.dataset(), &fx.auxiliary, &PoolConfig::default()).unwrap();
    assert_eq!(pools.targets.len(), 100);
    for set in &pools.targets {
        assert_eq!(set.member_ids.len(), 10);
        assert_eq!(set.member_ids[0], set.target_id);
        let got: HashSet<&String> = set.member_ids[1..].iter().collect();
        let planted: HashSet<&String> = fx.planted[&set.target_id].iter().collect();
        assert_eq!(got, planted, "{}", set.target_id);
    }
    let unique: HashSet<&String> = pools.new_pool_ids.iter().collect();
    assert_eq!(unique.len(), pools.new_pool_ids.len());
    assert!(pools.new_pool_ids.len() <= 1000);
    for t in &fx.target_ids {
        assert!(unique.contains(t));
    }
}

#[test]
fn excluded_auxiliary_ids_are_rejected() {
    let fx = small_fixture(1);
    let ds = fx.dataset();
    let mut ids = fx.auxiliary.ids().to_vec();
    ids[0] = "train-0002".into();
    ids[3] = "train-0001".into();
    let aux = fgbench::dataset::EmbeddingMatrix::new(ids, fx.auxiliary.dim(), fx.auxiliary.values().to_vec()).unwrap();
    match prepare_candidates(&ds.manifest, &ds.image_embeddings, &aux) {
        Err(fgbench::Error::ExclusionOverlap(found)) => assert_eq!(found, vec!["train-0001", "train-0002"]),
        other => panic!("expected exclusion error, got {other:?}"),
    }
}

fn arb_sets() -> impl Strategy<Value = Vec<SimilarSet>> {
    prop::collection::vec(prop::collection::vec(0u8..30, 9), 1..12).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, members)| {
                let target = format!("t{i}");
                let mut ids = vec![target.clone()];
                ids.extend(members.into_iter().map(|m| format!("m{m}")));
                SimilarSet {
                    target_id: target,
                    member_ids: ids,
                    fusion_scores: BTreeMap::new(),
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn assembled_pool_is_first_seen_union(sets in arb_sets()) {
        let pool = assemble_pool(&sets);
        let mut expected: Vec<String> = Vec::new();
        for s in &sets {
            for id in &s.member_ids {
                if !expected.contains(id) {
                    expected.push(id.clone());
                }
            }
        }
        prop_assert_eq!(&pool.ids, &expected);
        for id in &pool.ids {
            let owners: Vec<String> = sets
                .iter()
                .filter(|s| s.member_ids.contains(id))
                .flat_map(|s| std::iter::repeat_n(s.target_id.clone(), s.member_ids.iter().filter(|m| *m == id).count()))
                .collect();
            prop_assert_eq!(&pool.provenance[id], &owners);
        }
        prop_assert!(pool.ids.len() <= 10 * sets.len());
    }
}
