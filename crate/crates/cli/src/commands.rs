use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fgbench::dataset::{
    ids_sidecar, load_captions, load_embeddings, load_scores, parse_captions, read_manifest, validate_dataset,
    write_captions, write_embeddings, CaptionRecord, Dataset, EmbeddingMatrix, Issue, ValidationReport,
};
use fgbench::eval::{self, GroundTruth, PairScore, Task};
use fgbench::pool::build_pool;
use fgbench::synth::{self, TextEmbedder};
use fgbench::text::contracts::{
    parse_jsonl, read_jsonl, record_problems, write_jsonl, GenerationRecord, MergeRecord, MergeRequest, PromptRecord,
    ScoreRecord, ScoreRequest,
};
use fgbench::text::mock::{mock_merge_batch, MockScorer};
use fgbench::text::{
    apply_corrections, apply_to_captions, attach_merges, build_prompts, collect_candidates, detect_coarse,
    export_review_queue, extract_nouns, filter_candidates, parse_review_queue, select_per_caption,
    split_for_merge_training, Granularity, RenovationCandidate, Selection,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{Command, EvalCommon, ReviewCommand};

pub enum Outcome {
    Ok,
    ValidationFailed,
}

pub fn run(command: Command, seed: u64) -> Result<Outcome> {
    match command {
        Command::Validate(a) => validate(a),
        Command::BuildPool(a) => {
            let config = RunConfig {
                k_prime: a.k_prime,
                k_dprime: a.k_dprime,
                rrf_constant: a.rrf_constant,
                seed,
                ..Default::default()
            };
            config.check()?;
            let dataset = Dataset::load(&a.manifest)?;
            let aux = load_embeddings(&a.aux, &ids_sidecar(&a.aux))?;
            let pools = build_pool(&dataset, &aux, &config.pool())?;
            log::info!(
                "{} targets, new pool of {} images",
                pools.targets.len(),
                pools.new_pool_ids.len()
            );
            write_json(&a.out, &pools)?;
            Ok(Outcome::Ok)
        }
        Command::DetectCoarse(a) => {
            let scores = load_scores(&a.scores)?;
            let captions = load_captions(&a.captions)?;
            let targets: BTreeMap<String, String> = captions
                .iter()
                .map(|c| (c.caption_id.clone(), c.image_id.clone()))
                .collect();
            let labels = detect_coarse(&scores, &targets)?;
            let coarse = labels.values().filter(|g| **g == Granularity::Coarse).count();
            log::info!("{coarse} of {} captions are coarse", labels.len());
            write_json(&a.out, &labels)?;
            Ok(Outcome::Ok)
        }
        Command::MakePrompts(a) => {
            let captions = load_captions(&a.captions)?;
            let labels: Option<BTreeMap<String, Granularity>> = a.labels.as_deref().map(read_json).transpose()?;
            let mut records = Vec::new();
            for c in &captions {
                if let Some(labels) = &labels {
                    if labels.get(&c.caption_id) != Some(&Granularity::Coarse) {
                        continue;
                    }
                }
                let set = build_prompts(c, &extract_nouns(c));
                records.extend(set.prompted_inputs.into_iter().map(|p| PromptRecord {
                    caption_id: c.caption_id.clone(),
                    image_id: c.image_id.clone(),
                    prompted_input: p,
                }));
            }
            write_jsonl(&a.out, &records)?;
            Ok(Outcome::Ok)
        }
        Command::ScoreRequests(a) => {
            let requests = score_requests(&a)?;
            write_jsonl(&a.out, &requests)?;
            Ok(Outcome::Ok)
        }
        Command::Filter(a) => {
            let captions = load_captions(&a.captions)?;
            let generations: Vec<GenerationRecord> = read_jsonl(&a.generations)?;
            let originals: Vec<ScoreRecord> = read_jsonl(&a.original_scores)?;
            let scores: Vec<ScoreRecord> = read_jsonl(&a.candidate_scores)?;
            let candidates = collect_candidates(&captions, &generations, &originals, &scores)?;
            let total = candidates.len();
            let kept = filter_candidates(candidates)?;
            log::info!("kept {} of {total} candidates", kept.len());
            write_jsonl(&a.out, &kept)?;
            Ok(Outcome::Ok)
        }
        Command::SelectBest(a) => {
            let candidates: Vec<RenovationCandidate> = read_jsonl(&a.candidates)?;
            let merges: Vec<MergeRecord> = read_jsonl(&a.merged)?;
            let scores: Vec<ScoreRecord> = read_jsonl(&a.merged_scores)?;
            let merged = attach_merges(candidates, &merges, &scores)?;
            let selections = select_per_caption(merged)?;
            write_jsonl(&a.out, &selections)?;
            Ok(Outcome::Ok)
        }
        Command::SplitMergeData(a) => {
            let captions = load_captions(&a.captions)?;
            let pairs: Vec<MergePair> = captions
                .iter()
                .flat_map(|c| {
                    split_for_merge_training(c).into_iter().map(|p| MergePair {
                        caption_id: c.caption_id.clone(),
                        kind: p.kind,
                        rest: p.rest,
                        detail: p.detail,
                        target: c.text.clone(),
                    })
                })
                .collect();
            write_jsonl(&a.out, &pairs)?;
            Ok(Outcome::Ok)
        }
        Command::Review(ReviewCommand::Export { selections, out }) => {
            let selections: Vec<Selection> = read_jsonl(&selections)?;
            export_review_queue(&selections, &out)?;
            Ok(Outcome::Ok)
        }
        Command::Review(ReviewCommand::Apply { queue, captions, out }) => {
            let text = fs::read_to_string(&queue).with_context(|| format!("reading {}", queue.display()))?;
            let items = parse_review_queue(&text)?;
            let finals = apply_corrections(&items)?;
            let captions = load_captions(&captions)?;
            let updated = apply_to_captions(&captions, &finals)?;
            write_text(&out, &write_captions(&updated))?;
            Ok(Outcome::Ok)
        }
        Command::Evaluate(a) => {
            let (scores, truth, task, ks) = eval_inputs(&a.common)?;
            let report = eval::recall_at_k(&scores, &truth, &ks, task, &a.pool_label)?;
            println!("{report}");
            write_json(&a.common.out, &report)?;
            Ok(Outcome::Ok)
        }
        Command::MiniTest(a) => {
            let (scores, truth, task, ks) = eval_inputs(&a.common)?;
            let similar: BTreeMap<String, Vec<String>> = read_json(&a.similar)?;
            let sample: Vec<String> = match &a.sample {
                Some(p) => read_json(p)?,
                None => {
                    let eligible: Vec<String> = scores
                        .query_ids()
                        .iter()
                        .filter(|q| similar.contains_key(*q))
                        .cloned()
                        .collect();
                    eval::sample_queries(&eligible, eval::MINI_TEST_QUERIES.min(eligible.len()), seed)?
                }
            };
            let reports = eval::mini_test(&scores, &truth, &similar, &sample, &ks, task)?;
            for r in &reports {
                println!("{r}");
            }
            write_json(&a.common.out, &reports)?;
            Ok(Outcome::Ok)
        }
        Command::ComparePools(a) => {
            let (scores, truth, task, ks) = eval_inputs(&a.common)?;
            let pool_a: Vec<String> = read_json(&a.pool_a)?;
            let pool_b: Vec<String> = read_json(&a.pool_b)?;
            let reports =
                eval::compare_pools(&scores, &truth, (&a.label_a, &pool_a), (&a.label_b, &pool_b), &ks, task)?;
            for r in &reports {
                println!("{r}");
            }
            write_json(&a.common.out, &reports)?;
            Ok(Outcome::Ok)
        }
        Command::PairsEval(a) => {
            let pairs: Vec<PairScore> = read_jsonl(&a.pairs)?;
            let accuracy = eval::pair_match_accuracy(&pairs)?;
            println!("accuracy={accuracy:.2}");
            write_json(
                &a.out,
                &PairsReport {
                    n_pairs: pairs.len(),
                    accuracy: (accuracy * 100.0).round() / 100.0,
                },
            )?;
            Ok(Outcome::Ok)
        }
        Command::Stats(a) => {
            let captions = load_captions(&a.captions)?;
            let stats = eval::text_stats(&captions);
            println!("{stats}");
            write_json(&a.out, &stats)?;
            Ok(Outcome::Ok)
        }
        Command::MockEmbed(a) => {
            mock_embed(&a, seed)?;
            Ok(Outcome::Ok)
        }
        Command::MockScore(a) => {
            let requests: Vec<ScoreRequest> = read_jsonl(&a.requests)?;
            let images = load_embeddings(&a.images, &ids_sidecar(&a.images))?;
            let records = MockScorer::new(&images, seed).score_batch(&requests)?;
            write_jsonl(&a.out, &records)?;
            Ok(Outcome::Ok)
        }
        Command::MockMerge(a) => {
            let requests: Vec<MergeRequest> = read_jsonl(&a.requests)?;
            write_jsonl(&a.out, &mock_merge_batch(&requests))?;
            Ok(Outcome::Ok)
        }
    }
}

/// One merge-training example: the merger should turn `rest` + `detail`
/// back into `target`.
#[derive(Debug, Serialize)]
struct MergePair {
    caption_id: String,
    kind: fgbench::text::SplitKind,
    rest: String,
    detail: String,
    target: String,
}

#[derive(Debug, Serialize)]
struct PairsReport {
    n_pairs: usize,
    accuracy: f64,
}

type RecordCheck = fn(&str) -> fgbench::Result<Vec<(usize, String)>>;

#[derive(Debug, Serialize)]
struct FileReport {
    file: String,
    kind: &'static str,
    #[serde(flatten)]
    report: ValidationReport,
}

fn validate(a: crate::ValidateArgs) -> Result<Outcome> {
    let mut reports = Vec::new();
    let unreadable = |file: &Path, e: &dyn std::fmt::Display| Issue::Unreadable {
        file: file.display().to_string(),
        message: e.to_string(),
    };
    let mut single = |path: &Path, kind: &'static str, check: &dyn Fn(&Path) -> Result<Vec<Issue>>| {
        let issues = check(path).unwrap_or_else(|e| vec![unreadable(path, &format!("{e:#}"))]);
        reports.push(FileReport {
            file: path.display().to_string(),
            kind,
            report: ValidationReport { issues },
        });
    };
    if let Some(p) = &a.manifest {
        single(p, "manifest", &|p| Ok(validate_dataset(&read_manifest(p)?).issues));
    }
    if let Some(p) = &a.embeddings {
        single(p, "embeddings", &|p| {
            load_embeddings(p, &ids_sidecar(p))?;
            Ok(Vec::new())
        });
    }
    if let Some(p) = &a.captions {
        single(p, "captions", &|p| {
            let text = fs::read_to_string(p)?;
            Ok(parse_captions(&text)?
                .iter()
                .filter(|c| !c.tokens.is_empty() && !c.tokens_match_text())
                .map(|c| Issue::TokensMismatchText {
                    caption_id: c.caption_id.clone(),
                })
                .collect())
        });
    }
    if let Some(p) = &a.scores {
        single(p, "scores", &|p| {
            load_scores(p)?;
            Ok(Vec::new())
        });
    }
    if let Some(p) = &a.review {
        single(p, "review", &|p| {
            parse_review_queue(&fs::read_to_string(p)?)?;
            Ok(Vec::new())
        });
    }
    let contracts: [(&Option<std::path::PathBuf>, &'static str, RecordCheck); 4] = [
        (&a.prompts, "prompts", |t| {
            Ok(record_problems(&parse_jsonl::<PromptRecord>(t, "prompts")?))
        }),
        (&a.generations, "generations", |t| {
            Ok(record_problems(&parse_jsonl::<GenerationRecord>(t, "generations")?))
        }),
        (&a.clipscores, "clipscores", |t| {
            Ok(record_problems(&parse_jsonl::<ScoreRecord>(t, "clipscores")?))
        }),
        (&a.merges, "merges", |t| {
            Ok(record_problems(&parse_jsonl::<MergeRecord>(t, "merges")?))
        }),
    ];
    for (path, kind, check) in contracts {
        if let Some(p) = path {
            single(p, kind, &|p| {
                let file = p.display().to_string();
                Ok(check(&fs::read_to_string(p)?)?
                    .into_iter()
                    .map(|(record, message)| Issue::BadRecord {
                        file: file.clone(),
                        record,
                        message,
                    })
                    .collect())
            });
        }
    }
    if reports.is_empty() {
        bail!("nothing to validate; pass at least one file flag");
    }
    let clean = reports.iter().all(|r| r.report.is_clean());
    for r in &reports {
        for issue in &r.report.issues {
            eprintln!("{}: {issue}", r.file);
        }
    }
    match &a.out {
        Some(out) => write_json(out, &reports)?,
        None => println!("{}", serde_json::to_string_pretty(&reports)?),
    }
    Ok(if clean { Outcome::Ok } else { Outcome::ValidationFailed })
}

fn score_requests(a: &crate::ScoreRequestsArgs) -> Result<Vec<ScoreRequest>> {
    match (&a.captions, &a.generations, &a.candidates, &a.merged) {
        (Some(captions), None, None, None) => Ok(load_captions(captions)?
            .into_iter()
            .map(|c| ScoreRequest {
                caption_id: c.caption_id,
                image_id: c.image_id,
                text: c.text,
            })
            .collect()),
        (Some(captions), Some(generations), None, None) => {
            let captions = load_captions(captions)?;
            let generations: Vec<GenerationRecord> = read_jsonl(generations)?;
            let by_id: BTreeMap<&str, &CaptionRecord> = captions.iter().map(|c| (c.caption_id.as_str(), c)).collect();
            generations
                .iter()
                .map(|g| {
                    let c = by_id
                        .get(g.caption_id.as_str())
                        .with_context(|| format!("generation for unknown caption {:?}", g.caption_id))?;
                    Ok(ScoreRequest {
                        caption_id: g.caption_id.clone(),
                        image_id: c.image_id.clone(),
                        text: fgbench::text::combine_detail(&c.text, &g.generated_detail),
                    })
                })
                .collect()
        }
        (None, None, Some(candidates), Some(merged)) => {
            let candidates: Vec<RenovationCandidate> = read_jsonl(candidates)?;
            let merges: Vec<MergeRecord> = read_jsonl(merged)?;
            if candidates.len() != merges.len() {
                bail!("{} candidates but {} merged texts", candidates.len(), merges.len());
            }
            candidates
                .iter()
                .zip(&merges)
                .enumerate()
                .map(|(i, (c, m))| {
                    if c.caption_id != m.caption_id {
                        bail!(
                            "line {}: merged text is for {:?}, expected {:?}",
                            i + 1,
                            m.caption_id,
                            c.caption_id
                        );
                    }
                    Ok(ScoreRequest {
                        caption_id: c.caption_id.clone(),
                        image_id: c.image_id.clone(),
                        text: m.merged_text.clone(),
                    })
                })
                .collect()
        }
        _ => bail!("pass --captions, --captions with --generations, or --candidates with --merged"),
    }
}

fn mock_embed(a: &crate::MockEmbedArgs, seed: u64) -> Result<()> {
    if a.dim == 0 {
        bail!("--dim must be positive");
    }
    let captions = load_captions(&a.captions)?;
    let embedder = TextEmbedder::new(a.dim, seed);
    let texts = embedder.embed_all(captions.iter().map(|c| (c.caption_id.as_str(), c.text.as_str())))?;
    write_matrix(&texts, &a.out_texts)?;

    if let Some(out) = &a.out_images {
        let mut sums: BTreeMap<&str, Vec<f32>> = BTreeMap::new();
        let mut order = Vec::new();
        for (i, c) in captions.iter().enumerate() {
            let acc = sums.entry(c.image_id.as_str()).or_insert_with(|| {
                order.push(c.image_id.as_str());
                vec![0.0; a.dim]
            });
            for (s, v) in acc.iter_mut().zip(texts.row(i)) {
                *s += v;
            }
        }
        let mut rng = synth::sub_rng(seed, "mock-images");
        let rows = order
            .iter()
            .map(|id| synth::perturb(&synth::normalized(sums[id].clone()), a.image_noise, &mut rng))
            .collect();
        let ids = order.iter().map(|s| s.to_string()).collect();
        write_matrix(&EmbeddingMatrix::from_rows(ids, a.dim, rows)?, out)?;
    }

    match (&a.out_aux, a.aux_count) {
        (Some(out), n) => {
            let mut rng = synth::sub_rng(seed, "mock-aux");
            let ids = (0..n).map(|i| format!("aux-{i:05}")).collect();
            let rows = (0..n).map(|_| synth::random_unit(&mut rng, a.dim)).collect();
            write_matrix(&EmbeddingMatrix::from_rows(ids, a.dim, rows)?, out)?;
        }
        (None, 0) => {}
        (None, _) => bail!("--aux-count needs --out-aux"),
    }
    Ok(())
}

/// Truth values may be a single id or a list of ids.
#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

fn eval_inputs(c: &EvalCommon) -> Result<(fgbench::dataset::ScoreMatrix, GroundTruth, Task, Vec<usize>)> {
    let config = RunConfig {
        ks: c.ks.clone(),
        ..Default::default()
    };
    config.check()?;
    let scores = load_scores(&c.scores)?;
    let raw: BTreeMap<String, OneOrMany> = read_json(&c.truth)?;
    let truth = raw
        .into_iter()
        .map(|(q, v)| match v {
            OneOrMany::One(id) => (q, vec![id]),
            OneOrMany::Many(ids) => (q, ids),
        })
        .collect();
    Ok((scores, truth, c.task.into(), config.ks))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_matrix(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    write_embeddings(m, path, &ids_sidecar(path))?;
    Ok(())
}
