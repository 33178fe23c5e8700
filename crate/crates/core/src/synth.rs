//! Seeded synthetic fixtures: a hashing text embedder, planted-cluster
//! image pools, and dependency-annotated sentences.
//!
//! Everything here is a pure function of its seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::dataset::{
    detokenize, ids_sidecar, write_captions, write_embeddings, CaptionRecord, Dataset, EmbeddingMatrix, Manifest,
    Token, Upos,
};
use crate::error::{Error, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent generator from a seed and a label.
pub fn sub_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(bytes)
}

pub fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
}

pub fn normalized(mut v: Vec<f32>) -> Vec<f32> {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x = (f64::from(*x) / norm) as f32;
        }
    }
    v
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    normalized(gaussian(rng, dim))
}

/// `base` plus isotropic Gaussian noise with per-coordinate deviation `sigma`, renormalized.
pub fn perturb(base: &[f32], sigma: f32, rng: &mut impl Rng) -> Vec<f32> {
    let noise = gaussian(rng, base.len());
    normalized(base.iter().zip(noise).map(|(b, n)| b + sigma * n).collect())
}

/// Bag-of-words embedder: each lowercased word maps to a seeded Gaussian
/// vector; a text embeds to the normalized sum of its word vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextEmbedder {
    dim: usize,
    seed: u64,
}

impl TextEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn word_vector(&self, word: &str) -> Vec<f32> {
        gaussian(&mut sub_rng(self.seed, word), self.dim)
    }

    pub fn embed(&self, text: &str) -> Vec<f32> {
        let mut acc = vec![0f32; self.dim];
        let mut any = false;
        for word in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            any = true;
            for (a, v) in acc.iter_mut().zip(self.word_vector(&word.to_lowercase())) {
                *a += v;
            }
        }
        if !any {
            acc = self.word_vector("\u{0}empty");
        }
        normalized(acc)
    }

    pub fn embed_all<'a>(&self, items: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<EmbeddingMatrix> {
        let (ids, rows): (Vec<String>, Vec<Vec<f32>>) = items
            .into_iter()
            .map(|(id, text)| (id.to_string(), self.embed(text)))
            .unzip();
        EmbeddingMatrix::from_rows(ids, self.dim, rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub targets: usize,
    pub planted_per_target: usize,
    pub distractors: usize,
    pub captions_per_target: usize,
    pub dim: usize,
    /// Per-coordinate noise of planted near-duplicates around their target.
    pub planted_sigma: f32,
    /// Per-coordinate noise of caption embeddings around their target.
    pub caption_sigma: f32,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            targets: 100,
            planted_per_target: 9,
            distractors: 1000,
            captions_per_target: 5,
            dim: 64,
            planted_sigma: 0.04,
            caption_sigma: 0.06,
        }
    }
}

/// Target images, each surrounded by planted near-duplicates, hidden among
/// random distractors.
#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub config: PlantedConfig,
    pub target_ids: Vec<String>,
    /// Planted near-duplicate ids per target.
    pub planted: BTreeMap<String, Vec<String>>,
    pub captions: Vec<CaptionRecord>,
    pub image_embeddings: EmbeddingMatrix,
    pub text_embeddings: EmbeddingMatrix,
    /// Planted images and distractors, shuffled.
    pub auxiliary: EmbeddingMatrix,
}

impl PlantedFixture {
    pub fn generate(config: PlantedConfig, seed: u64) -> Result<Self> {
        let mut rng = sub_rng(seed, "planted");
        let dim = config.dim;
        let mut target_ids = Vec::new();
        let mut target_rows = Vec::new();
        let mut planted = BTreeMap::new();
        let mut aux: Vec<(String, Vec<f32>)> = Vec::new();
        let mut captions = Vec::new();
        let mut text_rows = Vec::new();
        for t in 0..config.targets {
            let id = format!("target-{t:04}");
            let base = random_unit(&mut rng, dim);
            let mut near = Vec::new();
            for p in 0..config.planted_per_target {
                let pid = format!("near-{t:04}-{p}");
                aux.push((pid.clone(), perturb(&base, config.planted_sigma, &mut rng)));
                near.push(pid);
            }
            for c in 0..config.captions_per_target {
                let cid = format!("{id}-cap{c}");
                text_rows.push((cid.clone(), perturb(&base, config.caption_sigma, &mut rng)));
                captions.push(CaptionRecord {
                    caption_id: cid,
                    image_id: id.clone(),
                    text: format!("caption {c} of image {t}"),
                    tokens: Vec::new(),
                });
            }
            planted.insert(id.clone(), near);
            target_ids.push(id);
            target_rows.push(base);
        }
        for d in 0..config.distractors {
            aux.push((format!("distractor-{d:05}"), random_unit(&mut rng, dim)));
        }
        aux.shuffle(&mut rng);

        let (aux_ids, aux_rows) = aux.into_iter().unzip();
        let (text_ids, text_rows) = text_rows.into_iter().unzip();
        Ok(Self {
            image_embeddings: EmbeddingMatrix::from_rows(target_ids.clone(), dim, target_rows)?,
            text_embeddings: EmbeddingMatrix::from_rows(text_ids, dim, text_rows)?,
            auxiliary: EmbeddingMatrix::from_rows(aux_ids, dim, aux_rows)?,
            config,
            target_ids,
            planted,
            captions,
        })
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            name: "planted".into(),
            image_ids: self.target_ids.clone(),
            captions_path: "captions.jsonl".into(),
            image_embeddings_path: "images.fge1".into(),
            text_embeddings_path: "texts.fge1".into(),
            exclusion_ids: ["train-0001", "train-0002"].iter().map(|s| s.to_string()).collect(),
            captions_per_image: Some(self.config.captions_per_target),
            base_dir: Default::default(),
        }
    }

    pub fn dataset(&self) -> Dataset {
        Dataset {
            manifest: self.manifest(),
            captions: self.captions.clone(),
            image_embeddings: self.image_embeddings.clone(),
            text_embeddings: self.text_embeddings.clone(),
        }
    }

    /// Writes `manifest.json`, captions, both embedding files and `aux.fge1` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let m = self.manifest();
        let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Invalid(e.to_string()))?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        let path = dir.join(&m.captions_path);
        std::fs::write(&path, write_captions(&self.captions)).map_err(|e| Error::io(&path, e))?;
        for (matrix, name) in [
            (&self.image_embeddings, &m.image_embeddings_path),
            (&self.text_embeddings, &m.text_embeddings_path),
            (&self.auxiliary, &"aux.fge1".into()),
        ] {
            let p = dir.join(name);
            write_embeddings(matrix, &p, &ids_sidecar(&p))?;
        }
        Ok(())
    }
}

const SUBJECTS: &[&str] = &["dog", "man", "woman", "boy", "girl", "cat", "horse", "child"];
const ADJECTIVES: &[&str] = &["young", "red", "small", "large", "brown", "white", "old", "happy"];
const VERBS: &[&str] = &["sits", "stands", "plays", "runs", "walks", "rides", "holds", "eats"];
const OBJECTS: &[&str] = &["ball", "frisbee", "kite", "bike", "book", "sandwich"];
const PLACES: &[&str] = &[
    "table", "beach", "street", "hill", "bench", "field", "mountain", "river",
];
const PREPOSITIONS: &[&str] = &["on", "in", "near", "under", "beside", "at"];

struct SentenceBuilder {
    tokens: Vec<Token>,
}

impl SentenceBuilder {
    fn push(&mut self, surface: &str, pos: Upos, head: i64, deprel: &str) -> usize {
        self.tokens.push(Token {
            surface: surface.to_string(),
            pos,
            head,
            deprel: deprel.to_string(),
        });
        self.tokens.len() - 1
    }

    fn set_head(&mut self, i: usize, head: usize) {
        self.tokens[i].head = head as i64;
    }

    /// Determiner, optional adjective and noun; returns the noun index.
    fn noun_phrase(&mut self, rng: &mut impl Rng, nouns: &[&str], adj_prob: f64) -> usize {
        let det = self.push(["a", "the"].choose(rng).unwrap(), Upos::Det, -1, "det");
        let adj = rng
            .random_bool(adj_prob)
            .then(|| self.push(ADJECTIVES.choose(rng).unwrap(), Upos::Adj, -1, "amod"));
        let noun = self.push(nouns.choose(rng).unwrap(), Upos::Noun, -1, "");
        self.set_head(det, noun);
        if let Some(a) = adj {
            self.set_head(a, noun);
        }
        noun
    }
}

/// Generates simple annotated captions such as
/// "a young boy plays a frisbee on top of a mountain."
///
/// Prepositional phrases use the prep-headed scheme (`prep`/`pobj`) or, for
/// roughly a third of sentences, the case-marked scheme (`case`/`obl`).
pub fn annotated_sentences(n: usize, seed: u64) -> Vec<CaptionRecord> {
    let mut rng = sub_rng(seed, "sentences");
    (0..n)
        .map(|i| {
            let mut b = SentenceBuilder { tokens: Vec::new() };
            let subj = b.noun_phrase(&mut rng, SUBJECTS, 0.5);
            b.tokens[subj].deprel = "nsubj".into();
            let verb = b.push(VERBS.choose(&mut rng).unwrap(), Upos::Verb, -1, "ROOT");
            b.set_head(subj, verb);
            if rng.random_bool(0.5) {
                let obj = b.noun_phrase(&mut rng, OBJECTS, 0.4);
                b.tokens[obj].deprel = "dobj".into();
                b.set_head(obj, verb);
            }
            if rng.random_bool(0.85) {
                let case_marked = rng.random_bool(0.33);
                let prep = b.push(PREPOSITIONS.choose(&mut rng).unwrap(), Upos::Adp, -1, "");
                let nested = rng.random_bool(0.3);
                let obj = if nested {
                    b.push("top", Upos::Noun, -1, "")
                } else {
                    b.noun_phrase(&mut rng, PLACES, 0.3)
                };
                if case_marked {
                    b.tokens[prep].deprel = "case".into();
                    b.set_head(prep, obj);
                    b.tokens[obj].deprel = "obl".into();
                    b.set_head(obj, verb);
                } else {
                    b.tokens[prep].deprel = "prep".into();
                    b.set_head(prep, verb);
                    b.tokens[obj].deprel = "pobj".into();
                    b.set_head(obj, prep);
                }
                if nested {
                    let of = b.push("of", Upos::Adp, -1, "");
                    let inner = b.noun_phrase(&mut rng, PLACES, 0.3);
                    if case_marked {
                        b.tokens[of].deprel = "case".into();
                        b.set_head(of, inner);
                        b.tokens[inner].deprel = "nmod".into();
                        b.set_head(inner, obj);
                    } else {
                        b.tokens[of].deprel = "prep".into();
                        b.set_head(of, obj);
                        b.tokens[inner].deprel = "pobj".into();
                        b.set_head(inner, of);
                    }
                }
            }
            b.push(".", Upos::Punct, verb as i64, "punct");
            let text = detokenize(b.tokens.iter().map(|t| t.surface.as_str()));
            CaptionRecord {
                caption_id: format!("s{i:03}"),
                image_id: format!("img{i:03}"),
                text,
                tokens: b.tokens,
            }
        })
        .collect()
}
