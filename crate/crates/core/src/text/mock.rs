//! Deterministic stand-ins for the merger and scorer backends.

use std::collections::HashMap;

use super::contracts::{MergeRecord, MergeRequest, ScoreRecord, ScoreRequest};
use crate::dataset::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::similarity::dot;
use crate::synth::TextEmbedder;

const SENTENCE_END: [char; 3] = ['.', '!', '?'];

fn strip_end(s: &str) -> &str {
    s.trim().trim_end_matches(SENTENCE_END).trim_end()
}

/// Whitespace tokens with trailing punctuation split off.
pub fn simple_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let core = word.trim_end_matches(|c: char| ",.!?;:".contains(c));
        if !core.is_empty() {
            out.push(core.to_string());
        }
        out.extend(word[core.len()..].chars().map(String::from));
    }
    out
}

/// Template merger: re-inserts a detail sentence produced by the splitter.
///
/// `it is <phrase>` is appended to the sentence; `the <noun> is <adj>` puts
/// the adjective before the first mention of the noun. Anything else is
/// appended after a comma.
pub fn mock_merge(rest: &str, detail: &str) -> String {
    let body = strip_end(rest);
    let detail = strip_end(detail);
    if let Some(phrase) = detail
        .get(..6)
        .filter(|p| p.eq_ignore_ascii_case("it is "))
        .map(|p| &detail[p.len()..])
    {
        return format!("{body} {phrase}.");
    }
    let words: Vec<&str> = detail.split_whitespace().collect();
    if let [the, noun, "is", adj] = words.as_slice() {
        if the.eq_ignore_ascii_case("the") {
            let mut rest_words: Vec<&str> = body.split_whitespace().collect();
            if let Some(pos) = rest_words.iter().position(|w| w.eq_ignore_ascii_case(noun)) {
                rest_words.insert(pos, adj);
                return format!("{}.", rest_words.join(" "));
            }
        }
    }
    format!("{body}, {detail}.")
}

pub fn mock_merge_batch(requests: &[MergeRequest]) -> Vec<MergeRecord> {
    requests
        .iter()
        .map(|r| MergeRecord {
            caption_id: r.caption_id.clone(),
            merged_text: mock_merge(&r.original_text, &r.generated_detail),
        })
        .collect()
}

/// Scores text against an image as the cosine between a hashed
/// bag-of-words embedding of the text and the image's embedding.
#[derive(Debug, Clone)]
pub struct MockScorer<'a> {
    embedder: TextEmbedder,
    images: &'a EmbeddingMatrix,
    cache: HashMap<String, f64>,
}

impl<'a> MockScorer<'a> {
    pub fn new(images: &'a EmbeddingMatrix, seed: u64) -> Self {
        Self {
            embedder: TextEmbedder::new(images.dim(), seed),
            images,
            cache: HashMap::new(),
        }
    }

    pub fn score(&mut self, image_id: &str, text: &str) -> Result<f64> {
        let image = self
            .images
            .row_by_id(image_id)
            .ok_or_else(|| Error::MissingEmbedding(image_id.to_string()))?;
        let key = format!("{image_id}\u{0}{text}");
        if let Some(&s) = self.cache.get(&key) {
            return Ok(s);
        }
        let t = self.embedder.embed(text);
        let norm = (dot(image, image) * dot(&t, &t)).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroRow(image_id.to_string()));
        }
        let s = dot(image, &t) / norm;
        self.cache.insert(key, s);
        Ok(s)
    }

    pub fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<ScoreRecord>> {
        requests
            .iter()
            .map(|r| {
                Ok(ScoreRecord {
                    caption_id: r.caption_id.clone(),
                    clipscore: self.score(&r.image_id, &r.text)?,
                })
            })
            .collect()
    }
}
