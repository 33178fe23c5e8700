//! Builds merge-training pairs by cutting a detail phrase out of a
//! fine-grained caption.
//!
//! Two structures are recognised from the dependency annotation:
//!
//! * a prepositional phrase attached to a verb or to the sentence root. Both
//!   the prep-headed style (`prep` → `pobj`) and the case-marked style (a
//!   nominal with an ADP `case` child) are accepted. The detail reads
//!   `it is <phrase>.`
//! * an adjectival modifier (`amod`) of a noun. The detail reads
//!   `the <noun> is <adjective>.`
//!
//! Each pair removes only its own span from the sentence.

use serde::{Deserialize, Serialize};

use crate::dataset::{detokenize, CaptionRecord, Upos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    PrepositionalPhrase,
    AdjectiveNoun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPair {
    pub kind: SplitKind,
    /// Sentence without the detail span.
    pub rest: String,
    /// Detail rewritten as a short standalone sentence.
    pub detail: String,
    /// First token index of the removed span.
    pub span_start: usize,
}

fn is_pp_object(pos: Upos) -> bool {
    matches!(pos, Upos::Noun | Upos::Propn | Upos::Pron)
}

fn is_contiguous(span: &[usize]) -> bool {
    span.windows(2).all(|w| w[1] == w[0] + 1)
}

/// Remaining tokens outside `removed`, trailing punctuation dropped, closed with a period.
fn rest_sentence(caption: &CaptionRecord, removed: &[usize]) -> Option<String> {
    let mut kept: Vec<&str> = Vec::new();
    let mut last_word = 0;
    for (i, t) in caption.tokens.iter().enumerate() {
        if removed.contains(&i) {
            continue;
        }
        kept.push(t.surface.as_str());
        if t.pos != Upos::Punct {
            last_word = kept.len();
        }
    }
    kept.truncate(last_word);
    if kept.is_empty() {
        return None;
    }
    Some(format!("{}.", detokenize(kept)))
}

/// Root of the prepositional phrase introduced by ADP token `adp`, if any.
fn pp_root(caption: &CaptionRecord, adp: usize) -> Option<usize> {
    let tok = &caption.tokens[adp];
    if tok.pos != Upos::Adp {
        return None;
    }
    match tok.deprel.as_str() {
        "prep" => caption
            .children(adp)
            .any(|c| is_pp_object(caption.tokens[c].pos))
            .then_some(adp),
        "case" => {
            let head = tok.head_index()?;
            let leftmost = caption.subtree(head).first().copied();
            (is_pp_object(caption.tokens[head].pos) && leftmost == Some(adp)).then_some(head)
        }
        _ => None,
    }
}

fn attaches_to_clause(caption: &CaptionRecord, phrase: usize) -> bool {
    match caption.tokens[phrase].head_index() {
        Some(h) => caption.tokens[h].pos.is_verbal() || caption.tokens[h].is_root(),
        None => false,
    }
}

fn pp_pair(caption: &CaptionRecord, adp: usize) -> Option<SplitPair> {
    let phrase = pp_root(caption, adp)?;
    if !attaches_to_clause(caption, phrase) {
        return None;
    }
    let span = caption.subtree(phrase);
    if !is_contiguous(&span) || span.first() != Some(&adp) {
        return None;
    }
    let rest = rest_sentence(caption, &span)?;
    let text = detokenize(span.iter().map(|&i| caption.tokens[i].surface.as_str()));
    Some(SplitPair {
        kind: SplitKind::PrepositionalPhrase,
        rest,
        detail: format!("it is {text}."),
        span_start: adp,
    })
}

fn amod_pair(caption: &CaptionRecord, adj: usize) -> Option<SplitPair> {
    let tok = &caption.tokens[adj];
    if tok.pos != Upos::Adj || tok.deprel != "amod" {
        return None;
    }
    let noun = &caption.tokens[tok.head_index()?];
    if !noun.pos.is_nominal() {
        return None;
    }
    Some(SplitPair {
        kind: SplitKind::AdjectiveNoun,
        rest: rest_sentence(caption, &[adj])?,
        detail: format!("the {} is {}.", noun.surface, tok.surface),
        span_start: adj,
    })
}

/// All extractable (rest, detail) pairs, ordered by span start.
pub fn split_for_merge_training(caption: &CaptionRecord) -> Vec<SplitPair> {
    let mut pairs: Vec<SplitPair> = (0..caption.tokens.len())
        .filter_map(|i| pp_pair(caption, i).or_else(|| amod_pair(caption, i)))
        .collect();
    pairs.sort_by_key(|p| p.span_start);
    pairs
}
