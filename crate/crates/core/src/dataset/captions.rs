use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal POS tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub fn is_nominal(self) -> bool {
        matches!(self, Upos::Noun | Upos::Propn)
    }

    pub fn is_verbal(self) -> bool {
        matches!(self, Upos::Verb | Upos::Aux)
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub pos: Upos,
    /// Index of the syntactic head, or -1 for the root.
    pub head: i64,
    pub deprel: String,
}

impl Token {
    pub fn head_index(&self) -> Option<usize> {
        usize::try_from(self.head).ok()
    }

    pub fn is_root(&self) -> bool {
        self.head < 0
    }
}

/// One caption with its token-level annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub caption_id: String,
    pub image_id: String,
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<Token>,
}

impl CaptionRecord {
    /// Checks head indices: each is -1 or a valid index other than the
    /// token's own, and following heads from any token reaches a root.
    pub fn check_heads(&self) -> Result<()> {
        let n = self.tokens.len() as i64;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.head < -1 || tok.head >= n || tok.head == i as i64 {
                return Err(Error::Invalid(format!(
                    "caption {:?}: token {} has invalid head {}",
                    self.caption_id, i, tok.head
                )));
            }
        }
        for start in 0..self.tokens.len() {
            let mut at = start;
            let mut steps = 0;
            while let Some(h) = self.tokens[at].head_index() {
                at = h;
                steps += 1;
                if steps > self.tokens.len() {
                    return Err(Error::Invalid(format!(
                        "caption {:?}: token {start} is on a head cycle",
                        self.caption_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when the token surfaces spell out `text`, ignoring whitespace.
    pub fn tokens_match_text(&self) -> bool {
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        let joined: String = self.tokens.iter().map(|t| t.surface.as_str()).collect();
        squash(&joined) == squash(&self.text)
    }

    /// Children of token `i`, in sentence order.
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.tokens
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.head_index() == Some(i))
            .map(|(j, _)| j)
    }

    /// All tokens dominated by `i`, including `i`, sorted by position.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut stack = vec![i];
        while let Some(node) = stack.pop() {
            for child in self.children(node) {
                // heads are validated to be in range, but cycles are still possible
                if !out.contains(&child) {
                    out.push(child);
                    stack.push(child);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn attaches_left(surface: &str) -> bool {
    matches!(surface, "." | "," | "!" | "?" | ";" | ":" | "'s" | "n't" | ")" | "'")
}

/// Joins token surfaces with single spaces, attaching closing punctuation
/// to the preceding word.
pub fn detokenize<'a>(surfaces: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for s in surfaces {
        if !out.is_empty() && !attaches_left(s) && !out.ends_with('(') {
            out.push(' ');
        }
        out.push_str(s);
    }
    out
}

/// Parses caption JSONL. Blank lines are skipped.
pub fn parse_captions(text: &str) -> Result<Vec<CaptionRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: CaptionRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(format!("captions line {}", lineno + 1), e))?;
        rec.check_heads()?;
        if !seen.insert(rec.caption_id.clone()) {
            return Err(Error::DuplicateId(rec.caption_id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>> {
    parse_captions(&super::read_to_string(path)?)
}

pub fn write_captions(captions: &[CaptionRecord]) -> String {
    let mut out = String::new();
    for c in captions {
        out.push_str(&serde_json::to_string(c).expect("caption serializes"));
        out.push('\n');
    }
    out
}
