use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::CaptionRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    /// Template row, 1 through 5.
    pub template_row: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub caption_id: String,
    pub nouns: Vec<String>,
    pub prompts: Vec<Prompt>,
    /// Caption text followed by each prompt.
    pub prompted_inputs: Vec<String>,
}

/// Noun and proper-noun surfaces in sentence order, deduplicated ignoring case.
pub fn extract_nouns(caption: &CaptionRecord) -> Vec<String> {
    let mut seen = HashSet::new();
    caption
        .tokens
        .iter()
        .filter(|t| t.pos.is_nominal())
        .filter(|t| seen.insert(t.surface.to_lowercase()))
        .map(|t| t.surface.clone())
        .collect()
}

/// Instantiates the five prompt templates.
///
/// Rows 1 and 2 are always emitted, rows 3 and 4 once per noun, and row 5
/// once for each of "man" / "woman" found among the nouns.
pub fn build_prompts(caption: &CaptionRecord, nouns: &[String]) -> PromptSet {
    let mut prompts = vec![
        Prompt {
            template_row: 1,
            text: "It is".into(),
        },
        Prompt {
            template_row: 2,
            text: "There is".into(),
        },
    ];
    for noun in nouns {
        prompts.push(Prompt {
            template_row: 3,
            text: format!("The {noun} is"),
        });
        prompts.push(Prompt {
            template_row: 4,
            text: format!("The color of {noun}"),
        });
    }
    for noun in nouns {
        let lower = noun.to_lowercase();
        if lower == "man" || lower == "woman" {
            prompts.push(Prompt {
                template_row: 5,
                text: format!("The {lower} wears"),
            });
        }
    }
    let prompted_inputs = prompts.iter().map(|p| format!("{} {}", caption.text, p.text)).collect();
    PromptSet {
        caption_id: caption.caption_id.clone(),
        nouns: nouns.to_vec(),
        prompts,
        prompted_inputs,
    }
}
