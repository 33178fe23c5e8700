//! Caption renovation: coarse-caption detection, prompt construction,
//! clipscore filtering and selection, merge-training data, and the manual
//! review queue.
//!
//! Text generation, sentence merging and image-text scoring are external
//! backends reached through the JSONL records in [`contracts`]. Deterministic
//! stand-ins live in [`mock`].

mod candidates;
mod coarse;
pub mod contracts;
pub mod mock;
mod prompts;
mod review;
mod split;

pub use candidates::{
    attach_merges, collect_candidates, combine_detail, filter_candidates, select_best, select_per_caption,
    RenovationCandidate, Selection,
};
pub use coarse::{detect_coarse, Granularity};
pub use prompts::{build_prompts, extract_nouns, Prompt, PromptSet};
pub use review::{
    apply_corrections, apply_to_captions, export_review_queue, parse_review_queue, write_review_queue, ReviewItem,
    ReviewStatus,
};
pub use split::{split_for_merge_training, SplitKind, SplitPair};
