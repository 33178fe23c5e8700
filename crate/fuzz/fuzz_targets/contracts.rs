#![no_main]

use fgbench::text::contracts::{parse_jsonl, GenerationRecord, MergeRecord, PromptRecord, ScoreRecord};
use fgbench::text::mock::mock_merge_batch;
use fgbench::text::RenovationCandidate;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_jsonl::<PromptRecord>(text, "prompts");
    let _ = parse_jsonl::<GenerationRecord>(text, "generations");
    let _ = parse_jsonl::<ScoreRecord>(text, "scores");
    let _ = parse_jsonl::<MergeRecord>(text, "merges");
    if let Ok(reqs) = parse_jsonl(text, "merge requests") {
        let _ = mock_merge_batch(&reqs);
    }
    if let Ok(cands) = parse_jsonl::<RenovationCandidate>(text, "candidates") {
        let _ = fgbench::text::filter_candidates(cands);
    }
});
