#![no_main]

use libfuzzer_sys::fuzz_target;

// Parsed captions also go through the splitter and prompt builder, which
// walk the dependency tree.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(captions) = fgbench::dataset::parse_captions(text) else {
        return;
    };
    for c in &captions {
        let _ = c.tokens_match_text();
        let _ = fgbench::text::split_for_merge_training(c);
        let nouns = fgbench::text::extract_nouns(c);
        let _ = fgbench::text::build_prompts(c, &nouns);
    }
    let _ = fgbench::eval::text_stats(&captions);
});
