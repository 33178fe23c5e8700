#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(items) = fgbench::text::parse_review_queue(text) {
        let _ = fgbench::text::apply_corrections(&items);
    }
});
