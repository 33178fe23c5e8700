#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ids) = fgbench::dataset::parse_ids(text) {
            let rebuilt: String = ids.iter().map(|id| format!("{id}\n")).collect();
            assert_eq!(rebuilt, text);
        }
    }
});
