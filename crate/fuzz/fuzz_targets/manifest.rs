#![no_main]

use fgbench::dataset::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Manifest::from_json_str(text) {
        let _ = m.duplicate_image_ids();
        let _ = m.excluded_pool_ids();
        let _ = m.captions_file();
    }
});
