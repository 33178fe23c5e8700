#![no_main]

use fgbench::dataset::EmbeddingMatrix;
use libfuzzer_sys::fuzz_target;

// First byte: length of the id sidecar text that follows; the rest is the
// FGE1 body.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let (ids, body) = rest.split_at((n as usize).min(rest.len()));
    let Ok(ids) = std::str::from_utf8(ids) else { return };
    if let Ok(m) = EmbeddingMatrix::from_bytes(body, ids) {
        assert_eq!(m.to_bytes(), body);
        assert_eq!(m.ids_to_string(), ids);
    }
});
