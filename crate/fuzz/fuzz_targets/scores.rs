#![no_main]

use fgbench::dataset::ScoreMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = ScoreMatrix::from_bytes(data) {
        let again = ScoreMatrix::from_bytes(&m.to_bytes()).expect("re-encoded dump must decode");
        assert_eq!(again, m);
        if m.n_candidates() > 0 {
            let _ = fgbench::similarity::topk(&m, 3);
        }
    }
});
