#![no_main]

use flashdex::corpus::{detect_citation, split_sentences};
use flashdex::text::tokenize;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (clean, _) = detect_citation(text);
    for s in split_sentences(&clean) {
        assert!(!s.is_empty());
        let _ = tokenize(&s);
    }
});
