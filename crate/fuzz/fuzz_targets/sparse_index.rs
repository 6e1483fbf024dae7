#![no_main]

use flashdex::sparse::{search_terms, Bm25Params, InvertedIndex};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = InvertedIndex::from_bytes(data) {
        let bytes = index.to_bytes();
        let back = InvertedIndex::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let terms: Vec<&str> = index.doc_ids().iter().take(3).map(String::as_str).collect();
        let _ = search_terms(&index, Bm25Params::default(), &terms, 10);
    }
});
