#![no_main]

use flashdex::dense::{flat_search, EmbeddingMatrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(emb) = EmbeddingMatrix::from_bytes(data) {
        assert_eq!(EmbeddingMatrix::from_bytes(&emb.to_bytes()).unwrap().to_bytes(), emb.to_bytes());
        if emb.n() > 0 {
            let _ = flat_search(&emb, emb.row(0), 5);
        }
    }
});
