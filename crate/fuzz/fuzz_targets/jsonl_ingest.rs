#![no_main]

use flashdex::corpus::{ingest_bytes, CitationDetector, InputFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = ingest_bytes(data, InputFormat::Jsonl, &CitationDetector::default());
});
