#![no_main]

use flashdex::dense::CompressedIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = CompressedIndex::from_bytes(data) {
        let bytes = index.to_bytes();
        assert_eq!(CompressedIndex::from_bytes(&bytes).unwrap().to_bytes(), bytes);
        let query = vec![1.0f32; index.codebook().dim()];
        let _ = index.adc_search(&query, 5);
    }
});
