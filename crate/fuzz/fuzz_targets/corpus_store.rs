#![no_main]

use flashdex::corpus::Corpus;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = Corpus::from_bytes(data) {
        let bytes = corpus.to_bytes();
        assert_eq!(Corpus::from_bytes(&bytes).unwrap(), corpus);
    }
});
