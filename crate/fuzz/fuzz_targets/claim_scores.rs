#![no_main]

use flashdex::prune::ClaimScoreTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ClaimScoreTable::parse_tsv(text);
    }
});
