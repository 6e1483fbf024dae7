#![no_main]

use flashdex::eval::Qrels;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(Ok(q)) = std::str::from_utf8(data).map(Qrels::parse) {
        assert_eq!(Qrels::parse(&q.to_trec()).unwrap(), q);
    }
});
