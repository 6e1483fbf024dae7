#![no_main]

use flashdex::eval::{parse_labels, parse_pairs, parse_queries};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let ids = match parse_queries(text) {
        Ok(q) => q.into_iter().map(|(id, _)| id).collect(),
        Err(_) => vec!["q1".to_string()],
    };
    let _ = parse_pairs(text, &ids);
    let _ = parse_labels(text);
});
