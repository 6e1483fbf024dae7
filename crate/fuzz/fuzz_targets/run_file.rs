#![no_main]

use flashdex::eval::RunFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(Ok(run)) = std::str::from_utf8(data).map(RunFile::parse) {
        let _ = RunFile::parse(&run.to_trec("fuzz"));
    }
});
