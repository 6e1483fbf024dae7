#![no_main]

use std::path::Path;

use flashdex_cli::config::ConfigFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = ConfigFile::parse(Path::new("fuzz.toml"), text) {
            let _ = config.stages();
        }
    }
});
