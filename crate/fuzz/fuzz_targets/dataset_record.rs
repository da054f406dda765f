#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(samples) = d2s_core::synthdata::parse_dataset(text, Path::new("fuzz.jsonl")) {
            for s in &samples {
                assert!(s.gt > 0.0 && s.gt < 1.0);
                assert!(s.image.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }
});
