#![no_main]

use libfuzzer_sys::fuzz_target;

use d2s_core::config::RunConfig;

// Input layout: a TOML document, a NUL byte, then one override per line.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (doc, rest) = text.split_once('\0').unwrap_or((text, ""));
    let overrides: Vec<&str> = rest.lines().collect();
    let _ = RunConfig::parse_with_overrides(doc, &overrides);
});
