#![no_main]

use libfuzzer_sys::fuzz_target;

use d2s_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = RunConfig::parse(text) {
            // Whatever parses must survive its own echo.
            assert_eq!(RunConfig::parse(&config.to_toml()).unwrap(), config);
        }
    }
});
