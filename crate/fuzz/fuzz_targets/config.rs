#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = fairhin::config::Config::from_toml(text) {
            let again = fairhin::config::Config::from_toml(&cfg.to_toml()).expect("serialized config parses");
            assert_eq!(cfg, again);
        }
    }
});
