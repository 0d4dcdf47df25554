#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = fairhin::formats::read_rankings(data) {
        let _ = fairhin::formats::rankings_by_user(&rows);
    }
});
