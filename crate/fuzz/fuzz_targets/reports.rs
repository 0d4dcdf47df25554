#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(reports) = fairhin::eval::read_reports(data) {
        let _ = fairhin::eval::mean_points(&reports);
    }
});
