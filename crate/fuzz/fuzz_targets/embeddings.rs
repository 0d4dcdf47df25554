#![no_main]
use libfuzzer_sys::fuzz_target;

mod common;

fuzz_target!(|data: &[u8]| {
    if let Ok(named) = fairhin::embedding::read_named(data) {
        let g = common::graph();
        let _ = named.resolve(|n| g.node_by_name(n));
    }
});
