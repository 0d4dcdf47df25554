#![no_main]
use libfuzzer_sys::fuzz_target;

mod common;

fuzz_target!(|data: &[u8]| {
    let _ = fairhin::formats::read_walk_tokens(data);
    let _ = fairhin::formats::read_walks(data, &common::graph());
});
