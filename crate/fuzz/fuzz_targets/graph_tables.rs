#![no_main]
use libfuzzer_sys::fuzz_target;

mod common;

fuzz_target!(|data: &[u8]| {
    let g = common::graph();
    let _ = fairhin::formats::read_labels(data, &g);
    let _ = fairhin::formats::read_item_texts(data, &g);
    let _ = fairhin::formats::read_splits(data, &g);
});
