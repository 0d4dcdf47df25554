#![no_main]
use libfuzzer_sys::fuzz_target;

mod common;

// node table and edge list separated by a line of three dashes
fuzz_target!(|data: &[u8]| {
    if let Some((nodes, edges)) = common::split2(data, b"\n---\n") {
        if let Ok(g) = fairhin::formats::read_graph(nodes, edges) {
            let mut out = Vec::new();
            fairhin::formats::write_node_table(&mut out, &g).unwrap();
            fairhin::formats::write_edge_list(&mut out, &g).unwrap();
        }
    }
});
