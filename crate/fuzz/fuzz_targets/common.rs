#![allow(dead_code)]

use fairhin::formats::read_graph;
use fairhin::HinGraph;

pub const NODES: &str =
    "# attribute=gender groups=M,F\nu1\tuser\tM\nu2\tuser\tF\nu3\tuser\tF\ni1\titem\t-\ni2\titem\t-\nc1\tcareer\t-\nc2\tcareer\t-\n";
pub const EDGES: &str = "u1\tlike\ti1\nu2\tlike\ti1\nu3\tlike\ti2\nu1\tchoose\tc1\nu2\tchoose\tc2\nu3\tchoose\tc1\n";

pub fn graph() -> HinGraph {
    read_graph(NODES.as_bytes(), EDGES.as_bytes()).expect("fixture graph")
}

/// Splits `data` at the first `sep`, or returns `None` without one.
pub fn split2<'a>(data: &'a [u8], sep: &[u8]) -> Option<(&'a [u8], &'a [u8])> {
    let at = data.windows(sep.len()).position(|w| w == sep)?;
    Some((&data[..at], &data[at + sep.len()..]))
}
