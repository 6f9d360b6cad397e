//! Input is split on NUL into the TU files in order: adjacency, graph
//! indicator, node labels, graph labels, node attributes. Missing trailing
//! sections are treated as absent files.

#![no_main]

use libfuzzer_sys::fuzz_target;
use propkern::io::tu::{parse_tu, TuFiles, TuOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut parts = text.split('\0');
    let adjacency = parts.next().unwrap_or("");
    let graph_indicator = parts.next().unwrap_or("");
    let files = TuFiles {
        adjacency,
        graph_indicator,
        node_labels: parts.next(),
        graph_labels: parts.next(),
        node_attributes: parts.next(),
    };
    for symmetrize in [false, true] {
        let _ = parse_tu(&files, "fuzz", TuOptions { symmetrize });
    }
});
