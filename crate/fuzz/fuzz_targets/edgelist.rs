#![no_main]

use libfuzzer_sys::fuzz_target;
use srdsa::topology::parse_edgelist;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(list) = parse_edgelist(text) else { return };
    // Every endpoint is a listed node and the induced graph on all nodes is
    // loop-free and symmetric.
    for &(a, b) in list.edges() {
        assert!(list.nodes().contains(&a) && list.nodes().contains(&b));
    }
    if list.nodes().len() <= 512 {
        let g = list.induced(list.nodes());
        for (a, b) in g.edges() {
            assert!(a != b && g.has_edge(b, a));
        }
    }
});
