#![no_main]

use deltacolor::graph::{coloring_to_text, parse_coloring};
use libfuzzer_sys::fuzz_target;

// First byte picks n.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(c) = parse_coloring(text, n as usize) {
        assert_eq!(parse_coloring(&coloring_to_text(&c), n as usize).unwrap(), c);
    }
});
