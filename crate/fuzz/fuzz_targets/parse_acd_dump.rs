#![no_main]

use deltacolor::acd::parse_acd_dump;
use libfuzzer_sys::fuzz_target;

// First byte picks n.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(d) = parse_acd_dump(text, n as usize, 0.1) {
        let back = parse_acd_dump(&d.dump(), n as usize, 0.1).unwrap();
        assert_eq!(back.cliques, d.cliques);
        assert_eq!(back.sparse, d.sparse);
    }
});
