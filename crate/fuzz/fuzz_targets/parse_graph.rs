#![no_main]

use deltacolor::Graph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = Graph::parse(text) {
        let h = Graph::parse(&g.to_text()).expect("re-parse of own output");
        assert_eq!(g.edges().collect::<Vec<_>>(), h.edges().collect::<Vec<_>>());
        assert_eq!(g.delta(), h.delta());
    }
});
