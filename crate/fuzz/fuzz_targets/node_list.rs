#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(v) = curveflow_cli::parse::parse_node_list(s) {
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
