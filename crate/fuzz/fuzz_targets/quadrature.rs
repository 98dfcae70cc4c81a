#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(q) = s.parse::<curveflow::quadrature::Quadrature>() {
            let r = q.rule();
            assert!(!r.is_empty());
        }
    }
});
