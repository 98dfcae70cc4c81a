#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(curveflow_cli::parse::DtRule::Fixed(dt)) = s.parse::<curveflow_cli::parse::DtRule>() {
            assert!(dt.is_finite() && dt > 0.0);
        }
    }
});
