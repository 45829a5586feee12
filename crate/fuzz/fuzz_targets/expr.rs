#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(e) = darboux::parse_expression(text, &["t1", "t2", "y"]) {
        // evaluation may fail on domain errors but must not panic
        let _ = darboux::eval_jet(&e, &[0.1, -0.2, 0.3], 2);
    }
});
