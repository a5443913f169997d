#![no_main]

use agglom_core::synth::parse_counts;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(c) = parse_counts(s) {
            let _ = c.total();
        }
    }
});
