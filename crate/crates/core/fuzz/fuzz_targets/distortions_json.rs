#![no_main]

use agglom_core::distortion::DistortionDistributions;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(d) = DistortionDistributions::from_json(s) {
        assert_eq!(DistortionDistributions::from_json(&d.to_json()).unwrap(), d);
    }
});
