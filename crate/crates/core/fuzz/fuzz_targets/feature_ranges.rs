#![no_main]

use agglom_core::features::{normalize, FeatureRanges, RegionFeatures, CLAMP_HIGH, CLAMP_LOW, NUM_FEATURES};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = FeatureRanges::from_json(s) {
        let x = normalize(&RegionFeatures::from_array([1.0; NUM_FEATURES]), &r);
        assert!(x.iter().all(|v| (CLAMP_LOW..=CLAMP_HIGH).contains(v)));
    }
});
