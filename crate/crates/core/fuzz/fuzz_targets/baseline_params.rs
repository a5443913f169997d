#![no_main]

use agglom_core::baselines::BaselineParams;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = BaselineParams::from_toml(s) {
        let text = p.to_toml();
        assert_eq!(BaselineParams::from_toml(&text).unwrap().to_toml(), text);
    }
});
