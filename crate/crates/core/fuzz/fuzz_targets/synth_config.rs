#![no_main]

use agglom_core::synth::SynthConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = SynthConfig::from_toml(s) {
        let text = cfg.to_toml();
        let back = SynthConfig::from_toml(&text).expect("serialized config parses");
        assert_eq!(back.to_toml(), text);
        let _ = cfg.render_config();
        let _ = cfg.counts();
    }
});
