#![no_main]

use agglom_core::ffnn::Network;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(net) = Network::from_json(s) {
        assert_eq!(Network::from_json(&net.to_json()).unwrap(), net);
        let _ = net.forward(&vec![0.5; net.n_input()]);
    }
});
