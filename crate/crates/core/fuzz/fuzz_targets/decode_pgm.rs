#![no_main]

use agglom_core::raster::io::{decode_pgm, encode_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pgm(data) {
        let again = decode_pgm(&encode_pgm(&img)).unwrap();
        assert_eq!((again.width(), again.height()), (img.width(), img.height()));
        assert!(img.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
