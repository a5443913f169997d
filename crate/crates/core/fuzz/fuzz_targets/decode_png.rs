#![no_main]

use agglom_core::raster::io::{decode_png, encode_png};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_png(data) {
        let again = decode_png(&encode_png(&img).unwrap()).unwrap();
        assert_eq!((again.width(), again.height()), (img.width(), img.height()));
    }
});
