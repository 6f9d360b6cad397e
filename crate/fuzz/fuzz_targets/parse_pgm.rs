#![no_main]

use libfuzzer_sys::fuzz_target;
use propkern::io::pgm::{encode_pgm, parse_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = parse_pgm(data) {
        // anything accepted must survive a binary round trip
        let again = parse_pgm(&encode_pgm(&img)).expect("re-encoded image must parse");
        assert_eq!(again, img);
    }
});
