#![no_main]

use libfuzzer_sys::fuzz_target;
use propkern::io::parse_classes;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_classes(text, "fuzz");
    }
});
