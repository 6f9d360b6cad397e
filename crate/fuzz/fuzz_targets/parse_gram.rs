#![no_main]

use libfuzzer_sys::fuzz_target;
use propkern::io::gram::{format_kernel, parse_kernel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(k) = parse_kernel(text, "fuzz") {
        if let Ok(out) = format_kernel(&k) {
            let back = parse_kernel(&out, "fuzz").expect("formatted kernel must parse");
            assert_eq!(back.as_slice(), k.as_slice());
        }
    }
});
