#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = nmas::lang::parse_literal(text);
        let _ = nmas::lang::parse_term(text);
        let _ = nmas::lang::parse_conjunction(text);
        let _ = nmas::lang::parse_body(text);
    }
});
