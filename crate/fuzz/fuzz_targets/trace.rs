#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(trace) = nmas::trace::Trace::parse(text) {
            let again = nmas::trace::Trace::parse(&trace.to_ndjson()).expect("serialized trace parses");
            assert_eq!(again.to_ndjson(), trace.to_ndjson());
        }
    }
});
