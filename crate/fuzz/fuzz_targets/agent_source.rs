#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(program) = nmas::lang::parse_agent_source(text) {
            // Whatever parses must print to something that parses back the same.
            let printed = nmas::lang::pretty_print(&program);
            assert_eq!(nmas::lang::parse_agent_source(&printed).as_ref(), Ok(&program), "{printed}");
        }
    }
});
