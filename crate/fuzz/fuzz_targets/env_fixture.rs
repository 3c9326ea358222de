#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(fixture) = nmas::env::EnvFixture::from_json(text) {
            let env = nmas::env::SimEnv::new(fixture);
            let _ = env.percepts("CodingAgent");
        }
    }
});
