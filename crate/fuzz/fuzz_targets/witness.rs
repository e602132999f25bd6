#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(w) = ncgame::gns::parse_witness(text) {
        let _ = w.verify();
    }
});
