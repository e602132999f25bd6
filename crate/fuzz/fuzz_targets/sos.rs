#![no_main]

use libfuzzer_sys::fuzz_target;
use ncgame::soscert::{export_certificate, parse_certificate};

fuzz_target!(|text: &str| {
    if let Ok(c) = parse_certificate(text) {
        let back = parse_certificate(&export_certificate(&c)).expect("exported certificate must parse");
        assert_eq!(back.squares, c.squares);
    }
});
