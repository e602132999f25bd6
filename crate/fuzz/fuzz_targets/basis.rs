#![no_main]

use libfuzzer_sys::fuzz_target;
use ncgame::gbase::{export_basis, parse_basis};

fuzz_target!(|text: &str| {
    if let Ok(rs) = parse_basis(text) {
        let out = export_basis(&rs);
        let back = parse_basis(&out).expect("exported basis must parse");
        assert_eq!(back.rules(), rs.rules());
    }
});
