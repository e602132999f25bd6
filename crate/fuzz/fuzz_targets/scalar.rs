#![no_main]

use libfuzzer_sys::fuzz_target;
use ncgame::cyclo::CycloField;

// First byte picks the field order, the rest is the scalar text.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let f = CycloField::new(u32::from(n % 24) + 1).unwrap();
    if let Ok(a) = f.parse_scalar(text) {
        let again = f.parse_scalar(&a.to_string()).expect("printed scalar must parse");
        assert_eq!(a, again);
    }
});
