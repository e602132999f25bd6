#![no_main]

use libfuzzer_sys::fuzz_target;
use ncgame::gamealg::{Dialect, GameShape, UniversalAlgebra};

fuzz_target!(|text: &str| {
    let shape = GameShape::new(2, 2, 2).unwrap();
    for dialect in [Dialect::Projector, Dialect::Signature] {
        let a = UniversalAlgebra::new(shape, dialect).unwrap().algebra;
        if let Ok(p) = a.parse(text) {
            assert_eq!(a.parse(&a.format(&p)).expect("printed poly must parse"), p);
        }
    }
});
