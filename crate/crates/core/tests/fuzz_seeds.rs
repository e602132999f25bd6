//! Runs the fuzz target bodies over the checked-in seed corpus, so the
//! round trips they assert are exercised on stable too.

use std::fs;
use std::path::PathBuf;

use ncgame::cyclo::CycloField;
use ncgame::gamealg::{parse_game, Dialect, GameShape, UniversalAlgebra};
use ncgame::gbase::{export_basis, parse_basis};
use ncgame::gns::parse_witness;
use ncgame::soscert::{check_certificate, export_certificate, parse_certificate};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(b: &[u8]) -> &str {
    std::str::from_utf8(b).unwrap()
}

#[test]
fn scalar_seeds_round_trip() {
    for (name, data) in seeds("scalar") {
        let (&n, rest) = data.split_first().unwrap();
        let f = CycloField::new(u32::from(n % 24) + 1).unwrap();
        let a = f
            .parse_scalar(text(rest))
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(f.parse_scalar(&a.to_string()).unwrap(), a, "{name}");
    }
}

#[test]
fn poly_seeds_round_trip() {
    let shape = GameShape::new(2, 2, 2).unwrap();
    for (name, data) in seeds("poly") {
        let mut parsed = 0;
        for dialect in [Dialect::Projector, Dialect::Signature] {
            let a = UniversalAlgebra::new(shape, dialect).unwrap().algebra;
            if let Ok(p) = a.parse(text(&data)) {
                assert_eq!(a.parse(&a.format(&p)).unwrap(), p, "{name}");
                parsed += 1;
            }
        }
        assert!(parsed > 0, "{name} parses in neither dialect");
    }
}

#[test]
fn game_seeds_parse() {
    for (name, data) in seeds("game") {
        parse_game(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn basis_seeds_round_trip() {
    for (name, data) in seeds("basis") {
        let rs = parse_basis(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(export_basis(&rs), text(&data), "{name}");
    }
}

#[test]
fn witness_seeds_verify() {
    for (name, data) in seeds("witness") {
        let w = parse_witness(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(w.verify().passed(), "{name}");
    }
}

#[test]
fn sos_seeds_round_trip_and_check() {
    for (name, data) in seeds("sos") {
        let c = parse_certificate(text(&data)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(export_certificate(&c), text(&data), "{name}");
        check_certificate(&c).unwrap();
    }
}
