//! Runs the binary on the bundled games: exit codes, artifact round trips,
//! rejection of edited artifacts, and byte-identical reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn games() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../games")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncgame"))
        .args(args)
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    let out = run(args);
    out.status
        .code()
        .unwrap_or_else(|| panic!("killed: {args:?}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decide_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let g = games();
    assert_eq!(
        code(&["decide", s(&g.join("chsh.game")), "--out", s(&out)]),
        1
    );
    assert_eq!(
        code(&["decide", s(&g.join("ghz.game")), "--out", s(&out)]),
        0
    );
    assert_eq!(
        code(&[
            "strategy",
            s(&g.join("magic_square.game")),
            "--out",
            s(&out)
        ]),
        0
    );
    // a cap too small to finish says nothing either way
    assert_eq!(
        code(&["gb", s(&g.join("ghz.game")), "--cap", "3", "--out", s(&out)]),
        2
    );
}

#[test]
fn bad_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.game");
    fs::write(&junk, "xor\nshape two\n").unwrap();
    assert_eq!(code(&["decide", s(&junk)]), 64);
    assert_eq!(code(&["decide", s(&dir.path().join("missing.game"))]), 64);
    assert_eq!(code(&["decide", "--no-such-flag", s(&junk)]), 64);
    assert_eq!(code(&["color", s(&games().join("chsh.game"))]), 64);
    assert_eq!(code(&["verify", s(&junk)]), 64);
}

#[test]
fn artifacts_verify_against_their_games() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["chsh", "ghz", "magic_square"] {
        let game = games().join(format!("{name}.game"));
        let prefix = dir.path().join(name);
        let c = code(&["decide", s(&game), "--out", s(&prefix)]);
        assert!(c == 0 || c == 1, "{name}: exit {c}");
        let basis = prefix.with_extension("basis");
        if !basis.exists() {
            assert_eq!(code(&["gb", s(&game), "--out", s(&prefix)]), 0, "{name} gb");
        }
        assert_eq!(
            code(&["verify", s(&basis), "--game", s(&game)]),
            0,
            "{name} basis"
        );
        let witness = prefix.with_extension("witness");
        if witness.exists() {
            assert_eq!(
                code(&["verify", s(&witness), "--game", s(&game)]),
                0,
                "{name} witness"
            );
        }
        // an artifact checked against the wrong game is rejected
        if name != "chsh" {
            assert_eq!(
                code(&["verify", s(&basis), "--game", s(&games().join("chsh.game"))]),
                65
            );
        }
    }
}

#[test]
fn edited_artifacts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("ghz");
    assert_eq!(
        code(&[
            "strategy",
            s(&games().join("ghz.game")),
            "--out",
            s(&prefix)
        ]),
        0
    );
    assert_eq!(
        code(&["gb", s(&games().join("ghz.game")), "--out", s(&prefix)]),
        0
    );
    let witness = prefix.with_extension("witness");
    let text = fs::read_to_string(&witness).unwrap();
    assert!(text.contains("\nm 6 3 -1\n"));
    let bad = dir.path().join("bad.witness");
    fs::write(&bad, text.replacen("\nm 6 3 -1\n", "\nm 6 3 1\n", 1)).unwrap();
    assert_eq!(code(&["verify", s(&bad)]), 65);

    let basis = prefix.with_extension("basis");
    let text = fs::read_to_string(&basis).unwrap();
    assert!(text.contains("\nrule x0 x0 - 1\n"));
    let bad = dir.path().join("bad.basis");
    fs::write(
        &bad,
        text.replacen("\nrule x0 x0 - 1\n", "\nrule x0 x0 - 2\n", 1),
    )
    .unwrap();
    assert_eq!(code(&["verify", s(&bad)]), 65);
}

#[test]
fn coloring_certificate_round_trip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let graph = games().join("bipyramid.graph");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for p in [&a, &b] {
        assert_eq!(
            code(&["color", s(&graph), "--sos-degree", "1", "--out", s(p)]),
            1
        );
    }
    let (sa, sb) = (a.with_extension("sos"), b.with_extension("sos"));
    assert_eq!(fs::read(&sa).unwrap(), fs::read(&sb).unwrap());
    assert_eq!(code(&["verify", s(&sa), "--game", s(&graph)]), 0);
    assert_eq!(
        code(&["verify", s(&sa), "--game", s(&graph), "--colors", "5"]),
        65
    );

    let text = fs::read_to_string(&sa).unwrap();
    let line = text.lines().find(|l| l.starts_with("sq ")).unwrap();
    let (w, rest) = line[3..].split_once(" | ").unwrap();
    let bad = dir.path().join("bad.sos");
    // same square, a different positive weight
    fs::write(&bad, text.replacen(line, &format!("sq 1{w} | {rest}"), 1)).unwrap();
    assert_eq!(code(&["verify", s(&bad)]), 65);

    // five colors: nothing found at degree one
    assert_eq!(
        code(&[
            "color",
            s(&graph),
            "--colors",
            "5",
            "--sos-degree",
            "1",
            "--out",
            s(&a)
        ]),
        2
    );
}

#[test]
fn strategy_prints_the_ghz_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "strategy",
        s(&games().join("ghz.game")),
        "--out",
        s(&dir.path().join("g")),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("witness dimension 8"));
    assert!(text.contains("basis xi, x0 xi, x1 xi, y0 xi, y1 xi, z0 xi, z1 xi, x0 x1 xi"));
    assert!(text.contains("x0 =\n  [0 1 0 0 0 0 0 0]\n  [1 0 0 0 0 0 0 0]"));
}
