#![allow(dead_code)]

use ncgame::gamealg::{
    encode_xor, parse_game, Clause, DeterminingSet, GameShape, GameSpec, Graph, LinEq,
};

pub fn games_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../games")
}

pub fn load(name: &str) -> GameSpec {
    let text = std::fs::read_to_string(games_dir().join(name)).unwrap();
    parse_game(&text).unwrap()
}

pub fn chsh() -> DeterminingSet {
    load("chsh.game").determining_set().unwrap()
}

pub fn ghz() -> DeterminingSet {
    load("ghz.game").determining_set().unwrap()
}

pub fn bipyramid() -> Graph {
    match load("bipyramid.graph") {
        GameSpec::Graph { graph, .. } => graph,
        _ => unreachable!(),
    }
}

pub fn xor2(clauses: &[([usize; 2], u32)]) -> DeterminingSet {
    let cs: Vec<Clause> = clauses.iter().map(|(q, s)| Clause::full(q, *s)).collect();
    encode_xor(GameShape::new(2, 2, 2).unwrap(), &cs).unwrap()
}

/// Brute force over all assignments in `Z_r^vars`.
pub fn linsys_solvable(r: u32, vars: usize, eqs: &[LinEq]) -> bool {
    let total = (r as usize).pow(vars as u32);
    (0..total).any(|mut code| {
        let mut x = vec![0u32; vars];
        for v in x.iter_mut() {
            *v = (code % r as usize) as u32;
            code /= r as usize;
        }
        eqs.iter()
            .all(|e| e.terms.iter().map(|&(t, d)| d * x[t]).sum::<u32>() % r == e.rhs)
    })
}

/// Classical satisfiability of a two-player XOR game with +-1 answers.
pub fn xor2_classical(clauses: &[([usize; 2], u32)]) -> bool {
    (0..16u32).any(|bits| {
        let x = [bits & 1, (bits >> 1) & 1];
        let y = [(bits >> 2) & 1, (bits >> 3) & 1];
        clauses.iter().all(|&([i, j], s)| (x[i] + y[j]) % 2 == s)
    })
}
