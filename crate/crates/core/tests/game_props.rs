//! Encoders: dialect conversion, XOR clauses written out by hand, and
//! agreement of the valid and invalid descriptions of small tables.

mod common;

use std::sync::Arc;

use ncgame::decide::{decide, DecideOptions};
use ncgame::freealg::{NCPoly, Word};
use ncgame::gamealg::{
    detset_from_table, encode_modr, encode_xor, Clause, DeterminingSet, Dialect, GameShape,
    GameTable, TableEntry, ToricClause, UniversalAlgebra, Which,
};
use ncgame::gbase;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape(p: usize, q: usize, a: usize) -> GameShape {
    GameShape::new(p, q, a).unwrap()
}

fn random_poly(ua: &UniversalAlgebra, terms: &[(Vec<usize>, i64)]) -> NCPoly {
    let n = ua.algebra.alphabet().len();
    let f = ua.algebra.field();
    NCPoly::from_terms(terms.iter().map(|(w, c)| {
        let letters: Vec<u16> = w.iter().map(|&l| (l % n) as u16).collect();
        (Word::from_letters(&letters), f.from_int(*c))
    }))
}

fn poly_terms() -> impl Strategy<Value = Vec<(Vec<usize>, i64)>> {
    prop::collection::vec((prop::collection::vec(0usize..64, 0..4), -4i64..5), 0..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dialect_roundtrip(t in poly_terms(), m in 2usize..4) {
        let s = shape(2, 2, m);
        let proj = UniversalAlgebra::new(s, Dialect::Projector).unwrap();
        let sig = UniversalAlgebra::new(s, Dialect::Signature).unwrap();
        let p = random_poly(&proj, &t);
        let back = proj.convert(&sig, &sig.convert(&proj, &p).unwrap()).unwrap();
        // equal modulo the projector relations
        let rs = gbase::complete(&proj.algebra, &proj.relations, 6).unwrap();
        prop_assert_eq!(rs.normal_form(&back), rs.normal_form(&p));
        let q = random_poly(&sig, &t);
        let back = sig.convert(&proj, &proj.convert(&sig, &q).unwrap()).unwrap();
        let rs = gbase::complete(&sig.algebra, &sig.relations, 6).unwrap();
        prop_assert_eq!(rs.normal_form(&back), rs.normal_form(&q));
    }

    #[test]
    fn xor_clauses_match_hand_encoding(cs in prop::collection::vec(((0usize..2, 0usize..2), 0u32..2), 0..6)) {
        let clauses: Vec<Clause> = cs.iter().map(|&((i, j), s)| Clause::full(&[i, j], s)).collect();
        let d = encode_xor(shape(2, 2, 2), &clauses).unwrap();
        let m = encode_modr(shape(2, 2, 2), 2, &clauses).unwrap();
        prop_assert_eq!(&d.elements, &m.elements);
        let a = d.algebra();
        let names = [["x0", "x1"], ["y0", "y1"]];
        for (e, &((i, j), s)) in d.elements.iter().zip(&cs) {
            let sign = if s == 1 { "-" } else { "" };
            let want = a.parse(&format!("{sign}{} {} - 1", names[0][i], names[1][j])).unwrap();
            prop_assert_eq!(e, &want);
        }
    }
}

#[test]
fn non_unit_clause_short_circuits() {
    let base = common::chsh();
    let f = base.algebra().field().clone();
    let mut clauses = base.toric.clone().unwrap();
    clauses[2] = ToricClause {
        beta: f.from_int(2),
        word: clauses[2].word.clone(),
    };
    let d = DeterminingSet::from_clauses(Arc::clone(&base.ua), clauses);
    let r = decide(&d, &DecideOptions::default()).unwrap();
    assert_eq!(r.verdict.name(), "no-perfect");
    assert!(r.basis.is_none());
}

fn subsets<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out = vec![vec![]];
    for it in items {
        let more: Vec<Vec<T>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut s = s.clone();
                s.push(it.clone());
                s
            })
            .collect();
        out.extend(more);
    }
    out
}

#[test]
fn valid_and_invalid_descriptions_agree() {
    let questions: Vec<Vec<usize>> = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
    let answers: Vec<Vec<usize>> = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
    let answer_sets = subsets(&answers, 4);
    // small budgets keep the sweep quick; both sides get the same ones
    let opts = DecideOptions {
        cap: 4,
        max_dim: 256,
        ..DecideOptions::default()
    };
    let mut checked = 0;
    for qs in subsets(&questions, 2) {
        let mut choices: Vec<Vec<TableEntry>> = vec![vec![]];
        for q in &qs {
            choices = choices
                .into_iter()
                .flat_map(|prefix| {
                    answer_sets.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(TableEntry {
                            question: q.clone(),
                            valid: v.clone(),
                        });
                        p
                    })
                })
                .collect();
        }
        if qs.len() == 2 {
            // a fixed sample of the 6 * 256 two-question tables
            let mut rng = ChaCha8Rng::seed_from_u64(qs.len() as u64 * 31 + qs[0][1] as u64);
            choices.shuffle(&mut rng);
            choices.truncate(24);
        }
        for entries in choices {
            let t = GameTable::new(shape(2, 2, 2), entries).unwrap();
            let valid = decide(&detset_from_table(&t, Which::Valid).unwrap(), &opts).unwrap();
            let invalid = decide(&detset_from_table(&t, Which::Invalid).unwrap(), &opts).unwrap();
            assert_eq!(valid.verdict.name(), invalid.verdict.name(), "{t:?}");
            checked += 1;
        }
    }
    assert_eq!(checked, 1 + 4 * 16 + 6 * 24);
}
