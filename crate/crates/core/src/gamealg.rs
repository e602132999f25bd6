//! Universal game algebras and encoders from game descriptions to
//! determining sets.
//!
//! Player indices are 0-based in the API. Variable names and game files
//! number players from 1 and questions and answers from 0, so `e1_q0_a1`
//! is the projector of player 1 answering 1 on question 0.
//!
//! Dialects:
//! * `Projector`: `e{p}_q{i}_a{a}`, idempotent, self-adjoint, orthogonal per
//!   question and summing to one.
//! * `Signature`: for two answers one symmetry per question (`x0, y1, ...`
//!   for at most three players, `x{p}_q{i}` otherwise); for more answers
//!   `x{p}_q{i}_a{a}` with `x = 2e - 1`.
//! * `CyclicUnitary`: `c{p}_q{i}`, unitary of order `m`. With two answers
//!   this is the signature dialect.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::cyclo::{lcm_order, CycloField, CycloScalar};
use crate::freealg::{
    AdjointRule, AlgebraError, Alphabet, FreeAlgebra, Letter, NCPoly, VarRole, Variable, Word,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("{0}")]
    Usage(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("table is not synchronous at question {question}: answers ({a}, {b}) {problem}")]
    NotSynchronous {
        question: usize,
        a: usize,
        b: usize,
        problem: &'static str,
    },
    #[error("table is not synchronous: diagonal question ({0}, {0}) is missing")]
    MissingDiagonal(usize),
    #[error("graph has a self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

fn usage<T>(msg: impl Into<String>) -> Result<T, GameError> {
    Err(GameError::Usage(msg.into()))
}

/// Players `k`, questions `n`, answers `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GameShape {
    pub players: usize,
    pub questions: usize,
    pub answers: usize,
}

impl GameShape {
    pub fn new(players: usize, questions: usize, answers: usize) -> Result<Self, GameError> {
        if players == 0 || questions == 0 || answers == 0 {
            return usage("shape entries must be positive");
        }
        if players * questions * answers > 4096 {
            return usage("shape too large");
        }
        Ok(GameShape {
            players,
            questions,
            answers,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dialect {
    Projector,
    Signature,
    CyclicUnitary,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Projector => "projector",
            Dialect::Signature => "signature",
            Dialect::CyclicUnitary => "cyclic",
        })
    }
}

impl std::str::FromStr for Dialect {
    type Err = GameError;
    fn from_str(s: &str) -> Result<Self, GameError> {
        match s {
            "projector" => Ok(Dialect::Projector),
            "signature" => Ok(Dialect::Signature),
            "cyclic" => Ok(Dialect::CyclicUnitary),
            _ => usage(format!("unknown dialect {s:?}")),
        }
    }
}

/// A free algebra together with the generators of the universal game ideal.
#[derive(Debug, Clone)]
pub struct UniversalAlgebra {
    pub shape: GameShape,
    pub dialect: Dialect,
    pub algebra: FreeAlgebra,
    pub relations: Vec<NCPoly>,
    letters: HashMap<(usize, usize, Option<usize>), Letter>,
}

const PLAYER_LETTERS: [&str; 3] = ["x", "y", "z"];

/// Field order used for a game with `m` answers and modulus `r`.
pub fn field_order(m: usize, r: usize) -> u32 {
    lcm_order(&[m as u32, r as u32, 4])
}

fn commutator(a: &FreeAlgebra, p: Letter, q: Letter) -> NCPoly {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    a.word(&[hi, lo]).sub(&a.word(&[lo, hi]))
}

impl UniversalAlgebra {
    /// Relations of the universal algebra in the requested dialect.
    pub fn new(shape: GameShape, dialect: Dialect) -> Result<Self, GameError> {
        Self::with_field_order(shape, dialect, field_order(shape.answers, 1))
    }

    pub fn with_field_order(
        shape: GameShape,
        dialect: Dialect,
        order: u32,
    ) -> Result<Self, GameError> {
        let m = shape.answers;
        let dialect = if dialect == Dialect::CyclicUnitary && m == 2 {
            Dialect::Signature
        } else {
            dialect
        };
        if !(order as usize).is_multiple_of(m) && dialect == Dialect::CyclicUnitary {
            return usage("field order must be a multiple of the answer count");
        }
        let field = CycloField::new(order).map_err(AlgebraError::from)?;
        let mut vars = Vec::new();
        let mut letters = HashMap::new();
        let single = dialect != Dialect::Projector && (m == 2 || dialect == Dialect::CyclicUnitary);
        for p in 0..shape.players {
            for q in 0..shape.questions {
                let answers: Vec<Option<usize>> = if single {
                    vec![None]
                } else {
                    (0..m).map(Some).collect()
                };
                for a in answers {
                    let name = match (dialect, a) {
                        (Dialect::Projector, Some(a)) => format!("e{}_q{q}_a{a}", p + 1),
                        (Dialect::Signature, None) if shape.players <= 3 => {
                            format!("{}{q}", PLAYER_LETTERS[p])
                        }
                        (Dialect::Signature, None) => format!("x{}_q{q}", p + 1),
                        (Dialect::Signature, Some(a)) => format!("x{}_q{q}_a{a}", p + 1),
                        (Dialect::CyclicUnitary, _) => format!("c{}_q{q}", p + 1),
                        (Dialect::Projector, None) => unreachable!(),
                    };
                    let adjoint = if dialect == Dialect::CyclicUnitary {
                        AdjointRule::Unitary(m as u32)
                    } else {
                        AdjointRule::SelfAdjoint
                    };
                    letters.insert((p, q, a), vars.len() as Letter);
                    vars.push(Variable::new(
                        name,
                        VarRole::Game {
                            player: p,
                            question: q,
                            label: a,
                        },
                        adjoint,
                    ));
                }
            }
        }
        let algebra = FreeAlgebra::new(Alphabet::new(vars)?, field);
        let mut ua = UniversalAlgebra {
            shape,
            dialect,
            algebra,
            relations: Vec::new(),
            letters,
        };
        ua.relations = ua.build_relations();
        Ok(ua)
    }

    fn build_relations(&self) -> Vec<NCPoly> {
        let a = &self.algebra;
        let s = self.shape;
        let m = s.answers;
        let mut rels = Vec::new();
        for p in 0..s.players {
            for q in 0..s.questions {
                match self.dialect {
                    Dialect::Projector => {
                        let es: Vec<Letter> =
                            (0..m).map(|x| self.letters[&(p, q, Some(x))]).collect();
                        for &e in &es {
                            rels.push(a.word(&[e, e]).sub(&a.letter(e)));
                        }
                        for &e in &es {
                            for &f in &es {
                                if e != f {
                                    rels.push(a.word(&[e, f]));
                                }
                            }
                        }
                        let sum = es
                            .iter()
                            .fold(NCPoly::zero(), |acc, &e| acc.add(&a.letter(e)));
                        rels.push(sum.sub(&a.one()));
                    }
                    Dialect::Signature if m == 2 => {
                        let x = self.letters[&(p, q, None)];
                        rels.push(a.word(&[x, x]).sub(&a.one()));
                    }
                    Dialect::Signature => {
                        let xs: Vec<Letter> =
                            (0..m).map(|x| self.letters[&(p, q, Some(x))]).collect();
                        for &x in &xs {
                            rels.push(a.word(&[x, x]).sub(&a.one()));
                        }
                        for &x in &xs {
                            for &y in &xs {
                                if x != y {
                                    let px = a.letter(x).add(&a.one());
                                    let py = a.letter(y).add(&a.one());
                                    rels.push(px.mul(&py));
                                }
                            }
                        }
                        let sum = xs
                            .iter()
                            .fold(NCPoly::zero(), |acc, &x| acc.add(&a.letter(x)));
                        rels.push(sum.add(&a.int(m as i64 - 2)));
                    }
                    Dialect::CyclicUnitary => {
                        let c = self.letters[&(p, q, None)];
                        rels.push(a.word(&vec![c; m]).sub(&a.one()));
                    }
                }
            }
        }
        let n = a.alphabet().len();
        for u in 0..n as Letter {
            for v in (u + 1)..n as Letter {
                if player_of(a, u) != player_of(a, v) {
                    rels.push(commutator(a, u, v));
                }
            }
        }
        rels
    }

    /// Letter of `(player, question)` or `(player, question, answer)`.
    pub fn letter(&self, player: usize, question: usize, answer: Option<usize>) -> Option<Letter> {
        self.letters.get(&(player, question, answer)).copied()
    }

    fn projector_letter(
        &self,
        player: usize,
        question: usize,
        answer: usize,
    ) -> Result<Letter, GameError> {
        self.letter(player, question, Some(answer)).ok_or_else(|| {
            GameError::Usage(format!("no projector for ({player}, {question}, {answer})"))
        })
    }

    /// Maps a polynomial of another dialect of the same shape into this one
    /// via `e = (1 + x) / 2` and `x = 2e - 1`.
    pub fn convert(&self, from: &UniversalAlgebra, p: &NCPoly) -> Result<NCPoly, GameError> {
        if from.shape != self.shape {
            return usage("dialect conversion needs equal shapes");
        }
        let a = &self.algebra;
        let m = self.shape.answers;
        let half = a
            .field()
            .rational(BigRational::new(BigInt::from(1), BigInt::from(2)));
        let mut images = Vec::new();
        for v in from.algebra.alphabet().vars() {
            let VarRole::Game {
                player,
                question,
                label,
            } = v.role
            else {
                return usage("marker variable in conversion");
            };
            let img = match (from.dialect, self.dialect) {
                (x, y) if x == y => a.letter(self.letter(player, question, label).unwrap()),
                (Dialect::Projector, Dialect::Signature) => {
                    let ans = label.unwrap();
                    if m == 2 {
                        let x = a.letter(self.letter(player, question, None).unwrap());
                        let x = if ans == 0 { x } else { x.neg() };
                        a.one().add(&x).scale(&half)
                    } else {
                        let x = a.letter(self.letter(player, question, Some(ans)).unwrap());
                        a.one().add(&x).scale(&half)
                    }
                }
                (Dialect::Signature, Dialect::Projector) => {
                    let e =
                        a.letter(self.projector_letter(player, question, label.unwrap_or(0))?);
                    e.scale(&a.field().from_int(2)).sub(&a.one())
                }
                _ => return usage("only projector and signature dialects convert"),
            };
            images.push(img);
        }
        Ok(substitute(p, &images))
    }
}

fn player_of(a: &FreeAlgebra, l: Letter) -> Option<usize> {
    match a.alphabet().var(l).role {
        VarRole::Game { player, .. } => Some(player),
        VarRole::Aux => None,
    }
}

/// Replaces every letter `l` of `p` by `images[l]`.
pub fn substitute(p: &NCPoly, images: &[NCPoly]) -> NCPoly {
    let mut out = NCPoly::zero();
    for (w, c) in p.terms() {
        let mut t = NCPoly::constant(c.clone());
        for &l in w.letters() {
            t = t.mul(&images[l as usize]);
        }
        out = out.add(&t);
    }
    out
}

/// A clause `beta * word` of a torically determined game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToricClause {
    pub beta: CycloScalar,
    pub word: Word,
}

impl ToricClause {
    pub fn element(&self) -> NCPoly {
        let f = self.beta.field();
        NCPoly::monomial(self.beta.clone(), self.word.clone()).sub(&NCPoly::constant(f.one()))
    }
}

/// Elements whose joint directional zeros are the perfect strategies.
#[derive(Debug, Clone)]
pub struct DeterminingSet {
    pub ua: Arc<UniversalAlgebra>,
    pub elements: Vec<NCPoly>,
    pub toric: Option<Vec<ToricClause>>,
}

impl DeterminingSet {
    pub fn from_clauses(ua: Arc<UniversalAlgebra>, clauses: Vec<ToricClause>) -> Self {
        let elements = clauses.iter().map(ToricClause::element).collect();
        DeterminingSet {
            ua,
            elements,
            toric: Some(clauses),
        }
    }

    pub fn algebra(&self) -> &FreeAlgebra {
        &self.ua.algebra
    }
}

/// A `{0,1}`-scored game with uniform distribution over its questions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameTable {
    pub shape: GameShape,
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub question: Vec<usize>,
    pub valid: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Valid,
    Invalid,
}

fn all_tuples(k: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..m).map(move |a| {
                    let mut t = t.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

impl GameTable {
    pub fn new(shape: GameShape, entries: Vec<TableEntry>) -> Result<Self, GameError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.question.len() != shape.players || e.question.iter().any(|&q| q >= shape.questions)
            {
                return usage(format!("question {:?} does not fit the shape", e.question));
            }
            if !seen.insert(e.question.clone()) {
                return usage(format!("question {:?} listed twice", e.question));
            }
            let mut vs = BTreeSet::new();
            for v in &e.valid {
                if v.len() != shape.players || v.iter().any(|&a| a >= shape.answers) {
                    return usage(format!("answer {v:?} does not fit the shape"));
                }
                if !vs.insert(v) {
                    return usage(format!("answer {v:?} listed twice"));
                }
            }
        }
        Ok(GameTable { shape, entries })
    }

    /// The complement of the valid answers, in lexicographic order.
    pub fn invalid(&self, e: &TableEntry) -> Vec<Vec<usize>> {
        all_tuples(self.shape.players, self.shape.answers)
            .into_iter()
            .filter(|t| !e.valid.contains(t))
            .collect()
    }

    fn product(
        &self,
        ua: &UniversalAlgebra,
        q: &[usize],
        a: &[usize],
    ) -> Result<NCPoly, GameError> {
        let mut letters = Vec::with_capacity(q.len());
        for (p, (&qi, &ai)) in q.iter().zip(a).enumerate() {
            letters.push(ua.projector_letter(p, qi, ai)?);
        }
        Ok(ua.algebra.word(&letters))
    }

    /// `Phi = (1/|Q|) sum_{i in Q} sum_{a valid} prod e`, in the projector
    /// dialect. Only used for display.
    pub fn game_polynomial(&self, ua: &UniversalAlgebra) -> Result<NCPoly, GameError> {
        let mut out = NCPoly::zero();
        for e in &self.entries {
            for v in &e.valid {
                out = out.add(&self.product(ua, &e.question, v)?);
            }
        }
        if self.entries.is_empty() {
            return Ok(out);
        }
        let w = BigRational::new(BigInt::from(1), BigInt::from(self.entries.len()));
        Ok(out.scale(&ua.algebra.field().rational(w)))
    }
}

/// Valid: `sum_{a valid} prod e - 1` per question. Invalid: one monomial per
/// invalid answer tuple.
pub fn detset_from_table(t: &GameTable, which: Which) -> Result<DeterminingSet, GameError> {
    let ua = Arc::new(UniversalAlgebra::new(t.shape, Dialect::Projector)?);
    let mut elements = Vec::new();
    for e in &t.entries {
        match which {
            Which::Valid => {
                let mut s = NCPoly::zero();
                for v in &e.valid {
                    s = s.add(&t.product(&ua, &e.question, v)?);
                }
                elements.push(s.sub(&ua.algebra.one()));
            }
            Which::Invalid => {
                for v in t.invalid(e) {
                    elements.push(t.product(&ua, &e.question, &v)?);
                }
            }
        }
    }
    Ok(DeterminingSet {
        ua,
        elements,
        toric: None,
    })
}

/// A clause `sum_p d_p y^(p)_{q_p} = rhs (mod r)`; players not listed have
/// coefficient zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    /// `(player, question, coefficient)`.
    pub factors: Vec<(usize, usize, u32)>,
    pub rhs: u32,
}

impl Clause {
    /// A clause where player `p` receives `questions[p]` with coefficient one.
    pub fn full(questions: &[usize], rhs: u32) -> Self {
        Clause {
            factors: questions
                .iter()
                .enumerate()
                .map(|(p, &q)| (p, q, 1))
                .collect(),
            rhs,
        }
    }
}

fn clause_word(ua: &UniversalAlgebra, c: &Clause, r: u32) -> Result<Word, GameError> {
    let mut factors = c.factors.clone();
    factors.sort_by_key(|f| f.0);
    if factors.windows(2).any(|w| w[0].0 == w[1].0) {
        return usage("a player appears twice in a clause");
    }
    let mut letters = Vec::new();
    for &(p, q, d) in &factors {
        if p >= ua.shape.players || q >= ua.shape.questions {
            return usage(format!("player {} question {q} out of range", p + 1));
        }
        if d >= r {
            return usage(format!("coefficient {d} out of range for modulus {r}"));
        }
        let l = ua.letter(p, q, None).unwrap();
        letters.extend(std::iter::repeat_n(l, d as usize));
    }
    Ok(Word::from_letters(&letters))
}

/// `zeta^s` with `zeta = exp(-2 pi i / r)`.
pub fn phase(field: &Arc<CycloField>, r: u32, s: u32) -> CycloScalar {
    let step = field.order() / r;
    field.zeta_pow(-((step * s) as i64))
}

/// Clauses `(-1)^s prod x - 1` in the signature dialect.
pub fn encode_xor(shape: GameShape, clauses: &[Clause]) -> Result<DeterminingSet, GameError> {
    if shape.answers != 2 {
        return usage("XOR games need exactly two answers");
    }
    encode_modr(shape, 2, clauses)
}

/// Clauses `zeta^s prod c^d - 1` in the cyclic unitary dialect of order `r`.
pub fn encode_modr(
    shape: GameShape,
    r: u32,
    clauses: &[Clause],
) -> Result<DeterminingSet, GameError> {
    if r < 2 || shape.answers != r as usize {
        return usage(format!(
            "modulus {r} must equal the answer count {}",
            shape.answers
        ));
    }
    let ua = Arc::new(UniversalAlgebra::with_field_order(
        shape,
        Dialect::CyclicUnitary,
        field_order(shape.answers, r as usize),
    )?);
    let field = ua.algebra.field().clone();
    let mut out = Vec::new();
    for c in clauses {
        if c.rhs >= r {
            return usage(format!(
                "right-hand side {} out of range for modulus {r}",
                c.rhs
            ));
        }
        out.push(ToricClause {
            beta: phase(&field, r, c.rhs),
            word: clause_word(&ua, c, r)?,
        });
    }
    Ok(DeterminingSet::from_clauses(ua, out))
}

/// One equation `sum d_t y_t = rhs (mod r)` of a linear system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinEq {
    pub terms: Vec<(usize, u32)>,
    pub rhs: u32,
}

/// Linear-systems game: Alice receives an equation, Bob a variable. Alice's
/// letters `a{j}_v{t}` exist for each variable of equation `j`; Bob's are
/// `b_v{t}`. All letters are unitary of order `r`.
pub fn encode_linsys(
    r: u32,
    num_vars: usize,
    equations: &[LinEq],
) -> Result<DeterminingSet, GameError> {
    if r < 2 {
        return usage("modulus must be at least 2");
    }
    if equations.is_empty() || num_vars == 0 {
        return usage("linear system needs equations and variables");
    }
    for (j, eq) in equations.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for &(t, d) in &eq.terms {
            if t >= num_vars {
                return usage(format!(
                    "equation {j} references variable {t} outside 0..{num_vars}"
                ));
            }
            if d >= r {
                return usage(format!("equation {j}: coefficient {d} out of range"));
            }
            if !seen.insert(t) {
                return usage(format!("equation {j} lists variable {t} twice"));
            }
        }
        if eq.rhs >= r {
            return usage(format!("equation {j}: right-hand side out of range"));
        }
    }
    let shape = GameShape::new(2, equations.len().max(num_vars), r as usize)?;
    let field = CycloField::new(field_order(r as usize, r as usize)).map_err(AlgebraError::from)?;
    let mut vars = Vec::new();
    let mut letters = HashMap::new();
    for (j, eq) in equations.iter().enumerate() {
        let mut ts: Vec<usize> = eq.terms.iter().map(|x| x.0).collect();
        ts.sort_unstable();
        for t in ts {
            letters.insert((0, j, Some(t)), vars.len() as Letter);
            vars.push(Variable::new(
                format!("a{j}_v{t}"),
                VarRole::Game {
                    player: 0,
                    question: j,
                    label: Some(t),
                },
                AdjointRule::Unitary(r),
            ));
        }
    }
    for t in 0..num_vars {
        letters.insert((1, t, None), vars.len() as Letter);
        vars.push(Variable::new(
            format!("b_v{t}"),
            VarRole::Game {
                player: 1,
                question: t,
                label: None,
            },
            AdjointRule::Unitary(r),
        ));
    }
    let algebra = FreeAlgebra::new(Alphabet::new(vars)?, field.clone());
    let a = &algebra;
    let n = a.alphabet().len() as Letter;
    let mut rels = Vec::new();
    for l in 0..n {
        rels.push(a.word(&vec![l; r as usize]).sub(&a.one()));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            let (pu, pv) = (player_of(a, u), player_of(a, v));
            let same_eq = matches!(
                (a.alphabet().var(u).role, a.alphabet().var(v).role),
                (VarRole::Game { player: 0, question: i, .. }, VarRole::Game { player: 0, question: j, .. }) if i == j
            );
            if pu != pv || same_eq {
                rels.push(commutator(a, u, v));
            }
        }
    }
    let ua = Arc::new(UniversalAlgebra {
        shape,
        dialect: Dialect::CyclicUnitary,
        algebra: algebra.clone(),
        relations: rels,
        letters,
    });
    let mut clauses = Vec::new();
    for (j, eq) in equations.iter().enumerate() {
        let mut terms = eq.terms.clone();
        terms.sort_unstable();
        let mut w = Vec::new();
        for (t, d) in terms {
            w.extend(std::iter::repeat_n(
                ua.letters[&(0, j, Some(t))],
                d as usize,
            ));
        }
        clauses.push(ToricClause {
            beta: phase(&field, r, eq.rhs),
            word: Word::from_letters(&w),
        });
    }
    for (j, eq) in equations.iter().enumerate() {
        let mut ts: Vec<usize> = eq.terms.iter().map(|x| x.0).collect();
        ts.sort_unstable();
        for t in ts {
            let mut w = vec![ua.letters[&(0, j, Some(t))]];
            w.extend(std::iter::repeat_n(
                ua.letters[&(1, t, None)],
                r as usize - 1,
            ));
            clauses.push(ToricClause {
                beta: field.one(),
                word: Word::from_letters(&w),
            });
        }
    }
    Ok(DeterminingSet::from_clauses(ua, clauses))
}

/// Output of [`encode_synchronous`].
#[derive(Debug, Clone)]
pub struct SynchronousEncoding {
    /// Symmetrized two-player determining set.
    pub two_player: DeterminingSet,
    /// The one-player algebra.
    pub one_player: Arc<UniversalAlgebra>,
    /// Two-sided ideal generators over the one-player algebra, excluding
    /// products that vanish there already.
    pub ideal: Vec<NCPoly>,
}

impl SynchronousEncoding {
    /// Universal relations of the one-player algebra followed by the ideal.
    pub fn generators(&self) -> Vec<NCPoly> {
        let mut g = self.one_player.relations.clone();
        g.extend(self.ideal.iter().cloned());
        g
    }
}

pub fn check_synchronous(t: &GameTable) -> Result<(), GameError> {
    if t.shape.players != 2 {
        return usage("synchronous games have two players");
    }
    for i in 0..t.shape.questions {
        let e = t
            .entries
            .iter()
            .find(|e| e.question == [i, i])
            .ok_or(GameError::MissingDiagonal(i))?;
        for a in 0..t.shape.answers {
            for b in 0..t.shape.answers {
                let ok = e.valid.contains(&vec![a, b]);
                if ok && a != b {
                    return Err(GameError::NotSynchronous {
                        question: i,
                        a,
                        b,
                        problem: "are accepted",
                    });
                }
                if !ok && a == b {
                    return Err(GameError::NotSynchronous {
                        question: i,
                        a,
                        b,
                        problem: "are rejected",
                    });
                }
            }
        }
    }
    Ok(())
}

pub fn encode_synchronous(t: &GameTable) -> Result<SynchronousEncoding, GameError> {
    check_synchronous(t)?;
    let s = t.shape;
    let two = Arc::new(UniversalAlgebra::new(s, Dialect::Projector)?);
    let one = Arc::new(UniversalAlgebra::new(
        GameShape::new(1, s.questions, s.answers)?,
        Dialect::Projector,
    )?);
    let mut elements = Vec::new();
    let mut ideal = Vec::new();
    for p in 0..2 {
        for e in &t.entries {
            for v in t.invalid(e) {
                let mut w = Vec::new();
                for (&q, &a) in e.question.iter().zip(&v) {
                    w.push(two.projector_letter(p, q, a)?);
                }
                elements.push(two.algebra.word(&w));
            }
        }
    }
    for q in 0..s.questions {
        for a in 0..s.answers {
            let e1 = two.algebra.letter(two.projector_letter(0, q, a)?);
            let e2 = two.algebra.letter(two.projector_letter(1, q, a)?);
            elements.push(e1.sub(&e2));
        }
    }
    for e in &t.entries {
        for v in t.invalid(e) {
            let (q0, q1, a0, a1) = (e.question[0], e.question[1], v[0], v[1]);
            if q0 == q1 && a0 != a1 {
                // already zero by orthogonality
                continue;
            }
            let w = [
                one.projector_letter(0, q0, a0)?,
                one.projector_letter(0, q1, a1)?,
            ];
            ideal.push(one.algebra.word(&w));
        }
    }
    Ok(SynchronousEncoding {
        two_player: DeterminingSet {
            ua: two,
            elements,
            toric: None,
        },
        one_player: one,
        ideal,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self, GameError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(GameError::SelfLoop(u));
            }
            if u >= vertices || v >= vertices {
                return usage(format!("edge ({u}, {v}) outside 0..{vertices}"));
            }
            if seen.insert((u.min(v), u.max(v))) {
                out.push((u, v));
            }
        }
        Ok(Graph {
            vertices,
            edges: out,
        })
    }

    /// The synchronous coloring game as a table.
    pub fn coloring_table(&self, colors: usize) -> Result<GameTable, GameError> {
        let shape = GameShape::new(2, self.vertices, colors)?;
        let mut entries = Vec::new();
        for v in 0..self.vertices {
            entries.push(TableEntry {
                question: vec![v, v],
                valid: (0..colors).map(|a| vec![a, a]).collect(),
            });
        }
        for &(u, v) in &self.edges {
            for (x, y) in [(u, v), (v, u)] {
                entries.push(TableEntry {
                    question: vec![x, y],
                    valid: all_tuples(2, colors)
                        .into_iter()
                        .filter(|t| t[0] != t[1])
                        .collect(),
                });
            }
        }
        GameTable::new(shape, entries)
    }
}

/// Quantum coloring ideal over the one-player algebra.
#[derive(Debug, Clone)]
pub struct ColoringIdeal {
    pub ua: Arc<UniversalAlgebra>,
    /// `e^u_a e^v_a` and `e^v_a e^u_a` for every edge and color.
    pub edge_terms: Vec<NCPoly>,
}

impl ColoringIdeal {
    pub fn generators(&self) -> Vec<NCPoly> {
        let mut g = self.ua.relations.clone();
        g.extend(self.edge_terms.iter().cloned());
        g
    }
}

pub fn encode_coloring(g: &Graph, colors: usize) -> Result<ColoringIdeal, GameError> {
    let ua = Arc::new(UniversalAlgebra::new(
        GameShape::new(1, g.vertices.max(1), colors)?,
        Dialect::Projector,
    )?);
    let mut edge_terms = Vec::new();
    for &(u, v) in &g.edges {
        if u == v {
            return Err(GameError::SelfLoop(u));
        }
        for a in 0..colors {
            let (eu, ev) = (ua.projector_letter(0, u, a)?, ua.projector_letter(0, v, a)?);
            edge_terms.push(ua.algebra.word(&[eu, ev]));
            edge_terms.push(ua.algebra.word(&[ev, eu]));
        }
    }
    Ok(ColoringIdeal { ua, edge_terms })
}

/// Bias-form game polynomial of an XOR game,
/// `1/2 + 1/(2T) sum (-1)^s prod x`. Only used for display.
pub fn xor_game_polynomial(shape: GameShape, clauses: &[Clause]) -> Result<NCPoly, GameError> {
    let d = encode_xor(shape, clauses)?;
    let a = d.algebra();
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mut out = NCPoly::constant(a.field().rational(half));
    if clauses.is_empty() {
        return Ok(out);
    }
    let w = a.field().rational(BigRational::new(
        BigInt::from(1),
        BigInt::from(2 * clauses.len()),
    ));
    for c in d.toric.as_ref().unwrap() {
        out = out.add(&NCPoly::monomial(&c.beta * &w, c.word.clone()));
    }
    Ok(out)
}

/// A parsed game file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GameSpec {
    Xor {
        shape: GameShape,
        clauses: Vec<Clause>,
    },
    ModR {
        shape: GameShape,
        r: u32,
        clauses: Vec<Clause>,
    },
    LinSys {
        r: u32,
        vars: usize,
        equations: Vec<LinEq>,
    },
    Table(GameTable),
    Graph {
        graph: Graph,
        colors: usize,
    },
}

impl GameSpec {
    /// The determining set of the game. Tables use the invalid-response set;
    /// graphs use their synchronous coloring game.
    pub fn determining_set(&self) -> Result<DeterminingSet, GameError> {
        match self {
            GameSpec::Xor { shape, clauses } => encode_xor(*shape, clauses),
            GameSpec::ModR { shape, r, clauses } => encode_modr(*shape, *r, clauses),
            GameSpec::LinSys { r, vars, equations } => encode_linsys(*r, *vars, equations),
            GameSpec::Table(t) => detset_from_table(t, Which::Invalid),
            GameSpec::Graph { graph, colors } => {
                Ok(encode_synchronous(&graph.coloring_table(*colors)?)?.two_player)
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let clause_text = |c: &Clause| {
            let fs: Vec<String> = c
                .factors
                .iter()
                .map(|&(p, q, d)| {
                    if d == 1 {
                        format!("{}:{q}", p + 1)
                    } else {
                        format!("{}:{q}*{d}", p + 1)
                    }
                })
                .collect();
            format!("clause {} = {}\n", fs.join(" "), c.rhs)
        };
        let shape_text =
            |s: &GameShape| format!("shape {} {} {}\n", s.players, s.questions, s.answers);
        match self {
            GameSpec::Xor { shape, clauses } => {
                out += &shape_text(shape);
                out += "xor\n";
                clauses.iter().for_each(|c| out += &clause_text(c));
            }
            GameSpec::ModR { shape, r, clauses } => {
                out += &shape_text(shape);
                out += &format!("modr {r}\n");
                clauses.iter().for_each(|c| out += &clause_text(c));
            }
            GameSpec::LinSys { r, vars, equations } => {
                out += &format!("linsys {r}\nvars {vars}\n");
                for e in equations {
                    let ts: Vec<String> = e
                        .terms
                        .iter()
                        .map(|&(t, d)| {
                            if d == 1 {
                                t.to_string()
                            } else {
                                format!("{t}*{d}")
                            }
                        })
                        .collect();
                    out += &format!("eq {} = {}\n", ts.join(" "), e.rhs);
                }
            }
            GameSpec::Table(t) => {
                out += &shape_text(&t.shape);
                out += "table\n";
                for e in &t.entries {
                    let q: Vec<String> = e.question.iter().map(|x| x.to_string()).collect();
                    let vs: Vec<String> = e
                        .valid
                        .iter()
                        .map(|v| {
                            v.iter()
                                .map(|x| x.to_string())
                                .collect::<Vec<_>>()
                                .join(" ")
                        })
                        .collect();
                    out += &format!("Q {} : {}\n", q.join(" "), vs.join(", "));
                }
            }
            GameSpec::Graph { graph, colors } => {
                out += &format!("graph {colors}\nvertices {}\n", graph.vertices);
                for (u, v) in &graph.edges {
                    out += &format!("edge {u} {v}\n");
                }
            }
        }
        out
    }
}

/// Parses the line-oriented game format. Blank lines and `#` comments are
/// ignored.
///
/// ```text
/// shape 2 2 2
/// xor
/// clause 1:0 2:0 = 0
/// ```
pub fn parse_game(text: &str) -> Result<GameSpec, GameError> {
    let mut shape: Option<GameShape> = None;
    let mut kind: Option<(usize, &str, Option<usize>)> = None;
    let mut clauses = Vec::new();
    let mut equations = Vec::new();
    let mut entries = Vec::new();
    let mut edges = Vec::new();
    let mut vertices: Option<usize> = None;
    let mut vars: Option<usize> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let l = raw.split('#').next().unwrap().trim();
        if l.is_empty() {
            continue;
        }
        let perr = |msg: String| GameError::Parse { line, msg };
        let num = |s: &str| -> Result<usize, GameError> {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v <= 1 << 20)
                .ok_or_else(|| perr(format!("expected a number, found {s:?}")))
        };
        let (key, rest) = crate::artifact::split_keyword(l);
        let toks: Vec<&str> = rest.split_whitespace().collect();
        match key {
            "shape" => {
                if shape.is_some() {
                    return Err(perr("duplicate shape line".into()));
                }
                if toks.len() != 3 {
                    return Err(perr("shape needs three numbers".into()));
                }
                let s = GameShape::new(num(toks[0])?, num(toks[1])?, num(toks[2])?)
                    .map_err(|e| perr(e.to_string()))?;
                shape = Some(s);
            }
            "xor" | "table" | "modr" | "linsys" | "graph" => {
                if kind.is_some() {
                    return Err(perr("game kind given twice".into()));
                }
                let arg = match (key, toks.as_slice()) {
                    ("xor" | "table", []) => None,
                    ("modr" | "linsys" | "graph", [a]) => Some(num(a)?),
                    _ => return Err(perr(format!("bad '{key}' line"))),
                };
                if matches!(key, "modr" | "linsys") && !(2..=64).contains(&arg.unwrap()) {
                    return Err(perr("modulus must lie in 2..=64".into()));
                }
                if key == "graph" && !(1..=64).contains(&arg.unwrap()) {
                    return Err(perr("color count must lie in 1..=64".into()));
                }
                kind = Some((line, key, arg));
            }
            "clause" => {
                let (lhs, rhs) = rest
                    .split_once('=')
                    .ok_or_else(|| perr("clause needs '='".into()))?;
                let mut factors = Vec::new();
                for f in lhs.split_whitespace() {
                    let (pq, d) = match f.split_once('*') {
                        Some((pq, d)) => (pq, num(d)? as u32),
                        None => (f, 1),
                    };
                    let (p, q) = pq
                        .split_once(':')
                        .ok_or_else(|| perr(format!("bad factor {f:?}")))?;
                    let p = num(p)?;
                    if p == 0 {
                        return Err(perr("players are numbered from 1".into()));
                    }
                    factors.push((p - 1, num(q)?, d));
                }
                clauses.push((
                    line,
                    Clause {
                        factors,
                        rhs: num(rhs.trim())? as u32,
                    },
                ));
            }
            "eq" => {
                let (lhs, rhs) = rest
                    .split_once('=')
                    .ok_or_else(|| perr("equation needs '='".into()))?;
                let mut terms = Vec::new();
                for f in lhs.split_whitespace() {
                    let (t, d) = match f.split_once('*') {
                        Some((t, d)) => (num(t)?, num(d)? as u32),
                        None => (num(f)?, 1),
                    };
                    terms.push((t, d));
                }
                equations.push(LinEq {
                    terms,
                    rhs: num(rhs.trim())? as u32,
                });
            }
            "vars" => {
                if toks.len() != 1 {
                    return Err(perr("vars needs one number".into()));
                }
                vars = Some(num(toks[0])?);
            }
            "Q" => {
                let (q, vs) = rest
                    .split_once(':')
                    .ok_or_else(|| perr("table line needs ':'".into()))?;
                let question = q
                    .split_whitespace()
                    .map(num)
                    .collect::<Result<Vec<_>, _>>()?;
                let mut valid = Vec::new();
                for v in vs.split(',') {
                    let t = v
                        .split_whitespace()
                        .map(num)
                        .collect::<Result<Vec<_>, _>>()?;
                    if !t.is_empty() {
                        valid.push(t);
                    }
                }
                entries.push((line, TableEntry { question, valid }));
            }
            "edge" => {
                if toks.len() != 2 {
                    return Err(perr("edge needs two vertices".into()));
                }
                edges.push((line, num(toks[0])?, num(toks[1])?));
            }
            "vertices" => {
                if toks.len() != 1 {
                    return Err(perr("vertices needs one number".into()));
                }
                vertices = Some(num(toks[0])?);
            }
            _ => return Err(perr(format!("unknown keyword {key:?}"))),
        }
    }
    let Some((kline, kind, arg)) = kind else {
        return Err(GameError::Parse {
            line: last_line.max(1),
            msg: "missing game kind (xor, modr, linsys, table or graph)".into(),
        });
    };
    let at = |line: usize| {
        move |e: GameError| GameError::Parse {
            line,
            msg: e.to_string(),
        }
    };
    let need_shape = || {
        shape.ok_or(GameError::Parse {
            line: kline,
            msg: "missing shape line".into(),
        })
    };
    let stray = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(GameError::Parse {
                line: kline,
                msg: format!("{what} lines do not belong to a {kind} game"),
            })
        }
    };
    stray(
        clauses.is_empty() || matches!(kind, "xor" | "modr"),
        "clause",
    )?;
    stray(
        equations.is_empty() && vars.is_none() || kind == "linsys",
        "eq/vars",
    )?;
    stray(entries.is_empty() || kind == "table", "Q")?;
    stray(
        edges.is_empty() && vertices.is_none() || kind == "graph",
        "edge/vertices",
    )?;
    let spec = match kind {
        "xor" | "modr" => {
            let shape = need_shape()?;
            let r = arg.unwrap_or(2) as u32;
            let mut cs = Vec::new();
            for (line, c) in clauses {
                // validate each clause where it was written
                let probe = if kind == "xor" {
                    encode_xor(shape, std::slice::from_ref(&c))
                } else {
                    encode_modr(shape, r, std::slice::from_ref(&c))
                };
                probe.map_err(at(line))?;
                cs.push(c);
            }
            if kind == "xor" {
                GameSpec::Xor { shape, clauses: cs }
            } else {
                encode_modr(shape, r, &[]).map_err(at(kline))?;
                GameSpec::ModR {
                    shape,
                    r,
                    clauses: cs,
                }
            }
        }
        "linsys" => {
            let r = arg.unwrap() as u32;
            let inferred = equations
                .iter()
                .flat_map(|e| e.terms.iter().map(|t| t.0 + 1))
                .max()
                .unwrap_or(0);
            let vars = vars.unwrap_or(inferred);
            encode_linsys(r, vars, &equations).map_err(at(kline))?;
            GameSpec::LinSys { r, vars, equations }
        }
        "table" => {
            let shape = need_shape()?;
            let mut es = Vec::new();
            for (line, e) in entries {
                GameTable::new(shape, vec![e.clone()]).map_err(at(line))?;
                es.push(e);
            }
            GameSpec::Table(GameTable::new(shape, es).map_err(at(kline))?)
        }
        "graph" => {
            let n = vertices
                .unwrap_or_else(|| edges.iter().map(|e| e.1.max(e.2) + 1).max().unwrap_or(1));
            for &(line, u, v) in &edges {
                Graph::new(n, vec![(u, v)]).map_err(at(line))?;
            }
            let graph = Graph::new(n, edges.into_iter().map(|e| (e.1, e.2)).collect())
                .map_err(at(kline))?;
            GameSpec::Graph {
                graph,
                colors: arg.unwrap(),
            }
        }
        _ => unreachable!(),
    };
    Ok(spec)
}
