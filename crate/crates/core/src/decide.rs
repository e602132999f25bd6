//! Decision engine: perfect strategy, certificate of impossibility, or an
//! honest "unknown" at the degree cap.
//!
//! A verdict is only `Perfect` when it carries a strategy that passed exact
//! verification, or when the game is torically determined with unit-modulus
//! clauses and the marker basis is complete without containing `xi`.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::cyclo::CycloScalar;
use crate::freealg::{AdjointRule, FreeAlgebra, Letter, NCPoly, Word};
use crate::gamealg::{DeterminingSet, ToricClause};
use crate::gbase::{
    self, member_mixed, AugmentedInput, CompleteOptions, GbError, Membership, RewriteSystem,
};
use crate::gns::{self, SparseMatrix, Strategy};
use crate::soscert::{self, SosCertificate, SosError, SosOptions, SosOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecideError {
    #[error(transparent)]
    Gb(#[from] GbError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy)]
pub struct DecideOptions {
    pub cap: usize,
    pub max_dim: usize,
    /// Record a derivation trace so the basis can be re-checked offline.
    pub trace: bool,
    /// Node budget of the one-dimensional strategy search.
    pub classical_budget: usize,
    /// Rule budget of the completion; exhausting it gives `Unknown`.
    pub max_rules: Option<usize>,
}

pub const DEFAULT_CAP: usize = 6;
pub const DEFAULT_SUBGROUP_LEN: usize = 8;
pub const DEFAULT_MAX_RULES: usize = 5_000;

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            cap: DEFAULT_CAP,
            max_dim: gns::DEFAULT_MAX_DIM,
            trace: false,
            classical_budget: 200_000,
            max_rules: Some(DEFAULT_MAX_RULES),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Witness {
    /// A verified finite-dimensional strategy.
    Finite(Strategy),
    /// Existence follows from a complete basis without `xi`; the quotient
    /// was too large to write down.
    Abstract,
}

#[derive(Debug, Clone)]
pub enum Certificate {
    /// The marker basis reduces `xi` to zero.
    MarkerInBasis,
    /// Clause `index` has a scalar of modulus other than one.
    NonUnitClause { index: usize },
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Perfect(Witness),
    NoPerfect(Certificate),
    Unknown { cap: usize },
}

impl Verdict {
    /// Process exit code: 0 perfect, 1 not perfect, 2 unknown.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Perfect(_) => 0,
            Verdict::NoPerfect(_) => 1,
            Verdict::Unknown { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Perfect(_) => "perfect",
            Verdict::NoPerfect(_) => "no-perfect",
            Verdict::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decision {
    pub verdict: Verdict,
    /// The marker basis, when one was computed.
    pub basis: Option<RewriteSystem>,
    pub notes: Vec<String>,
}

impl Decision {
    /// A short text report.
    pub fn report(&self) -> String {
        let mut out = format!("verdict {}\n", self.verdict.name());
        match &self.verdict {
            Verdict::Perfect(Witness::Finite(s)) => {
                out += &format!("witness dimension {}\n", s.dim)
            }
            Verdict::Perfect(Witness::Abstract) => {
                out += "witness abstract (complete basis without xi)\n"
            }
            Verdict::NoPerfect(Certificate::MarkerInBasis) => {
                out += "certificate xi reduces to 0\n"
            }
            Verdict::NoPerfect(Certificate::NonUnitClause { index }) => {
                out += &format!("certificate clause {index} has a scalar of modulus other than 1\n")
            }
            Verdict::Unknown { cap } => out += &format!("cap {cap} reached\n"),
        }
        if let Some(b) = &self.basis {
            out += &format!(
                "basis {} rules, {}, cap {}\n",
                b.rules().len(),
                b.status(),
                b.cap()
            );
        }
        for n in &self.notes {
            out += &format!("note {n}\n");
        }
        out
    }
}

/// Decides whether the game behind `d` has a perfect commuting-operator
/// strategy.
pub fn decide(d: &DeterminingSet, opts: &DecideOptions) -> Result<Decision, DecideError> {
    let mut notes = Vec::new();
    if let Some(cs) = &d.toric {
        if let Some(index) = cs.iter().position(|c| !c.beta.norm_squared().is_one()) {
            return Ok(Decision {
                verdict: Verdict::NoPerfect(Certificate::NonUnitClause { index }),
                basis: None,
                notes,
            });
        }
    }
    let inp = AugmentedInput {
        algebra: d.algebra().clone(),
        two_sided: d.ua.relations.clone(),
        left: d.elements.clone(),
    };
    let rs = inp.complete(
        opts.cap,
        CompleteOptions {
            trace: opts.trace,
            max_rules: opts.max_rules,
        },
    )?;
    let one = d.algebra().one();
    let membership = member_mixed(&rs, &one)?;
    if membership == Membership::Yes {
        return Ok(Decision {
            verdict: Verdict::NoPerfect(Certificate::MarkerInBasis),
            basis: Some(rs),
            notes,
        });
    }
    if membership == Membership::No {
        match gns::build(&rs, opts.max_dim) {
            Ok(module) => {
                let s = gns::matrices(&module, &rs);
                let v = gns::verify(&s, d);
                if v.passed() {
                    return Ok(Decision {
                        verdict: Verdict::Perfect(Witness::Finite(s)),
                        basis: Some(rs),
                        notes,
                    });
                }
                notes.push(format!(
                    "quotient of dimension {} is not a valid strategy with orthonormal words: {}",
                    s.dim, v.failures[0]
                ));
            }
            Err(e) => notes.push(format!("no finite quotient: {e}")),
        }
    } else {
        notes.push(format!("completion truncated at degree {}", rs.cap()));
    }
    if let Some(s) = classical_strategy(
        d.algebra(),
        &d.ua.relations,
        &d.elements,
        opts.classical_budget,
    ) {
        if gns::verify(&s, d).passed() {
            notes.push("one-dimensional strategy found".into());
            return Ok(Decision {
                verdict: Verdict::Perfect(Witness::Finite(s)),
                basis: Some(rs),
                notes,
            });
        }
    }
    let verdict = if membership == Membership::No && d.toric.is_some() {
        Verdict::Perfect(Witness::Abstract)
    } else {
        Verdict::Unknown { cap: rs.cap() }
    };
    Ok(Decision {
        verdict,
        basis: Some(rs),
        notes,
    })
}

fn candidates(algebra: &FreeAlgebra, l: Letter) -> Vec<CycloScalar> {
    let f = algebra.field();
    match algebra.alphabet().var(l).adjoint {
        AdjointRule::SelfAdjoint => vec![f.zero(), f.one(), f.from_int(-1)],
        AdjointRule::Unitary(m) => {
            if !f.order().is_multiple_of(m) {
                return vec![];
            }
            let step = (f.order() / m) as i64;
            (0..m as i64).map(|k| f.zeta_pow(k * step)).collect()
        }
    }
}

fn eval(p: &NCPoly, values: &[CycloScalar]) -> CycloScalar {
    let f = values[0].field().clone();
    let mut acc = f.zero();
    for (w, c) in p.terms() {
        let mut t = c.clone();
        for &l in w.letters() {
            t = &t * &values[l as usize];
        }
        acc = &acc + &t;
    }
    acc
}

/// Searches for a one-dimensional representation annihilating every
/// element, by backtracking over scalar values of the generators.
pub fn classical_strategy(
    algebra: &FreeAlgebra,
    relations: &[NCPoly],
    elements: &[NCPoly],
    budget: usize,
) -> Option<Strategy> {
    let n = algebra.alphabet().len();
    if n == 0 {
        return None;
    }
    let cands: Vec<Vec<CycloScalar>> = (0..n as Letter).map(|l| candidates(algebra, l)).collect();
    // constraints grouped by the last letter they mention
    let mut by_last: Vec<Vec<&NCPoly>> = vec![Vec::new(); n];
    let mut constant_fail = false;
    for p in relations.iter().chain(elements) {
        match p.max_letter() {
            Some(l) => by_last[l as usize].push(p),
            None => constant_fail |= !p.is_zero(),
        }
    }
    if constant_fail {
        return None;
    }
    let mut values = vec![algebra.field().zero(); n];
    let mut choice = vec![0usize; n];
    let mut depth = 0usize;
    let mut nodes = 0usize;
    loop {
        if depth == n {
            break;
        }
        if choice[depth] >= cands[depth].len() {
            if depth == 0 {
                return None;
            }
            choice[depth] = 0;
            depth -= 1;
            choice[depth] += 1;
            continue;
        }
        nodes += 1;
        if nodes > budget {
            return None;
        }
        values[depth] = cands[depth][choice[depth]].clone();
        if by_last[depth].iter().all(|p| eval(p, &values).is_zero()) {
            depth += 1;
        } else {
            choice[depth] += 1;
        }
    }
    let matrices = values
        .iter()
        .map(|v| {
            let mut m = SparseMatrix::zero(1);
            if !v.is_zero() {
                m.cols[0].insert(0, v.clone());
            }
            m
        })
        .collect();
    Some(Strategy {
        algebra: algebra.clone(),
        dim: 1,
        matrices,
        state: 0,
        basis_names: vec!["classical".into()],
    })
}

/// Clause group data for the subgroup search.
pub struct SubgroupQuery<'a> {
    pub clauses: &'a [ToricClause],
    /// A complete rewriting system for the universal relations.
    pub relations: &'a RewriteSystem,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubgroupResult {
    /// `phase = prod h_i^{+-1}`; `inverse` marks adjoint factors.
    PhaseFound {
        phase: CycloScalar,
        product: Vec<(usize, bool)>,
    },
    NoneFound,
}

/// Breadth-first search over products of clause elements and their
/// inverses, up to `max_len` factors, for a nontrivial scalar.
pub fn subgroup_check(
    q: &SubgroupQuery<'_>,
    max_len: usize,
) -> Result<SubgroupResult, DecideError> {
    if !q.relations.is_complete() {
        return Err(DecideError::Usage(
            "universal relations must be completed first".into(),
        ));
    }
    let a = q.relations.algebra();
    let f = a.field().clone();
    let mut gens: Vec<(CycloScalar, Word, usize, bool)> = Vec::new();
    for (i, c) in q.clauses.iter().enumerate() {
        if !c.beta.norm_squared().is_one() {
            return Err(DecideError::Usage(format!(
                "clause {i} has a scalar of modulus other than 1"
            )));
        }
        gens.push((c.beta.clone(), c.word.clone(), i, false));
        gens.push((c.beta.conj(), a.adjoint_word(&c.word), i, true));
    }
    type Node = (CycloScalar, Word, Vec<(usize, bool)>);
    let key = |c: &CycloScalar, w: &Word| (format!("{c}"), w.clone());
    let mut seen: HashSet<(String, Word)> = HashSet::new();
    let start: Node = (f.one(), Word::one(), vec![]);
    seen.insert(key(&start.0, &start.1));
    let mut frontier: VecDeque<Node> = VecDeque::from([start]);
    for _ in 0..max_len {
        let mut next = VecDeque::new();
        while let Some((c, w, path)) = frontier.pop_front() {
            for (beta, g, i, inv) in &gens {
                let nf = q
                    .relations
                    .normal_form(&NCPoly::monomial(&c * beta, w.concat(g)));
                let [(w2, c2)] = nf.terms() else {
                    return Err(DecideError::Usage(
                        "relations do not map group words to monomials".into(),
                    ));
                };
                let mut p2 = path.clone();
                p2.push((*i, *inv));
                if w2.is_empty() && !c2.is_one() {
                    return Ok(SubgroupResult::PhaseFound {
                        phase: c2.clone(),
                        product: p2,
                    });
                }
                if seen.insert(key(c2, w2)) {
                    next.push_back((c2.clone(), w2.clone(), p2));
                }
            }
        }
        frontier = next;
    }
    Ok(SubgroupResult::NoneFound)
}

/// Outcome of the synchronous sum-of-squares test.
#[derive(Debug, Clone)]
pub enum SyncOutcome {
    /// `-1` is a sum of squares modulo the ideal, checked exactly: no perfect
    /// strategy (for coloring ideals: no quantum coloring).
    NoPerfect(Box<SosCertificate>),
    /// Nothing found at this degree. Never read as a perfect strategy.
    Inconclusive(String),
}

impl SyncOutcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            SyncOutcome::NoPerfect(_) => 1,
            SyncOutcome::Inconclusive(_) => 2,
        }
    }
}

/// Looks for a certificate `1 + sum c_j s_j* s_j ∈ I` of degree `2 degree`
/// for the two-sided ideal generated by `generators`.
pub fn decide_synchronous_nocolor(
    algebra: &FreeAlgebra,
    generators: &[NCPoly],
    degree: usize,
    cap: usize,
) -> Result<SyncOutcome, SosError> {
    let opts = SosOptions {
        degree,
        cap,
        ..SosOptions::default()
    };
    decide_synchronous_with(algebra, generators, &opts)
}

pub fn decide_synchronous_with(
    algebra: &FreeAlgebra,
    generators: &[NCPoly],
    opts: &SosOptions,
) -> Result<SyncOutcome, SosError> {
    Ok(match soscert::search(algebra, generators, opts)? {
        // search only returns certificates that passed check_certificate
        SosOutcome::Certificate(c) => SyncOutcome::NoPerfect(c),
        SosOutcome::Inconclusive(why) => SyncOutcome::Inconclusive(why),
    })
}

/// Completes the universal relations of `d` on their own.
pub fn universal_basis(d: &DeterminingSet, cap: usize) -> Result<RewriteSystem, DecideError> {
    Ok(gbase::complete(d.algebra(), &d.ua.relations, cap)?)
}

/// Groups letters by player for display of strategies.
pub fn letters_by_player(a: &FreeAlgebra) -> HashMap<usize, Vec<Letter>> {
    let mut out: HashMap<usize, Vec<Letter>> = HashMap::new();
    for (l, v) in a.alphabet().vars().iter().enumerate() {
        if let crate::freealg::VarRole::Game { player, .. } = v.role {
            out.entry(player).or_default().push(l as Letter);
        }
    }
    out
}
