//! Finite-dimensional strategies from a complete marker basis.
//!
//! The quotient module is spanned by the normal words `w xi`. Generators act
//! by left multiplication followed by reduction; declaring the basis words
//! orthonormal turns those actions into matrices, which are then checked
//! exactly against the relations and the determining set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::artifact::{
    parse_poly_at, parse_scalar_at, read_header, write_header, ArtifactError, Lines,
};
use crate::cyclo::CycloScalar;
use crate::freealg::{AdjointRule, FreeAlgebra, Letter, NCPoly, Word};
use crate::gamealg::DeterminingSet;
use crate::gbase::RewriteSystem;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GnsError {
    #[error("the basis is truncated; its quotient is not known")]
    Truncated,
    #[error("the basis has no marker variable")]
    NoMarker,
    #[error("the marker reduces to zero, so the module is zero")]
    ZeroModule,
    #[error("quotient is infinite or larger than {0}")]
    InfiniteOrTooLarge(usize),
}

/// Normal words ending in the marker, the marker first and then ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientModule {
    pub basis: Vec<Word>,
}

impl QuotientModule {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }
}

pub const DEFAULT_MAX_DIM: usize = 4096;

/// Breadth-first closure of `{xi}` under left multiplication by generators.
pub fn build(rs: &RewriteSystem, max_dim: usize) -> Result<QuotientModule, GnsError> {
    if !rs.is_complete() {
        return Err(GnsError::Truncated);
    }
    let al = rs.algebra().alphabet();
    let xi = al.aux().ok_or(GnsError::NoMarker)?;
    let start = Word::letter(xi);
    if !rs.is_normal(&start) {
        return Err(GnsError::ZeroModule);
    }
    let gens: Vec<Letter> = al.generators().collect();
    let mut seen: BTreeSet<Word> = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(w) = queue.pop_front() {
        for &g in &gens {
            let image = rs.normal_form(&rs.algebra().word(&[g]).sandwich(&[], w.letters()));
            for (v, _) in image.terms() {
                if seen.insert(v.clone()) {
                    if seen.len() > max_dim {
                        return Err(GnsError::InfiniteOrTooLarge(max_dim));
                    }
                    queue.push_back(v.clone());
                }
            }
        }
    }
    Ok(QuotientModule {
        basis: seen.into_iter().collect(),
    })
}

/// Sparse vector: index to nonzero coefficient.
pub type SparseVec = BTreeMap<usize, CycloScalar>;

fn axpy(acc: &mut SparseVec, c: &CycloScalar, v: &SparseVec) {
    for (&i, x) in v {
        let t = c * x;
        match acc.get_mut(&i) {
            Some(y) => {
                *y = &*y + &t;
                if y.is_zero() {
                    acc.remove(&i);
                }
            }
            None => {
                if !t.is_zero() {
                    acc.insert(i, t);
                }
            }
        }
    }
}

/// Column-major sparse square matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub cols: Vec<SparseVec>,
}

impl SparseMatrix {
    pub fn zero(dim: usize) -> Self {
        SparseMatrix {
            dim,
            cols: vec![SparseVec::new(); dim],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Option<&CycloScalar> {
        self.cols[c].get(&r)
    }

    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (&j, x) in v {
            axpy(&mut out, x, &self.cols[j]);
        }
        out
    }

    pub fn conj_transpose(&self) -> SparseMatrix {
        let mut t = SparseMatrix::zero(self.dim);
        for (c, col) in self.cols.iter().enumerate() {
            for (&r, x) in col {
                t.cols[r].insert(c, x.conj());
            }
        }
        t
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    /// Dense rows of rational entries, when every entry is rational.
    pub fn to_dense_rational(&self) -> Option<Vec<Vec<num_rational::BigRational>>> {
        use num_traits::Zero;
        let mut m = vec![vec![num_rational::BigRational::zero(); self.dim]; self.dim];
        for (c, col) in self.cols.iter().enumerate() {
            for (&r, x) in col {
                m[r][c] = x.as_rational()?.clone();
            }
        }
        Some(m)
    }
}

/// Generator matrices and a state vector (a basis index).
#[derive(Debug, Clone)]
pub struct Strategy {
    /// Marker-free algebra whose letters index `matrices`.
    pub algebra: FreeAlgebra,
    pub dim: usize,
    pub matrices: Vec<SparseMatrix>,
    pub state: usize,
    /// Display names of the basis vectors.
    pub basis_names: Vec<String>,
}

impl Strategy {
    /// `pi(p) v`.
    pub fn act(&self, p: &NCPoly, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (w, c) in p.terms() {
            let mut x = v.clone();
            for &l in w.letters().iter().rev() {
                x = self.matrices[l as usize].apply(&x);
                if x.is_empty() {
                    break;
                }
            }
            axpy(&mut out, c, &x);
        }
        out
    }

    pub fn state_vector(&self) -> SparseVec {
        SparseVec::from([(self.state, self.algebra.field().one())])
    }

    pub fn basis_vector(&self, i: usize) -> SparseVec {
        SparseVec::from([(i, self.algebra.field().one())])
    }
}

/// Entry `(r, c)` of generator `g` is the coefficient of basis word `r` in
/// `NF(g * basis[c])`.
pub fn matrices(module: &QuotientModule, rs: &RewriteSystem) -> Strategy {
    let full = rs.algebra();
    let al = full.alphabet();
    let xi = al.aux().expect("marker basis");
    let vars: Vec<_> = al.vars()[..xi as usize].to_vec();
    let algebra = FreeAlgebra::new(
        crate::freealg::Alphabet::new(vars).expect("prefix of a valid alphabet"),
        full.field().clone(),
    );
    let index: BTreeMap<&Word, usize> = module
        .basis
        .iter()
        .enumerate()
        .map(|(i, w)| (w, i))
        .collect();
    let dim = module.basis.len();
    let mut mats = Vec::new();
    for g in al.generators() {
        let mut m = SparseMatrix::zero(dim);
        for (c, w) in module.basis.iter().enumerate() {
            let image = rs.normal_form(&full.word(&[g]).sandwich(&[], w.letters()));
            for (v, x) in image.terms() {
                m.cols[c].insert(index[v], x.clone());
            }
        }
        mats.push(m);
    }
    Strategy {
        algebra,
        dim,
        matrices: mats,
        state: 0,
        basis_names: module.basis.iter().map(|w| al.word_to_string(w)).collect(),
    }
}

/// Result of [`verify`]; failures are data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verification {
    pub failures: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks relations as matrix identities, adjoint compatibility of every
/// generator, and that every element annihilates the state. Letters are
/// matched by name.
pub fn verify(s: &Strategy, d: &DeterminingSet) -> Verification {
    verify_parts(s, d.algebra(), &d.ua.relations, &d.elements)
}

pub fn verify_parts(
    s: &Strategy,
    algebra: &FreeAlgebra,
    relations: &[NCPoly],
    elements: &[NCPoly],
) -> Verification {
    let mut v = Verification::default();
    if s.dim == 0 {
        v.failures.push("zero-dimensional strategy".into());
        return v;
    }
    if s.state >= s.dim {
        v.failures.push("state index out of range".into());
        return v;
    }
    if algebra.field().order() != s.algebra.field().order() {
        v.failures.push("coefficient fields differ".into());
        return v;
    }
    let mut map = Vec::new();
    for var in algebra.alphabet().vars() {
        match s.algebra.alphabet().lookup(&var.name) {
            Some(l) => map.push(l),
            None => {
                v.failures
                    .push(format!("strategy has no matrix for {}", var.name));
                return v;
            }
        }
    }
    for (l, var) in s.algebra.alphabet().vars().iter().enumerate() {
        let m = &s.matrices[l];
        let h = m.conj_transpose();
        let ok = match var.adjoint {
            AdjointRule::SelfAdjoint => &h == m,
            AdjointRule::Unitary(_) => {
                (0..s.dim).all(|j| h.apply(&m.apply(&s.basis_vector(j))) == s.basis_vector(j))
            }
        };
        if !ok {
            v.failures.push(format!(
                "matrix of {} is not compatible with its adjoint",
                var.name
            ));
        }
    }
    for r in relations {
        let mapped = r.relabel(&map);
        if (0..s.dim).any(|j| !s.act(&mapped, &s.basis_vector(j)).is_empty()) {
            v.failures
                .push(format!("relation {} fails", algebra.format(r)));
        }
    }
    let psi = s.state_vector();
    for e in elements {
        let x = s.act(&e.relabel(&map), &psi);
        if !x.is_empty() {
            v.failures.push(format!(
                "element {} does not annihilate the state",
                algebra.format(e)
            ));
        }
    }
    v
}

const WITNESS_KIND: &str = "witness";

/// Renders a strategy together with the relations and elements it solves.
pub fn export_witness(s: &Strategy, relations: &[NCPoly], elements: &[NCPoly]) -> String {
    let a = &s.algebra;
    let mut out = String::new();
    write_header(&mut out, WITNESS_KIND, a);
    let _ = writeln!(out, "dim {}", s.dim);
    for b in &s.basis_names {
        let _ = writeln!(out, "basis {b}");
    }
    let _ = writeln!(out, "state {}", s.state);
    let _ = writeln!(out, "relations {}", relations.len());
    for r in relations {
        let _ = writeln!(out, "relation {}", a.format(r));
    }
    let _ = writeln!(out, "elements {}", elements.len());
    for e in elements {
        let _ = writeln!(out, "element {}", a.format(e));
    }
    for (l, m) in s.matrices.iter().enumerate() {
        let _ = writeln!(
            out,
            "matrix {} {}",
            a.alphabet().var(l as Letter).name,
            m.nnz()
        );
        for (c, col) in m.cols.iter().enumerate() {
            for (r, x) in col {
                let _ = writeln!(out, "m {r} {c} {x}");
            }
        }
    }
    out
}

/// A parsed witness file.
#[derive(Debug, Clone)]
pub struct WitnessFile {
    pub strategy: Strategy,
    pub relations: Vec<NCPoly>,
    pub elements: Vec<NCPoly>,
}

impl WitnessFile {
    pub fn verify(&self) -> Verification {
        verify_parts(
            &self.strategy,
            &self.strategy.algebra,
            &self.relations,
            &self.elements,
        )
    }
}

pub const MAX_WITNESS_DIM: usize = 1 << 16;

pub fn parse_witness(text: &str) -> Result<WitnessFile, ArtifactError> {
    let mut lines = Lines::new(text);
    let algebra = read_header(&mut lines, WITNESS_KIND)?;
    if algebra.alphabet().aux().is_some() {
        return Err(lines.err("witness alphabet must not contain the marker"));
    }
    let dim = lines.expect_count("dim")?;
    if dim == 0 || dim > MAX_WITNESS_DIM {
        return Err(lines.err("dimension out of range"));
    }
    let mut basis_names = Vec::new();
    while lines.peek_keyword() == Some("basis") {
        basis_names.push(lines.expect("basis")?.to_string());
    }
    if !basis_names.is_empty() && basis_names.len() != dim {
        return Err(lines.err("basis name count differs from the dimension"));
    }
    let state = lines.expect_count("state")?;
    if state >= dim {
        return Err(lines.err("state index out of range"));
    }
    let nr = lines.expect_count("relations")?;
    let mut relations = Vec::with_capacity(nr.min(4096));
    for _ in 0..nr {
        let t = lines.expect("relation")?;
        relations.push(parse_poly_at(&lines, &algebra, t)?);
    }
    let ne = lines.expect_count("elements")?;
    let mut elements = Vec::with_capacity(ne.min(4096));
    for _ in 0..ne {
        let t = lines.expect("element")?;
        elements.push(parse_poly_at(&lines, &algebra, t)?);
    }
    let mut matrices = Vec::new();
    for var in algebra.alphabet().vars() {
        let rest = lines.expect("matrix")?;
        let (name, nnz) = crate::artifact::split_keyword(rest);
        if name != var.name {
            return Err(lines.err(format!("expected matrix {}, found {name}", var.name)));
        }
        let nnz = lines.count(nnz)?;
        let mut m = SparseMatrix::zero(dim);
        for _ in 0..nnz {
            let rest = lines.expect("m")?;
            let mut it = rest.splitn(3, char::is_whitespace);
            let (r, c, x) = match (it.next(), it.next(), it.next()) {
                (Some(r), Some(c), Some(x)) => (lines.count(r)?, lines.count(c)?, x),
                _ => return Err(lines.err("bad matrix entry")),
            };
            if r >= dim || c >= dim {
                return Err(lines.err("matrix entry out of range"));
            }
            let x = parse_scalar_at(&lines, &algebra, x)?;
            if x.is_zero() || m.cols[c].insert(r, x).is_some() {
                return Err(lines.err("zero or repeated matrix entry"));
            }
        }
        matrices.push(m);
    }
    lines.finish()?;
    Ok(WitnessFile {
        strategy: Strategy {
            algebra,
            dim,
            matrices,
            state,
            basis_names,
        },
        relations,
        elements,
    })
}
