//! Noncommutative Gröbner bases: reduction, obstructions, completion with a
//! degree cap, and the right-marker encoding of two-sided plus left ideals.
//!
//! A left ideal `L` together with a two-sided ideal `I` is handled by
//! adjoining a marker letter `xi` that is greater than every other letter:
//! `f` lies in `I + L` exactly when `f xi` lies in the two-sided ideal
//! generated by `I` and `L xi`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::artifact::{
    format_word, parse_poly_at, parse_scalar_at, parse_word, read_header, split_keyword,
    write_header, ArtifactError, Lines,
};
use crate::cyclo::CycloScalar;
use crate::freealg::{AlgebraError, FreeAlgebra, NCPoly, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GbError {
    #[error("generators must not mention the marker variable")]
    MarkerInInput,
    #[error("algebra already carries a marker variable")]
    AlreadyAugmented,
    #[error("algebra has no marker variable")]
    NotAugmented,
    #[error("degree cap {cap} is below the generator degree {degree}")]
    CapTooSmall { cap: usize, degree: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Obstructions above this degree were left unprocessed.
    TruncatedAt(usize),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Complete => write!(f, "complete"),
            Status::TruncatedAt(d) => write!(f, "truncated {d}"),
        }
    }
}

/// Three-valued membership answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Yes,
    No,
    Unknown,
}

/// One reduction step: subtract `coef * left * rule * right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub coef: CycloScalar,
    pub left: Word,
    pub rule: usize,
    pub right: Word,
}

/// Where a polynomial in a completion history came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    /// The i-th input generator.
    Input(usize),
    /// `ua * h[a] * va - ub * h[b] * vb`.
    Overlap {
        a: usize,
        ua: Word,
        va: Word,
        b: usize,
        ub: Word,
        vb: Word,
    },
    /// A re-reduction of an earlier history entry.
    Rewrite(usize),
}

/// `poly = scale * (origin - sum of steps)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub origin: Origin,
    pub steps: Vec<Step>,
    pub scale: CycloScalar,
}

/// Every polynomial a traced completion ever adopted as a rule, with the
/// derivation that expresses it through the input generators.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub inputs: Vec<NCPoly>,
    pub history: Vec<Derivation>,
    /// History ids of the final rules, aligned with `RewriteSystem::rules`.
    pub final_ids: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct LeadIndex {
    by_word: HashMap<Word, Vec<usize>>,
    lengths: Vec<usize>,
}

impl LeadIndex {
    fn insert(&mut self, w: Word, id: usize) {
        if !self.lengths.contains(&w.len()) {
            self.lengths.push(w.len());
            self.lengths.sort_unstable();
        }
        let ids = self.by_word.entry(w).or_default();
        ids.push(id);
        ids.sort_unstable();
    }

    fn remove(&mut self, w: &Word, id: usize) {
        if let Some(ids) = self.by_word.get_mut(w) {
            ids.retain(|&x| x != id);
            if ids.is_empty() {
                self.by_word.remove(w);
            }
        }
    }

    /// Leftmost position holding some leading word; lowest rule id there.
    fn find(&self, w: &Word) -> Option<(usize, usize, usize)> {
        let letters = w.letters();
        for pos in 0..letters.len().max(1) {
            let mut best: Option<(usize, usize)> = None;
            for &len in &self.lengths {
                if pos + len > letters.len() {
                    break;
                }
                if let Some(ids) = self.by_word.get(&letters[pos..pos + len]) {
                    let id = ids[0];
                    if best.is_none_or(|(b, _)| id < b) {
                        best = Some((id, len));
                    }
                }
            }
            if let Some((id, len)) = best {
                return Some((pos, len, id));
            }
        }
        None
    }
}

/// A set of monic rules `LT(r) -> LT(r) - r` with completion status.
#[derive(Debug, Clone)]
pub struct RewriteSystem {
    algebra: FreeAlgebra,
    rules: Vec<NCPoly>,
    status: Status,
    cap: usize,
    index: LeadIndex,
    trace: Option<Trace>,
}

impl RewriteSystem {
    /// Wraps existing rules (made monic) without completing them.
    pub fn from_rules(
        algebra: FreeAlgebra,
        rules: Vec<NCPoly>,
        status: Status,
        cap: usize,
    ) -> Self {
        let rules: Vec<NCPoly> = rules
            .into_iter()
            .filter(|r| !r.is_zero())
            .map(|r| r.monic())
            .collect();
        let mut index = LeadIndex::default();
        for (i, r) in rules.iter().enumerate() {
            index.insert(r.leading_word().unwrap().clone(), i);
        }
        RewriteSystem {
            algebra,
            rules,
            status,
            cap,
            index,
            trace: None,
        }
    }

    pub fn algebra(&self) -> &FreeAlgebra {
        &self.algebra
    }

    pub fn rules(&self) -> &[NCPoly] {
        &self.rules
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn is_complete(&self) -> bool {
        self.status == Status::Complete
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.trace.as_ref()
    }

    pub fn leading_words(&self) -> impl Iterator<Item = &Word> {
        self.rules.iter().map(|r| r.leading_word().unwrap())
    }

    /// Whether `w` contains no leading word.
    pub fn is_normal(&self, w: &Word) -> bool {
        self.index.find(w).is_none()
    }

    /// Whether no leading word is a suffix of `w`. For `w = v l` with `v`
    /// normal this decides normality of `w`.
    pub fn is_normal_extension(&self, w: &Word) -> bool {
        let letters = w.letters();
        self.index
            .lengths
            .iter()
            .filter(|&&len| len <= letters.len())
            .all(|&len| {
                !self
                    .index
                    .by_word
                    .contains_key(&letters[letters.len() - len..])
            })
    }

    pub fn normal_form(&self, p: &NCPoly) -> NCPoly {
        reduce(p, |i| &self.rules[i], &self.index, None)
    }

    pub fn normal_form_traced(&self, p: &NCPoly) -> (NCPoly, Vec<Step>) {
        let mut steps = Vec::new();
        let nf = reduce(p, |i| &self.rules[i], &self.index, Some(&mut steps));
        (nf, steps)
    }

    pub fn member(&self, p: &NCPoly) -> Membership {
        if self.normal_form(p).is_zero() {
            Membership::Yes
        } else if self.is_complete() {
            Membership::No
        } else {
            Membership::Unknown
        }
    }
}

/// Word data of an obstruction `ua LT(a) va = ub LT(b) vb`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Obstruction {
    ua: Word,
    va: Word,
    ub: Word,
    vb: Word,
    degree: usize,
}

/// Proper overlaps where a suffix of `lt_a` is a prefix of `lt_b`.
fn suffix_prefix_overlaps(lt_a: &Word, lt_b: &Word) -> Vec<Obstruction> {
    let a = lt_a.letters();
    let b = lt_b.letters();
    let mut out = Vec::new();
    for k in 1..a.len().min(b.len()) {
        if a[a.len() - k..] == b[..k] {
            out.push(Obstruction {
                ua: Word::one(),
                va: Word::from_letters(&b[k..]),
                ub: Word::from_letters(&a[..a.len() - k]),
                vb: Word::one(),
                degree: a.len() + b.len() - k,
            });
        }
    }
    out
}

fn obstructions(lt_a: &Word, lt_b: &Word, same: bool) -> Vec<Obstruction> {
    let mut out = suffix_prefix_overlaps(lt_a, lt_b);
    if !same {
        for o in suffix_prefix_overlaps(lt_b, lt_a) {
            out.push(Obstruction {
                ua: o.ub,
                va: o.vb,
                ub: o.ua,
                vb: o.va,
                degree: o.degree,
            });
        }
        // containments: lt_a inside lt_b or lt_b inside lt_a
        let (a, b) = (lt_a.letters(), lt_b.letters());
        if a.len() <= b.len() {
            for pos in 0..=(b.len() - a.len()) {
                if &b[pos..pos + a.len()] == a {
                    out.push(Obstruction {
                        ua: Word::from_letters(&b[..pos]),
                        va: Word::from_letters(&b[pos + a.len()..]),
                        ub: Word::one(),
                        vb: Word::one(),
                        degree: b.len(),
                    });
                }
            }
        }
        if b.len() < a.len() {
            for pos in 0..=(a.len() - b.len()) {
                if &a[pos..pos + b.len()] == b {
                    out.push(Obstruction {
                        ua: Word::one(),
                        va: Word::one(),
                        ub: Word::from_letters(&a[..pos]),
                        vb: Word::from_letters(&a[pos + b.len()..]),
                        degree: a.len(),
                    });
                }
            }
        }
    }
    out
}

fn s_poly(a: &NCPoly, b: &NCPoly, o: &Obstruction) -> NCPoly {
    a.sandwich(o.ua.letters(), o.va.letters())
        .sub(&b.sandwich(o.ub.letters(), o.vb.letters()))
}

/// An S-polynomial together with the degree of its common multiple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SPoly {
    pub poly: NCPoly,
    pub degree: usize,
}

/// Two-sided S-polynomials of `a` and `b`: proper overlaps in both
/// directions and containments. Passing the same polynomial twice yields
/// its self-overlaps.
pub fn overlaps(a: &NCPoly, b: &NCPoly) -> Vec<SPoly> {
    let (am, bm) = (a.monic(), b.monic());
    let (Some(la), Some(lb)) = (am.leading_word(), bm.leading_word()) else {
        return vec![];
    };
    let same = am == bm;
    obstructions(la, lb, same)
        .iter()
        .map(|o| SPoly {
            poly: s_poly(&am, &bm, o),
            degree: o.degree,
        })
        .collect()
}

/// Left-ideal matches `w_a LT(a) = w_b LT(b)`: one leading word is a
/// suffix of the other.
pub fn left_matches(a: &NCPoly, b: &NCPoly) -> Vec<SPoly> {
    let (am, bm) = (a.monic(), b.monic());
    let (Some(la), Some(lb)) = (am.leading_word(), bm.leading_word()) else {
        return vec![];
    };
    let (x, y) = (la.letters(), lb.letters());
    if y.ends_with(x) {
        let w = &y[..y.len() - x.len()];
        vec![SPoly {
            poly: bm.sub(&am.sandwich(w, &[])),
            degree: y.len(),
        }]
    } else if x.ends_with(y) {
        let w = &x[..x.len() - y.len()];
        vec![SPoly {
            poly: am.sub(&bm.sandwich(w, &[])),
            degree: x.len(),
        }]
    } else {
        vec![]
    }
}

#[derive(Debug, Clone)]
struct Rule {
    poly: NCPoly,
    hist: usize,
    alive: bool,
}

struct Completion<'a> {
    algebra: &'a FreeAlgebra,
    cap: usize,
    rules: Vec<Rule>,
    index: LeadIndex,
    queue: BinaryHeap<Reverse<(usize, usize)>>,
    pending: Vec<(usize, usize, Obstruction)>,
    trace: Option<Trace>,
    history_len: usize,
    over_cap: Vec<(usize, usize)>,
    max_rules: usize,
    out_of_budget: bool,
}

impl Completion<'_> {
    fn reduce(&self, p: &NCPoly, steps: Option<&mut Vec<Step>>) -> NCPoly {
        // dead rules keep their slots so index positions stay valid
        reduce(p, |i| &self.rules[i].poly, &self.index, steps)
    }

    fn record(&mut self, origin: Origin, mut steps: Vec<Step>, scale: CycloScalar) -> usize {
        let id = self.history_len;
        self.history_len += 1;
        if let Some(t) = self.trace.as_mut() {
            for s in &mut steps {
                s.rule = self.rules[s.rule].hist;
            }
            t.history.push(Derivation {
                origin,
                steps,
                scale,
            });
        }
        id
    }

    /// Reduces `p` and adopts it as a rule when nonzero.
    fn add(&mut self, p: NCPoly, origin: Origin) {
        let tracing = self.trace.is_some();
        let mut steps = Vec::new();
        let r = self.reduce(&p, tracing.then_some(&mut steps));
        if r.is_zero() {
            return;
        }
        let lc = r.leading_coeff().unwrap().inv().expect("nonzero");
        let r = r.scale(&lc);
        let hist = self.record(origin, steps, lc);
        self.insert(r, hist);
    }

    fn insert(&mut self, r: NCPoly, hist: usize) {
        let lt = r.leading_word().unwrap().clone();
        let id = self.rules.len();
        let mut displaced = Vec::new();
        for (i, rule) in self.rules.iter_mut().enumerate() {
            if rule.alive && rule.poly.leading_word().unwrap().contains(lt.letters()) {
                rule.alive = false;
                displaced.push(i);
            }
        }
        for &i in &displaced {
            let w = self.rules[i].poly.leading_word().unwrap().clone();
            self.index.remove(&w, i);
        }
        self.rules.push(Rule {
            poly: r,
            hist,
            alive: true,
        });
        self.index.insert(lt.clone(), id);
        for j in 0..=id {
            if !self.rules[j].alive {
                continue;
            }
            let lj = self.rules[j].poly.leading_word().unwrap().clone();
            for o in obstructions(&lj, &lt, j == id) {
                let seq = self.pending.len();
                if o.degree > self.cap {
                    self.over_cap.push((j, id));
                    continue;
                }
                self.queue.push(Reverse((o.degree, seq)));
                self.pending.push((j, id, o));
            }
        }
        for i in displaced {
            let p = self.rules[i].poly.clone();
            let h = self.rules[i].hist;
            self.add(p, Origin::Rewrite(h));
        }
    }

    fn run(&mut self) {
        while let Some(Reverse((_, seq))) = self.queue.pop() {
            if self.rules.len() >= self.max_rules {
                self.out_of_budget = true;
                return;
            }
            let (a, b, o) = self.pending[seq].clone();
            if !self.rules[a].alive || !self.rules[b].alive {
                continue;
            }
            let s = s_poly(&self.rules[a].poly, &self.rules[b].poly, &o);
            let origin = Origin::Overlap {
                a: self.rules[a].hist,
                ua: o.ua,
                va: o.va,
                b: self.rules[b].hist,
                ub: o.ub,
                vb: o.vb,
            };
            self.add(s, origin);
        }
    }

    fn finish(mut self) -> RewriteSystem {
        let truncated = self.out_of_budget
            || self
                .over_cap
                .iter()
                .any(|&(a, b)| self.rules[a].alive && self.rules[b].alive);
        // tail interreduction; leading words are unaffected
        let mut live: Vec<usize> = (0..self.rules.len())
            .filter(|&i| self.rules[i].alive)
            .collect();
        let tracing = self.trace.is_some();
        for &i in &live {
            let p = self.rules[i].poly.clone();
            let mut lead_only = p.clone().into_terms();
            let tail = NCPoly::from_sorted_terms(lead_only.split_off(1));
            let mut steps = Vec::new();
            let tail_nf = self.reduce(&tail, tracing.then_some(&mut steps));
            if tail_nf != tail {
                let new = NCPoly::from_sorted_terms(lead_only).add(&tail_nf);
                let one = new.leading_coeff().unwrap().field().one();
                let h = self.record(Origin::Rewrite(self.rules[i].hist), steps, one);
                self.rules[i].poly = new;
                self.rules[i].hist = h;
            }
        }
        live.sort_by(|&x, &y| {
            self.rules[x]
                .poly
                .leading_word()
                .unwrap()
                .cmp(self.rules[y].poly.leading_word().unwrap())
        });
        let polys: Vec<NCPoly> = live.iter().map(|&i| self.rules[i].poly.clone()).collect();
        if let Some(t) = self.trace.as_mut() {
            t.final_ids = live.iter().map(|&i| self.rules[i].hist).collect();
        }
        let status = if truncated {
            Status::TruncatedAt(self.cap)
        } else {
            Status::Complete
        };
        let mut rs = RewriteSystem::from_rules(self.algebra.clone(), polys, status, self.cap);
        rs.trace = self.trace.take();
        rs
    }
}

fn reduce<'r>(
    p: &NCPoly,
    rule: impl Fn(usize) -> &'r NCPoly,
    index: &LeadIndex,
    mut steps: Option<&mut Vec<Step>>,
) -> NCPoly {
    let mut rest = p.clone();
    let mut done: Vec<(Word, CycloScalar)> = Vec::new();
    loop {
        let Some((w, c)) = rest.terms().first().cloned() else {
            break;
        };
        match index.find(&w) {
            Some((pos, len, id)) => {
                let left = &w.letters()[..pos];
                let right = &w.letters()[pos + len..];
                rest = rest.sub_multiple(&c, left, rule(id), right);
                if let Some(s) = steps.as_deref_mut() {
                    s.push(Step {
                        coef: c,
                        left: Word::from_letters(left),
                        rule: id,
                        right: Word::from_letters(right),
                    });
                }
            }
            None => {
                done.push((w, c));
                let mut terms = rest.into_terms();
                terms.remove(0);
                rest = NCPoly::from_sorted_terms(terms);
            }
        }
    }
    NCPoly::from_sorted_terms(done)
}

/// Options for [`complete_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct CompleteOptions {
    /// Record a derivation of every rule from the inputs.
    pub trace: bool,
    /// Stop once this many rules have been created; the result is then
    /// reported as truncated.
    pub max_rules: Option<usize>,
}

/// Completes `gens` to a reduced Gröbner basis, processing obstructions in
/// order of (degree, creation index) and leaving those above `cap`.
pub fn complete(
    algebra: &FreeAlgebra,
    gens: &[NCPoly],
    cap: usize,
) -> Result<RewriteSystem, GbError> {
    complete_with(algebra, gens, cap, CompleteOptions::default())
}

pub fn complete_with(
    algebra: &FreeAlgebra,
    gens: &[NCPoly],
    cap: usize,
    opts: CompleteOptions,
) -> Result<RewriteSystem, GbError> {
    for g in gens {
        algebra.check(g)?;
        if g.degree() > cap {
            return Err(GbError::CapTooSmall {
                cap,
                degree: g.degree(),
            });
        }
    }
    let mut c = Completion {
        algebra,
        cap,
        rules: Vec::new(),
        index: LeadIndex::default(),
        queue: BinaryHeap::new(),
        pending: Vec::new(),
        trace: opts.trace.then(|| Trace {
            inputs: gens.to_vec(),
            ..Trace::default()
        }),
        history_len: 0,
        over_cap: Vec::new(),
        max_rules: opts.max_rules.unwrap_or(usize::MAX),
        out_of_budget: false,
    };
    for (i, g) in gens.iter().enumerate() {
        c.add(g.clone(), Origin::Input(i));
    }
    c.run();
    Ok(c.finish())
}

/// Generators of a two-sided ideal `I` and a left ideal `L`, both over an
/// algebra without the marker.
#[derive(Debug, Clone)]
pub struct AugmentedInput {
    pub algebra: FreeAlgebra,
    pub two_sided: Vec<NCPoly>,
    pub left: Vec<NCPoly>,
}

impl AugmentedInput {
    /// The extended algebra and `two_sided ∪ { b xi : b in left }`.
    pub fn augment(&self) -> Result<(FreeAlgebra, Vec<NCPoly>), GbError> {
        if self.algebra.alphabet().aux().is_some() {
            return Err(GbError::AlreadyAugmented);
        }
        let ext = self.algebra.with_aux()?;
        let xi = ext.alphabet().aux().unwrap();
        let mut out = Vec::with_capacity(self.two_sided.len() + self.left.len());
        for g in self.two_sided.iter().chain(&self.left) {
            if g.max_letter().is_some_and(|l| l >= xi) {
                return Err(GbError::MarkerInInput);
            }
        }
        out.extend(self.two_sided.iter().cloned());
        out.extend(self.left.iter().map(|b| b.sandwich(&[], &[xi])));
        Ok((ext, out))
    }

    pub fn max_degree(&self) -> usize {
        self.two_sided
            .iter()
            .chain(&self.left)
            .map(|p| p.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn complete(&self, cap: usize, opts: CompleteOptions) -> Result<RewriteSystem, GbError> {
        let (ext, gens) = self.augment()?;
        complete_with(&ext, &gens, cap.max(self.max_degree() + 1), opts)
    }
}

/// Decides `p ∈ I + L` via `p xi` against the augmented basis.
pub fn member_mixed(basis: &RewriteSystem, p: &NCPoly) -> Result<Membership, GbError> {
    let xi = basis
        .algebra()
        .alphabet()
        .aux()
        .ok_or(GbError::NotAugmented)?;
    if p.max_letter().is_some_and(|l| l >= xi) {
        return Err(GbError::MarkerInInput);
    }
    Ok(basis.member(&p.sandwich(&[], &[xi])))
}

/// Convenience: complete the augmented input and test `p`.
pub fn member_mixed_input(
    inp: &AugmentedInput,
    p: &NCPoly,
    cap: usize,
) -> Result<Membership, GbError> {
    let basis = inp.complete(cap, CompleteOptions::default())?;
    member_mixed(&basis, p)
}

/// Replays a trace: recomputes every history entry from its derivation and
/// returns the final rules. Uses only polynomial arithmetic.
pub fn replay_trace(trace: &Trace) -> Result<Vec<NCPoly>, String> {
    let mut hist: Vec<NCPoly> = Vec::with_capacity(trace.history.len());
    for (k, d) in trace.history.iter().enumerate() {
        let get = |i: usize| -> Result<&NCPoly, String> {
            hist.get(i)
                .ok_or_else(|| format!("entry {k} references future entry {i}"))
        };
        let mut p = match &d.origin {
            Origin::Input(i) => trace
                .inputs
                .get(*i)
                .cloned()
                .ok_or_else(|| format!("entry {k}: no input {i}"))?,
            Origin::Overlap {
                a,
                ua,
                va,
                b,
                ub,
                vb,
            } => {
                let pa = get(*a)?;
                let pb = get(*b)?;
                let wa = pa
                    .leading_word()
                    .ok_or("zero rule")?
                    .sandwich(ua.letters(), va.letters());
                let wb = pb
                    .leading_word()
                    .ok_or("zero rule")?
                    .sandwich(ub.letters(), vb.letters());
                if wa != wb {
                    return Err(format!("entry {k}: obstruction words differ"));
                }
                pa.sandwich(ua.letters(), va.letters())
                    .sub(&pb.sandwich(ub.letters(), vb.letters()))
            }
            Origin::Rewrite(i) => get(*i)?.clone(),
        };
        for s in &d.steps {
            let r = get(s.rule)?;
            p = p.sub_multiple(&s.coef, s.left.letters(), r, s.right.letters());
        }
        hist.push(p.scale(&d.scale));
    }
    trace
        .final_ids
        .iter()
        .map(|&i| {
            hist.get(i)
                .cloned()
                .ok_or_else(|| format!("final id {i} out of range"))
        })
        .collect()
}

const BASIS_KIND: &str = "basis";

/// Renders the rewriting system (and its trace, if recorded) as a basis file.
pub fn export_basis(rs: &RewriteSystem) -> String {
    let a = rs.algebra();
    let mut out = String::new();
    write_header(&mut out, BASIS_KIND, a);
    let _ = writeln!(out, "order grlex");
    let _ = writeln!(out, "cap {}", rs.cap());
    let _ = writeln!(out, "status {}", rs.status());
    let _ = writeln!(out, "rules {}", rs.rules().len());
    for r in rs.rules() {
        let _ = writeln!(out, "rule {}", a.format(r));
    }
    if let Some(t) = rs.trace() {
        let al = a.alphabet();
        let w = |w: &Word| format_word(al, w);
        let _ = writeln!(out, "inputs {}", t.inputs.len());
        for p in &t.inputs {
            let _ = writeln!(out, "input {}", a.format(p));
        }
        let _ = writeln!(out, "history {}", t.history.len());
        for d in &t.history {
            match &d.origin {
                Origin::Input(i) => {
                    let _ = writeln!(out, "h input {i} | {} | {}", d.scale, d.steps.len());
                }
                Origin::Rewrite(i) => {
                    let _ = writeln!(out, "h rewrite {i} | {} | {}", d.scale, d.steps.len());
                }
                Origin::Overlap {
                    a: x,
                    ua,
                    va,
                    b,
                    ub,
                    vb,
                } => {
                    let _ = writeln!(
                        out,
                        "h overlap {x} {b} | {} | {} | {} | {} | {} | {}",
                        w(ua),
                        w(va),
                        w(ub),
                        w(vb),
                        d.scale,
                        d.steps.len()
                    );
                }
            }
            for s in &d.steps {
                let _ = writeln!(
                    out,
                    "s {} | {} | {} | {}",
                    s.coef,
                    w(&s.left),
                    s.rule,
                    w(&s.right)
                );
            }
        }
        let ids: Vec<String> = t.final_ids.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "final {}", ids.join(" "));
    }
    out
}

/// Parses a basis file. Rules are taken as written: no completion runs.
pub fn parse_basis(text: &str) -> Result<RewriteSystem, ArtifactError> {
    let mut lines = Lines::new(text);
    let algebra = read_header(&mut lines, BASIS_KIND)?;
    if lines.expect("order")? != "grlex" {
        return Err(lines.err("only grlex order is supported"));
    }
    let cap = lines.expect_count("cap")?;
    let status_text = lines.expect("status")?;
    let status = match split_keyword(status_text) {
        ("complete", "") => Status::Complete,
        ("truncated", d) => Status::TruncatedAt(lines.count(d)?),
        _ => return Err(lines.err(format!("bad status {status_text:?}"))),
    };
    let n = lines.expect_count("rules")?;
    let mut rules = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let t = lines.expect("rule")?;
        let p = parse_poly_at(&lines, &algebra, t)?;
        if p.is_zero() {
            return Err(lines.err("zero rule"));
        }
        if p.leading_coeff().is_some_and(|c| !c.is_one()) {
            return Err(lines.err("rule is not monic"));
        }
        rules.push(p);
    }
    let mut trace = None;
    if lines.peek_keyword() == Some("inputs") {
        trace = Some(parse_trace(&mut lines, &algebra)?);
    }
    lines.finish()?;
    let mut rs = RewriteSystem::from_rules(algebra, rules, status, cap);
    rs.trace = trace;
    Ok(rs)
}

fn parse_trace(lines: &mut Lines<'_>, algebra: &FreeAlgebra) -> Result<Trace, ArtifactError> {
    let al = algebra.alphabet();
    let n = lines.expect_count("inputs")?;
    let mut inputs = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let t = lines.expect("input")?;
        inputs.push(parse_poly_at(lines, algebra, t)?);
    }
    let h = lines.expect_count("history")?;
    let mut history = Vec::with_capacity(h.min(1 << 16));
    for _ in 0..h {
        let rest = lines.expect("h")?;
        let fields: Vec<&str> = rest.split('|').map(str::trim).collect();
        let word = |lines: &Lines<'_>, s: &str| parse_word(al, s).map_err(|m| lines.err(m));
        let (kind, args) = split_keyword(fields[0]);
        let ids: Vec<usize> = args
            .split_whitespace()
            .map(|x| lines.count(x))
            .collect::<Result<_, _>>()?;
        let (origin, tail) = match (kind, ids.as_slice(), fields.len()) {
            ("input", [i], 3) => (Origin::Input(*i), &fields[1..]),
            ("rewrite", [i], 3) => (Origin::Rewrite(*i), &fields[1..]),
            ("overlap", [x, b], 7) => (
                Origin::Overlap {
                    a: *x,
                    ua: word(lines, fields[1])?,
                    va: word(lines, fields[2])?,
                    b: *b,
                    ub: word(lines, fields[3])?,
                    vb: word(lines, fields[4])?,
                },
                &fields[5..],
            ),
            _ => return Err(lines.err(format!("bad history line {rest:?}"))),
        };
        let scale = parse_scalar_at(lines, algebra, tail[0])?;
        let nsteps = lines.count(tail[1])?;
        let mut steps = Vec::with_capacity(nsteps.min(1 << 16));
        for _ in 0..nsteps {
            let rest = lines.expect("s")?;
            let f: Vec<&str> = rest.split('|').map(str::trim).collect();
            if f.len() != 4 {
                return Err(lines.err(format!("bad step line {rest:?}")));
            }
            steps.push(Step {
                coef: parse_scalar_at(lines, algebra, f[0])?,
                left: word(lines, f[1])?,
                rule: lines.count(f[2])?,
                right: word(lines, f[3])?,
            });
        }
        history.push(Derivation {
            origin,
            steps,
            scale,
        });
    }
    let ids = lines.expect("final")?;
    let final_ids = ids
        .split_whitespace()
        .map(|x| lines.count(x))
        .collect::<Result<_, _>>()?;
    Ok(Trace {
        inputs,
        history,
        final_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclo::CycloField;
    use crate::freealg::{AdjointRule, Alphabet, VarRole, Variable};

    fn algebra(names: &[&str]) -> FreeAlgebra {
        let vars = names
            .iter()
            .map(|n| {
                Variable::new(
                    *n,
                    VarRole::Game {
                        player: 0,
                        question: 0,
                        label: None,
                    },
                    AdjointRule::SelfAdjoint,
                )
            })
            .collect();
        FreeAlgebra::new(Alphabet::new(vars).unwrap(), CycloField::new(4).unwrap())
    }

    #[test]
    fn square_rule_reduces_to_one() {
        let a = algebra(&["x0"]);
        let rs = RewriteSystem::from_rules(
            a.clone(),
            vec![a.parse("x0 x0 - 1").unwrap()],
            Status::Complete,
            2,
        );
        assert_eq!(rs.normal_form(&a.parse("x0 x0").unwrap()), a.one());
        assert_eq!(
            rs.normal_form(&a.parse("x0 x0 x0").unwrap()),
            a.parse("x0").unwrap()
        );
    }

    #[test]
    fn commutation_rewrite() {
        let a = algebra(&["x0", "y0"]);
        let rs = RewriteSystem::from_rules(
            a.clone(),
            vec![a.parse("y0 x0 - x0 y0").unwrap()],
            Status::Complete,
            2,
        );
        assert_eq!(
            rs.normal_form(&a.parse("y0 x0").unwrap()),
            a.parse("x0 y0").unwrap()
        );
        let p = a.parse("y0 y0 x0 + y0 x0 y0").unwrap();
        let nf = rs.normal_form(&p);
        assert_eq!(rs.normal_form(&nf), nf);
        assert_eq!(nf, a.parse("x0 y0 y0 + x0 y0 y0").unwrap());
    }

    #[test]
    fn self_overlap_cancels() {
        let a = algebra(&["x"]);
        let p = a.parse("x x - 1").unwrap();
        let s = overlaps(&p, &p);
        assert_eq!(s.len(), 1);
        assert!(s[0].poly.is_zero());
        assert_eq!(s[0].degree, 3);
    }

    #[test]
    fn commutator_square_overlap() {
        let a = algebra(&["x", "y"]);
        let p = a.parse("x y - y x").unwrap();
        let q = a.parse("y y - 1").unwrap();
        let s = overlaps(&p, &q);
        assert_eq!(s.len(), 1);
        let expected = a.parse("x - y x y").unwrap();
        assert!(s[0].poly == expected || s[0].poly == expected.neg());
    }

    #[test]
    fn disjoint_leading_words_have_no_overlaps() {
        let a = algebra(&["x", "y"]);
        assert!(overlaps(&a.parse("x x - 1").unwrap(), &a.parse("y y - 1").unwrap()).is_empty());
    }

    #[test]
    fn left_match_cases() {
        let a = algebra(&["x0", "y0"]);
        let p = a.parse("x0 y0 - 1").unwrap();
        let q = a.parse("y0 - x0").unwrap();
        let m = left_matches(&p, &q);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].poly, p.sub(&q.sandwich(&[0], &[])));

        let r = a.parse("x0 y0 + x0").unwrap();
        let m = left_matches(&p, &r);
        assert_eq!(m[0].poly, r.sub(&p));
        assert_eq!(m[0].poly, a.parse("x0 + 1").unwrap());

        let s = a.parse("y0 x0").unwrap();
        assert!(left_matches(&p, &s).is_empty());
    }

    #[test]
    fn augment_cases() {
        let a = algebra(&["x0", "y0"]);
        let inp = AugmentedInput {
            algebra: a.clone(),
            two_sided: vec![],
            left: vec![a.parse("x0 y0 - 1").unwrap()],
        };
        let (ext, gens) = inp.augment().unwrap();
        assert_eq!(gens, vec![ext.parse("x0 y0 xi - xi").unwrap()]);

        let inp = AugmentedInput {
            algebra: a.clone(),
            two_sided: vec![a.parse("x0 x0 - 1").unwrap()],
            left: vec![],
        };
        let (_, gens) = inp.augment().unwrap();
        assert_eq!(gens, inp.two_sided);

        let inp = AugmentedInput {
            algebra: a.clone(),
            two_sided: vec![],
            left: vec![a.one()],
        };
        let (ext, gens) = inp.augment().unwrap();
        assert_eq!(gens, vec![ext.parse("xi").unwrap()]);

        let bad = AugmentedInput {
            algebra: a.clone(),
            two_sided: vec![],
            left: vec![NCPoly::monomial(a.field().one(), Word::letter(2))],
        };
        assert_eq!(bad.augment().unwrap_err(), GbError::MarkerInInput);
    }

    #[test]
    fn truncated_membership_is_unknown() {
        // x y x - y has an infinite basis under x < y: x y^n x - y^n ...
        let a = algebra(&["x", "y"]);
        let gens = vec![a.parse("y x y - x").unwrap()];
        let rs = complete(&a, &gens, 4).unwrap();
        assert_eq!(rs.status(), Status::TruncatedAt(4));
        assert_eq!(rs.member(&gens[0]), Membership::Yes);
        assert_eq!(rs.member(&a.parse("x").unwrap()), Membership::Unknown);
    }

    #[test]
    fn empty_generators_give_empty_complete_system() {
        let a = algebra(&["x"]);
        let rs = complete(&a, &[], 3).unwrap();
        assert!(rs.rules().is_empty());
        assert!(rs.is_complete());
        assert_eq!(rs.member(&a.one()), Membership::No);
    }

    #[test]
    fn trace_replays_to_final_rules() {
        let a = algebra(&["x", "y"]);
        let gens = vec![
            a.parse("x x - 1").unwrap(),
            a.parse("y y - 1").unwrap(),
            a.parse("x y x - y x y").unwrap(),
        ];
        let rs = complete_with(
            &a,
            &gens,
            8,
            CompleteOptions {
                trace: true,
                ..Default::default()
            },
        )
        .unwrap();
        let replayed = replay_trace(rs.trace().unwrap()).unwrap();
        assert_eq!(replayed, rs.rules());
        let text = export_basis(&rs);
        let back = parse_basis(&text).unwrap();
        assert_eq!(back.rules(), rs.rules());
        assert_eq!(back.trace(), rs.trace());
        assert_eq!(export_basis(&back), text);
    }
}
