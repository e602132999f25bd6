//! Free algebras over a typed alphabet: words, graded-lexicographic orders,
//! noncommutative polynomials and the involution.
//!
//! Letters are stored as indices into an [`Alphabet`]. The alphabet's index
//! order is the variable precedence, so the derived `Ord` on [`Word`]
//! (shorter first, then letter-wise) is the graded lexicographic order used
//! everywhere else. A different precedence is obtained with
//! [`Alphabet::reordered`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::cyclo::{fmt_rational, CycloError, CycloField, CycloScalar};

pub type Letter = u16;

/// Name of the auxiliary right-marker variable.
pub const AUX_NAME: &str = "xi";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("duplicate variable name {0:?}")]
    DuplicateName(String),
    #[error("auxiliary variable must be unique and greatest")]
    AuxPlacement,
    #[error("letter {0} is outside the alphabet")]
    LetterOutOfRange(Letter),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("polynomial parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },
    #[error("precedence is not a permutation of the alphabet")]
    BadPrecedence,
    #[error(transparent)]
    Cyclo(#[from] CycloError),
}

/// A word in the free monoid; the empty word is the identity.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Word(SmallVec<[Letter; 8]>);

impl Hash for Word {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.as_slice().hash(state)
    }
}

impl std::borrow::Borrow<[Letter]> for Word {
    fn borrow(&self) -> &[Letter] {
        &self.0
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.as_slice().cmp(other.0.as_slice()))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl Word {
    pub fn one() -> Self {
        Word(SmallVec::new())
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        Word(SmallVec::from_slice(letters))
    }

    pub fn letter(l: Letter) -> Self {
        Word::from_letters(&[l])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `u * self * v`
    pub fn sandwich(&self, u: &[Letter], v: &[Letter]) -> Word {
        let mut out = SmallVec::with_capacity(u.len() + self.0.len() + v.len());
        out.extend_from_slice(u);
        out.extend_from_slice(&self.0);
        out.extend_from_slice(v);
        Word(out)
    }

    pub fn concat(&self, other: &Word) -> Word {
        self.sandwich(&[], &other.0)
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// Leftmost occurrence of `sub` in `self`.
    pub fn find(&self, sub: &[Letter]) -> Option<usize> {
        if sub.len() > self.0.len() {
            return None;
        }
        if sub.is_empty() {
            return Some(0);
        }
        self.0.windows(sub.len()).position(|w| w == sub)
    }

    pub fn contains(&self, sub: &[Letter]) -> bool {
        self.find(sub).is_some()
    }

    pub fn ends_with(&self, suffix: &[Letter]) -> bool {
        self.0.ends_with(suffix)
    }
}

/// How the involution acts on a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointRule {
    SelfAdjoint,
    /// Unitary of finite order `m`: `g* = g^(m-1)`.
    Unitary(u32),
}

/// What a variable stands for in a game algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    /// Player, question, and answer (or linear-system variable) index.
    Game {
        player: usize,
        question: usize,
        label: Option<usize>,
    },
    /// The right marker used to encode left ideals.
    Aux,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub role: VarRole,
    pub adjoint: AdjointRule,
}

impl Variable {
    pub fn new(name: impl Into<String>, role: VarRole, adjoint: AdjointRule) -> Self {
        Variable {
            name: name.into(),
            role,
            adjoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    vars: Vec<Variable>,
    index: HashMap<String, Letter>,
}

impl Alphabet {
    pub fn new(vars: Vec<Variable>) -> Result<Self, AlgebraError> {
        let mut index = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            if !is_identifier(&v.name) {
                return Err(AlgebraError::UnknownVariable(v.name.clone()));
            }
            if index.insert(v.name.clone(), i as Letter).is_some() {
                return Err(AlgebraError::DuplicateName(v.name.clone()));
            }
            if v.role == VarRole::Aux && i + 1 != vars.len() {
                return Err(AlgebraError::AuxPlacement);
            }
        }
        Ok(Alphabet { vars, index })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, l: Letter) -> &Variable {
        &self.vars[l as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<Letter> {
        self.index.get(name).copied()
    }

    pub fn aux(&self) -> Option<Letter> {
        match self.vars.last() {
            Some(v) if v.role == VarRole::Aux => Some((self.vars.len() - 1) as Letter),
            _ => None,
        }
    }

    /// Letters that are not the auxiliary marker.
    pub fn generators(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.vars.len() as Letter).filter(move |&l| self.vars[l as usize].role != VarRole::Aux)
    }

    /// The same alphabet extended by the auxiliary marker as greatest letter.
    pub fn with_aux(&self) -> Result<Self, AlgebraError> {
        if self.aux().is_some() {
            return Err(AlgebraError::AuxPlacement);
        }
        let mut vars = self.vars.clone();
        vars.push(Variable::new(
            AUX_NAME,
            VarRole::Aux,
            AdjointRule::SelfAdjoint,
        ));
        Alphabet::new(vars)
    }

    /// Reorders the alphabet so that `precedence[0] < precedence[1] < ...`.
    /// Returns the new alphabet and the map old letter -> new letter.
    pub fn reordered(&self, precedence: &[Letter]) -> Result<(Self, Vec<Letter>), AlgebraError> {
        let n = self.vars.len();
        let mut seen = vec![false; n];
        if precedence.len() != n {
            return Err(AlgebraError::BadPrecedence);
        }
        for &p in precedence {
            if p as usize >= n || seen[p as usize] {
                return Err(AlgebraError::BadPrecedence);
            }
            seen[p as usize] = true;
        }
        let mut map = vec![0; n];
        for (new, &old) in precedence.iter().enumerate() {
            map[old as usize] = new as Letter;
        }
        let vars = precedence
            .iter()
            .map(|&p| self.vars[p as usize].clone())
            .collect();
        Ok((Alphabet::new(vars)?, map))
    }

    pub fn word_to_string(&self, w: &Word) -> String {
        if w.is_empty() {
            return "1".into();
        }
        let names: Vec<&str> = w
            .letters()
            .iter()
            .map(|&l| self.vars[l as usize].name.as_str())
            .collect();
        names.join(" ")
    }
}

fn is_identifier(s: &str) -> bool {
    let mut it = s.chars();
    matches!(it.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && it.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Graded lexicographic order with an explicit precedence on letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialOrder {
    rank: Vec<u32>,
}

impl MonomialOrder {
    /// Precedence equal to the alphabet index order.
    pub fn natural(n: usize) -> Self {
        MonomialOrder {
            rank: (0..n as u32).collect(),
        }
    }

    /// `precedence` lists letters from least to greatest.
    pub fn with_precedence(precedence: &[Letter]) -> Result<Self, AlgebraError> {
        let n = precedence.len();
        let mut rank = vec![u32::MAX; n];
        for (r, &l) in precedence.iter().enumerate() {
            if l as usize >= n || rank[l as usize] != u32::MAX {
                return Err(AlgebraError::BadPrecedence);
            }
            rank[l as usize] = r as u32;
        }
        Ok(MonomialOrder { rank })
    }

    pub fn is_natural(&self) -> bool {
        self.rank.iter().enumerate().all(|(i, &r)| r == i as u32)
    }

    /// Shorter words are smaller; equal lengths compare letter-wise by rank.
    pub fn compare(&self, u: &Word, v: &Word) -> Ordering {
        u.len().cmp(&v.len()).then_with(|| {
            for (a, b) in u.letters().iter().zip(v.letters()) {
                let c = self.rank[*a as usize].cmp(&self.rank[*b as usize]);
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        })
    }
}

/// A noncommutative polynomial: terms sorted by descending word, no zero
/// coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct NCPoly {
    terms: Vec<(Word, CycloScalar)>,
}

impl fmt::Debug for NCPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.terms.iter().map(|(w, c)| format!("{c}*{w:?}")))
            .finish()
    }
}

impl NCPoly {
    pub fn zero() -> Self {
        NCPoly { terms: Vec::new() }
    }

    pub fn monomial(coef: CycloScalar, word: Word) -> Self {
        if coef.is_zero() {
            return NCPoly::zero();
        }
        NCPoly {
            terms: vec![(word, coef)],
        }
    }

    pub fn constant(coef: CycloScalar) -> Self {
        NCPoly::monomial(coef, Word::one())
    }

    /// Wraps terms already sorted descending with nonzero coefficients.
    pub(crate) fn from_sorted_terms(terms: Vec<(Word, CycloScalar)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 > w[1].0));
        debug_assert!(terms.iter().all(|(_, c)| !c.is_zero()));
        NCPoly { terms }
    }

    /// Builds a polynomial from arbitrary terms, combining duplicates.
    pub fn from_terms(terms: impl IntoIterator<Item = (Word, CycloScalar)>) -> Self {
        let mut acc: BTreeMap<Word, CycloScalar> = BTreeMap::new();
        for (w, c) in terms {
            match acc.get_mut(&w) {
                Some(e) => *e = &*e + &c,
                None => {
                    acc.insert(w, c);
                }
            }
        }
        let terms = acc
            .into_iter()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .collect();
        NCPoly { terms }
    }

    pub fn terms(&self) -> &[(Word, CycloScalar)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(Word, CycloScalar)> {
        self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading_word(&self) -> Option<&Word> {
        self.terms.first().map(|(w, _)| w)
    }

    pub fn leading_coeff(&self) -> Option<&CycloScalar> {
        self.terms.first().map(|(_, c)| c)
    }

    pub fn degree(&self) -> usize {
        self.terms.first().map_or(0, |(w, _)| w.len())
    }

    pub fn coeff(&self, w: &Word) -> Option<&CycloScalar> {
        self.terms
            .binary_search_by(|(x, _)| w.cmp(x))
            .ok()
            .map(|i| &self.terms[i].1)
    }

    pub fn mentions(&self, l: Letter) -> bool {
        self.terms.iter().any(|(w, _)| w.letters().contains(&l))
    }

    pub fn max_letter(&self) -> Option<Letter> {
        self.terms
            .iter()
            .flat_map(|(w, _)| w.letters().iter().copied())
            .max()
    }

    pub fn scale(&self, c: &CycloScalar) -> NCPoly {
        if c.is_zero() {
            return NCPoly::zero();
        }
        NCPoly {
            terms: self.terms.iter().map(|(w, a)| (w.clone(), a * c)).collect(),
        }
    }

    /// Divides by the leading coefficient.
    pub fn monic(&self) -> NCPoly {
        match self.leading_coeff() {
            None => NCPoly::zero(),
            Some(c) if c.is_one() => self.clone(),
            Some(c) => self.scale(&c.inv().expect("nonzero leading coefficient")),
        }
    }

    /// `u * self * v`. The order is multiplicative, so term order is kept.
    pub fn sandwich(&self, u: &[Letter], v: &[Letter]) -> NCPoly {
        NCPoly {
            terms: self
                .terms
                .iter()
                .map(|(w, c)| (w.sandwich(u, v), c.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &NCPoly) -> NCPoly {
        self.combine(other, None)
    }

    pub fn sub(&self, other: &NCPoly) -> NCPoly {
        let m1 = match other.terms.first() {
            Some((_, c)) => -c.field().one(),
            None => return self.clone(),
        };
        self.combine(other, Some(&m1))
    }

    pub fn neg(&self) -> NCPoly {
        NCPoly {
            terms: self.terms.iter().map(|(w, c)| (w.clone(), -c)).collect(),
        }
    }

    /// `self - c * u * other * v`, merged in one pass.
    pub fn sub_multiple(
        &self,
        c: &CycloScalar,
        u: &[Letter],
        other: &NCPoly,
        v: &[Letter],
    ) -> NCPoly {
        let neg = -c;
        let scaled = NCPoly {
            terms: other
                .terms
                .iter()
                .map(|(w, a)| (w.sandwich(u, v), a * &neg))
                .collect(),
        };
        self.combine(&scaled, None)
    }

    fn combine(&self, other: &NCPoly, factor: Option<&CycloScalar>) -> NCPoly {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let a = &self.terms;
        let b = &other.terms;
        let fb = |c: &CycloScalar| match factor {
            Some(f) => c * f,
            None => c.clone(),
        };
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push((b[j].0.clone(), fb(&b[j].1)));
                    j += 1;
                }
                Ordering::Equal => {
                    let s = &a[i].1 + &fb(&b[j].1);
                    if !s.is_zero() {
                        out.push((a[i].0.clone(), s));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend(b[j..].iter().map(|(w, c)| (w.clone(), fb(c))));
        NCPoly { terms: out }
    }

    /// Free-algebra product (concatenation of words).
    pub fn mul(&self, other: &NCPoly) -> NCPoly {
        NCPoly::from_terms(self.terms.iter().flat_map(|(w1, c1)| {
            other
                .terms
                .iter()
                .map(move |(w2, c2)| (w1.concat(w2), c1 * c2))
        }))
    }

    /// Removes the final letter from every term; every term must end in `l`.
    pub fn strip_right(&self, l: Letter) -> Option<NCPoly> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (w, c) in &self.terms {
            match w.letters().split_last() {
                Some((&last, rest)) if last == l => {
                    terms.push((Word::from_letters(rest), c.clone()))
                }
                _ => return None,
            }
        }
        Some(NCPoly::from_terms(terms))
    }

    /// Maps every letter through `map`, re-sorting terms.
    pub fn relabel(&self, map: &[Letter]) -> NCPoly {
        NCPoly::from_terms(self.terms.iter().map(|(w, c)| {
            let letters: SmallVec<[Letter; 8]> =
                w.letters().iter().map(|&l| map[l as usize]).collect();
            (Word(letters), c.clone())
        }))
    }
}

/// A free algebra: alphabet plus coefficient field.
#[derive(Debug, Clone)]
pub struct FreeAlgebra {
    alphabet: Arc<Alphabet>,
    field: Arc<CycloField>,
}

impl FreeAlgebra {
    pub fn new(alphabet: Alphabet, field: Arc<CycloField>) -> Self {
        FreeAlgebra {
            alphabet: Arc::new(alphabet),
            field,
        }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn field(&self) -> &Arc<CycloField> {
        &self.field
    }

    pub fn order(&self) -> MonomialOrder {
        MonomialOrder::natural(self.alphabet.len())
    }

    /// The same coefficient field over the alphabet extended by `xi`.
    pub fn with_aux(&self) -> Result<FreeAlgebra, AlgebraError> {
        Ok(FreeAlgebra::new(
            self.alphabet.with_aux()?,
            self.field.clone(),
        ))
    }

    pub fn one(&self) -> NCPoly {
        NCPoly::constant(self.field.one())
    }

    pub fn scalar(&self, c: CycloScalar) -> NCPoly {
        NCPoly::constant(c)
    }

    pub fn int(&self, v: i64) -> NCPoly {
        NCPoly::constant(self.field.from_int(v))
    }

    pub fn letter(&self, l: Letter) -> NCPoly {
        NCPoly::monomial(self.field.one(), Word::letter(l))
    }

    pub fn word(&self, letters: &[Letter]) -> NCPoly {
        NCPoly::monomial(self.field.one(), Word::from_letters(letters))
    }

    pub fn var(&self, name: &str) -> Result<NCPoly, AlgebraError> {
        let l = self
            .alphabet
            .lookup(name)
            .ok_or_else(|| AlgebraError::UnknownVariable(name.to_string()))?;
        Ok(self.letter(l))
    }

    /// Checks that `p` only uses letters and coefficients of this algebra.
    pub fn check(&self, p: &NCPoly) -> Result<(), AlgebraError> {
        for (w, c) in p.terms() {
            if let Some(&l) = w
                .letters()
                .iter()
                .find(|&&l| l as usize >= self.alphabet.len())
            {
                return Err(AlgebraError::LetterOutOfRange(l));
            }
            if c.field().order() != self.field.order() {
                return Err(
                    CycloError::FieldMismatch(self.field.order(), c.field().order()).into(),
                );
            }
        }
        Ok(())
    }

    pub fn multiply(&self, p: &NCPoly, q: &NCPoly) -> Result<NCPoly, AlgebraError> {
        self.check(p)?;
        self.check(q)?;
        Ok(p.mul(q))
    }

    /// The involution: reverses words, applies each letter's adjoint rule
    /// and conjugates coefficients.
    pub fn adjoint(&self, p: &NCPoly) -> NCPoly {
        NCPoly::from_terms(
            p.terms()
                .iter()
                .map(|(w, c)| (self.adjoint_word(w), c.conj())),
        )
    }

    pub fn adjoint_word(&self, w: &Word) -> Word {
        let mut out: SmallVec<[Letter; 8]> = SmallVec::new();
        for &l in w.letters().iter().rev() {
            match self.alphabet.var(l).adjoint {
                AdjointRule::SelfAdjoint => out.push(l),
                AdjointRule::Unitary(m) => {
                    out.extend(std::iter::repeat_n(l, m.saturating_sub(1) as usize))
                }
            }
        }
        Word(out)
    }

    pub fn format(&self, p: &NCPoly) -> String {
        format_poly(&self.alphabet, p)
    }

    pub fn parse(&self, text: &str) -> Result<NCPoly, AlgebraError> {
        parse_poly(&self.alphabet, &self.field, text)
    }
}

fn format_coeff(c: &CycloScalar) -> (bool, String) {
    match c.as_rational() {
        Some(r) => {
            use num_traits::Signed;
            (r.is_negative(), fmt_rational(&r.abs()))
        }
        None => (false, format!("({c})")),
    }
}

/// Renders `p` as `c1 w1 + c2 w2 - ...`; `0` for the zero polynomial.
pub fn format_poly(alphabet: &Alphabet, p: &NCPoly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (w, c)) in p.terms().iter().enumerate() {
        let (neg, mag) = format_coeff(c);
        match (i, neg) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        if w.is_empty() {
            out.push_str(&mag);
        } else {
            if mag != "1" {
                out.push_str(&mag);
                out.push(' ');
            }
            out.push_str(&alphabet.word_to_string(w));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Paren(String),
    Plus,
    Minus,
    Times,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, AlgebraError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let perr = |col: usize, msg: &str| AlgebraError::Parse {
        col: col + 1,
        msg: msg.into(),
    };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            out.push((start, Tok::Plus));
            i += 1;
        } else if c == '-' || c == '\u{2212}' {
            out.push((start, Tok::Minus));
            i += 1;
        } else if c == '*' || c == '\u{b7}' {
            out.push((start, Tok::Times));
            i += 1;
        } else if c == '(' {
            let close = chars[i..]
                .iter()
                .position(|&x| x == ')')
                .ok_or_else(|| perr(start, "unclosed '('"))?;
            let inner: String = chars[i + 1..i + close].iter().collect();
            out.push((start, Tok::Paren(inner)));
            i += close + 1;
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '/') {
                i += 1;
            }
            out.push((start, Tok::Num(chars[start..i].iter().collect())));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else {
            return Err(perr(start, &format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

/// Parses the grammar produced by [`format_poly`]. Words are letters
/// separated by whitespace, `*` or `·`; coefficients are rationals or
/// parenthesised cyclotomic scalars in `z`.
pub fn parse_poly(
    alphabet: &Alphabet,
    field: &Arc<CycloField>,
    text: &str,
) -> Result<NCPoly, AlgebraError> {
    let toks = tokenize(text)?;
    let perr = |col: usize, msg: String| AlgebraError::Parse { col: col + 1, msg };
    if toks.is_empty() {
        return Err(perr(0, "empty polynomial".into()));
    }
    let mut terms = Vec::new();
    let mut i = 0;
    let mut first = true;
    while i < toks.len() {
        let mut negative = false;
        match &toks[i].1 {
            Tok::Plus | Tok::Minus => {
                negative = toks[i].1 == Tok::Minus;
                i += 1;
            }
            _ if first => {}
            _ => return Err(perr(toks[i].0, "expected '+' or '-'".into())),
        }
        first = false;
        let term_col = toks.get(i).map_or(text.len(), |t| t.0);
        let mut coef: Option<CycloScalar> = None;
        match toks.get(i).map(|t| &t.1) {
            Some(Tok::Num(s)) => {
                coef = Some(
                    field
                        .parse_scalar(s)
                        .map_err(|e| perr(term_col, e.to_string()))?,
                );
                i += 1;
            }
            Some(Tok::Paren(s)) => {
                coef = Some(
                    field
                        .parse_scalar(s)
                        .map_err(|e| perr(term_col, e.to_string()))?,
                );
                i += 1;
            }
            _ => {}
        }
        let mut letters: Vec<Letter> = Vec::new();
        let mut expect_letter = false;
        while i < toks.len() {
            match &toks[i].1 {
                Tok::Times => {
                    if expect_letter {
                        return Err(perr(toks[i].0, "doubled '*'".into()));
                    }
                    expect_letter = true;
                    i += 1;
                }
                Tok::Ident(name) => {
                    let l = alphabet
                        .lookup(name)
                        .ok_or_else(|| perr(toks[i].0, format!("unknown variable {name:?}")))?;
                    letters.push(l);
                    expect_letter = false;
                    i += 1;
                }
                Tok::Plus | Tok::Minus => break,
                _ => {
                    return Err(perr(
                        toks[i].0,
                        "unexpected coefficient inside a word".into(),
                    ))
                }
            }
        }
        if expect_letter {
            return Err(perr(term_col, "dangling '*'".into()));
        }
        if coef.is_none() && letters.is_empty() {
            return Err(perr(term_col, "empty term".into()));
        }
        let mut c = coef.unwrap_or_else(|| field.one());
        if negative {
            c = -c;
        }
        terms.push((Word::from_letters(&letters), c));
    }
    Ok(NCPoly::from_terms(terms))
}
