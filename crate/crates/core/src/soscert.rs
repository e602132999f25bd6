//! Sum-of-squares certificates `1 + sum c_j s_j* s_j ∈ I` for real
//! two-sided ideals, found through the Gram matrix method.
//!
//! The float search is never trusted: a rounded rational Gram matrix is
//! solved exactly against the linear constraints, split into weighted
//! squares with nonnegative rational weights, and re-checked by
//! [`check_certificate`] against rules replayed from their derivations.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::sync::Mutex;

use argmin::core::{CostFunction, Error as ArgminError, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::artifact::{parse_poly_at, parse_word, read_header, write_header, ArtifactError, Lines};
use crate::cyclo::rational_to_f64;
use crate::freealg::{FreeAlgebra, NCPoly, Word};
use crate::gbase::{self, export_basis, parse_basis, CompleteOptions, GbError, RewriteSystem};

/// Largest Gram basis accepted by [`setup`].
pub const MAX_GRAM_DIM: usize = 1000;

#[derive(Debug, Error)]
pub enum SosError {
    #[error("the ideal has non-rational coefficients; only real ideals are supported")]
    NotReal,
    #[error("the algebra already carries the marker variable")]
    Marker,
    #[error("Gram basis has {0} words, above the limit {MAX_GRAM_DIM}")]
    TooLarge(usize),
    #[error(transparent)]
    Gb(#[from] GbError),
}

/// Normal words of degree at most `d`, by degree and then letters.
pub fn normal_words(rs: &RewriteSystem, d: usize) -> Vec<Word> {
    if !rs.is_normal(&Word::one()) {
        return Vec::new();
    }
    let letters: Vec<_> = rs.algebra().alphabet().generators().collect();
    let mut out = vec![Word::one()];
    let mut layer = vec![Word::one()];
    for _ in 0..d {
        let mut next = Vec::new();
        for w in &layer {
            for &l in &letters {
                let x = w.concat(&Word::letter(l));
                if rs.is_normal(&x) {
                    next.push(x);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// `x[col] = rhs - sum entries`; entries only name later pivots or free
/// columns.
#[derive(Debug, Clone)]
struct Pivot {
    col: usize,
    rhs: BigRational,
    entries: Vec<(usize, BigRational)>,
}

/// Exact row echelon form of the Gram constraints.
#[derive(Debug, Clone)]
pub struct Echelon {
    ncols: usize,
    pivots: Vec<Pivot>,
    /// Columns left free, ascending.
    pub free: Vec<usize>,
    pub consistent: bool,
}

impl Echelon {
    /// Sparse elimination, shortest row first, pivoting on the column with
    /// the fewest occurrences.
    fn new(ncols: usize, rows: &[Vec<(usize, BigRational)>], rhs: &[BigRational]) -> Self {
        let mut rq: Vec<BTreeMap<usize, BigRational>> = rows
            .iter()
            .map(|r| {
                let mut m: BTreeMap<usize, BigRational> = BTreeMap::new();
                for (c, v) in r {
                    *m.entry(*c).or_insert_with(BigRational::zero) += v;
                }
                m.retain(|_, v| !v.is_zero());
                m
            })
            .collect();
        let mut rb = rhs.to_vec();
        let mut colrows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncols];
        for (r, m) in rq.iter().enumerate() {
            for &c in m.keys() {
                colrows[c].insert(r);
            }
        }
        let mut done = vec![false; rq.len()];
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> = rq
            .iter()
            .enumerate()
            .map(|(r, m)| Reverse((m.len(), r)))
            .collect();
        let mut pivots = Vec::new();
        let mut consistent = true;
        let mut is_pivot = vec![false; ncols];
        while let Some(Reverse((len, r))) = heap.pop() {
            if done[r] || rq[r].len() != len {
                continue;
            }
            done[r] = true;
            if rq[r].is_empty() {
                consistent &= rb[r].is_zero();
                continue;
            }
            let c = *rq[r].keys().min_by_key(|c| colrows[**c].len()).unwrap();
            let prow = std::mem::take(&mut rq[r]);
            let pb = std::mem::take(&mut rb[r]);
            let pv = prow[&c].clone();
            for cc in prow.keys() {
                colrows[*cc].remove(&r);
            }
            let others: Vec<usize> = colrows[c].iter().copied().filter(|&o| !done[o]).collect();
            for o in others {
                let f = &rq[o][&c] / &pv;
                for (cc, v) in &prow {
                    let e = rq[o].entry(*cc).or_insert_with(BigRational::zero);
                    *e -= &f * v;
                    if e.is_zero() {
                        rq[o].remove(cc);
                        colrows[*cc].remove(&o);
                    } else {
                        colrows[*cc].insert(o);
                    }
                }
                rb[o] -= &f * &pb;
                heap.push(Reverse((rq[o].len(), o)));
            }
            is_pivot[c] = true;
            pivots.push(Pivot {
                col: c,
                rhs: &pb / &pv,
                entries: prow
                    .iter()
                    .filter(|(cc, _)| **cc != c)
                    .map(|(cc, v)| (*cc, v / &pv))
                    .collect(),
            });
        }
        let free = (0..ncols).filter(|&c| !is_pivot[c]).collect();
        Echelon {
            ncols,
            pivots,
            free,
            consistent,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// The unique solution with the given free values.
    pub fn solve(&self, free: &[BigRational]) -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); self.ncols];
        for (c, v) in self.free.iter().zip(free) {
            x[*c] = v.clone();
        }
        for p in self.pivots.iter().rev() {
            let mut v = p.rhs.clone();
            for (j, a) in &p.entries {
                if !x[*j].is_zero() {
                    v -= a * &x[*j];
                }
            }
            x[p.col] = v;
        }
        x
    }
}

/// Float copy of an [`Echelon`] for the numeric search.
/// A weight and the sparse coefficients of one square.
type WeightedSquare = (BigRational, Vec<(usize, BigRational)>);

type FloatPivot = (usize, f64, Vec<(usize, f64)>);

struct FloatAffine {
    ncols: usize,
    /// `(column, constant, [(free index, coefficient)])`
    pivots: Vec<FloatPivot>,
    free: Vec<usize>,
}

impl FloatAffine {
    fn new(e: &Echelon) -> Self {
        FloatAffine {
            ncols: e.ncols,
            pivots: e
                .pivots
                .iter()
                .map(|p| {
                    let entries = p
                        .entries
                        .iter()
                        .map(|(c, v)| (*c, rational_to_f64(v)))
                        .collect();
                    (p.col, rational_to_f64(&p.rhs), entries)
                })
                .collect(),
            free: e.free.clone(),
        }
    }

    fn expand(&self, f: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for (c, v) in self.free.iter().zip(f) {
            x[*c] = *v;
        }
        for (col, rhs, entries) in self.pivots.iter().rev() {
            x[*col] = rhs - entries.iter().map(|(j, a)| a * x[*j]).sum::<f64>();
        }
        x
    }

    /// Adjoint of `expand`: turns a gradient over all columns into one over
    /// the free columns.
    fn pullback(&self, mut g: Vec<f64>) -> Vec<f64> {
        for (col, _, entries) in &self.pivots {
            let gc = g[*col];
            if gc != 0.0 {
                for (j, a) in entries {
                    g[*j] -= a * gc;
                }
            }
        }
        self.free.iter().map(|c| g[*c]).collect()
    }
}

/// Linear constraints `NF(1 + sum M_ij w_i* w_j) = 0` on a symmetric `M`.
#[derive(Debug, Clone)]
pub struct GramProblem {
    pub basis: RewriteSystem,
    pub degree: usize,
    pub words: Vec<Word>,
    /// Unknowns: entries `(i, j)` with `i <= j`.
    pub columns: Vec<(usize, usize)>,
    /// Constraint words, the empty word first.
    pub rows: Vec<Word>,
    pub constraints: Vec<Vec<(usize, BigRational)>>,
    pub rhs: Vec<BigRational>,
    pub echelon: Echelon,
}

impl GramProblem {
    pub fn dimension(&self) -> usize {
        self.words.len()
    }

    /// The symmetric matrix with the given upper-triangular entries.
    pub fn matrix<T: Clone>(&self, x: &[T]) -> Vec<Vec<T>> {
        let n = self.words.len();
        let mut m = vec![Vec::with_capacity(n); n];
        let mut pos = vec![vec![0usize; n]; n];
        for (k, &(i, j)) in self.columns.iter().enumerate() {
            pos[i][j] = k;
            pos[j][i] = k;
        }
        for i in 0..n {
            for j in 0..n {
                m[i].push(x[pos[i][j]].clone());
            }
        }
        m
    }
}

fn rational_coef(c: &crate::cyclo::CycloScalar) -> Result<BigRational, SosError> {
    c.as_rational().cloned().ok_or(SosError::NotReal)
}

/// Builds the Gram constraints for degree `d` over a rewriting system of
/// the ideal.
pub fn setup(rs: &RewriteSystem, d: usize) -> Result<GramProblem, SosError> {
    let a = rs.algebra();
    if a.alphabet().aux().is_some() {
        return Err(SosError::Marker);
    }
    for r in rs.rules() {
        for (_, c) in r.terms() {
            rational_coef(c)?;
        }
    }
    let words = normal_words(rs, d);
    let n = words.len();
    if n > MAX_GRAM_DIM {
        return Err(SosError::TooLarge(n));
    }
    let adj: Vec<Word> = words.iter().map(|w| a.adjoint_word(w)).collect();
    let one = a.field().one();
    let mut rows = vec![Word::one()];
    let mut constraints: Vec<Vec<(usize, BigRational)>> = vec![Vec::new()];
    let mut row_of: HashMap<Word, usize> = HashMap::from([(Word::one(), 0)]);
    let mut columns = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut p = NCPoly::monomial(one.clone(), adj[i].concat(&words[j]));
            if i != j {
                p = p.add(&NCPoly::monomial(one.clone(), adj[j].concat(&words[i])));
            }
            let col = columns.len();
            columns.push((i, j));
            for (w, c) in rs.normal_form(&p).terms() {
                let r = *row_of.entry(w.clone()).or_insert_with(|| {
                    rows.push(w.clone());
                    constraints.push(Vec::new());
                    rows.len() - 1
                });
                constraints[r].push((col, rational_coef(c)?));
            }
        }
    }
    let mut rhs = vec![BigRational::zero(); rows.len()];
    for (w, c) in rs.normal_form(&a.one()).terms() {
        let r = *row_of.entry(w.clone()).or_insert_with(|| {
            rows.push(w.clone());
            constraints.push(Vec::new());
            rhs.push(BigRational::zero());
            rows.len() - 1
        });
        rhs[r] = -rational_coef(c)?;
    }
    let echelon = Echelon::new(columns.len(), &constraints, &rhs);
    Ok(GramProblem {
        basis: rs.clone(),
        degree: d,
        words,
        columns,
        rows,
        constraints,
        rhs,
        echelon,
    })
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u64,
    /// Eigenvalue margins to aim for, tried in order.
    pub margins: Vec<f64>,
    pub memory: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 50_000,
            margins: vec![1e-2, 1e-3, 1e-4],
            memory: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FloatSolution {
    /// Values of the free columns.
    pub free: Vec<f64>,
    pub gram: DMatrix<f64>,
    pub min_eig: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(FloatSolution),
    Infeasible(String),
    Undetermined { best_distance: f64, iterations: u64 },
}

fn dense(n: usize, cols: &[(usize, usize)], x: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (k, &(i, j)) in cols.iter().enumerate() {
        m[(i, j)] = x[k];
        m[(j, i)] = x[k];
    }
    m
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

type Evaluated = (Vec<f64>, f64, Vec<f64>);

/// Squared Frobenius distance from `M(f)` to `{M >= margin I}`.
struct ConeDistance<'a> {
    aff: &'a FloatAffine,
    cols: &'a [(usize, usize)],
    n: usize,
    margin: f64,
    /// Last point evaluated, with its cost and gradient.
    cache: Mutex<Option<Evaluated>>,
    best: &'a Mutex<(f64, Vec<f64>)>,
}

impl ConeDistance<'_> {
    fn eval(&self, f: &[f64]) -> (f64, Vec<f64>) {
        if let Some((p, c, g)) = self.cache.lock().unwrap().as_ref() {
            if p == f {
                return (*c, g.clone());
            }
        }
        let x = self.aff.expand(f);
        let eig = SymmetricEigen::new(dense(self.n, self.cols, &x));
        let mut cost = 0.0;
        let mut gm = DMatrix::<f64>::zeros(self.n, self.n);
        for k in 0..self.n {
            let neg = (eig.eigenvalues[k] - self.margin).min(0.0);
            if neg < 0.0 {
                cost += neg * neg;
                let v = eig.eigenvectors.column(k);
                gm.ger(2.0 * neg, &v, &v, 1.0);
            }
        }
        let gx: Vec<f64> = self
            .cols
            .iter()
            .map(|&(i, j)| if i == j { gm[(i, i)] } else { 2.0 * gm[(i, j)] })
            .collect();
        let grad = self.aff.pullback(gx);
        {
            let mut best = self.best.lock().unwrap();
            if cost < best.0 {
                *best = (cost, f.to_vec());
            }
        }
        *self.cache.lock().unwrap() = Some((f.to_vec(), cost, grad.clone()));
        (cost, grad)
    }
}

impl CostFunction for ConeDistance<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Vec<f64>) -> Result<f64, ArgminError> {
        Ok(self.eval(p).0)
    }
}

impl Gradient for ConeDistance<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, p: &Vec<f64>) -> Result<Vec<f64>, ArgminError> {
        Ok(self.eval(p).1)
    }
}

/// Searches for a positive definite Gram matrix on the constraint set by
/// minimizing the distance to a shifted PSD cone over the free columns.
pub fn solve_feasibility(g: &GramProblem, opts: &SolveOptions) -> Feasibility {
    let e = &g.echelon;
    if !e.consistent {
        return Feasibility::Infeasible("the linear constraints are inconsistent".into());
    }
    let n = g.dimension();
    let aff = FloatAffine::new(e);
    if e.free.is_empty() {
        let x = e.solve(&[]);
        let m = g.matrix(&x);
        return match ldl_psd(&m) {
            Ok(_) => {
                let xf: Vec<f64> = x.iter().map(rational_to_f64).collect();
                let gram = dense(n, &g.columns, &xf);
                Feasibility::Feasible(FloatSolution {
                    free: vec![],
                    min_eig: min_eigenvalue(&gram),
                    gram,
                    iterations: 0,
                })
            }
            Err(_) => Feasibility::Infeasible(
                "the constraints force a single Gram matrix, which is not positive semidefinite"
                    .into(),
            ),
        };
    }
    let mut start = vec![0.0; e.free.len()];
    for (k, c) in e.free.iter().enumerate() {
        let (i, j) = g.columns[*c];
        if i == j {
            start[k] = 1.0;
        }
    }
    let mut best_distance = f64::INFINITY;
    let mut iterations = 0;
    for &margin in &opts.margins {
        let best = Mutex::new((f64::INFINITY, start.clone()));
        let problem = ConeDistance {
            aff: &aff,
            cols: &g.columns,
            n,
            margin,
            cache: Mutex::new(None),
            best: &best,
        };
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), opts.memory)
            .with_tolerance_grad(opts.tol * 1e-3)
            .and_then(|s| s.with_tolerance_cost(opts.tol * opts.tol * 1e-2));
        let Ok(solver) = solver else { break };
        let run = Executor::new(problem, solver)
            .configure(|s| {
                s.param(start.clone())
                    .max_iters(opts.max_iter)
                    .target_cost(0.0)
            })
            .run();
        if let Ok(r) = &run {
            iterations += r.state().get_iter();
        }
        let (cost, f) = best.into_inner().unwrap();
        best_distance = best_distance.min(cost.sqrt());
        let gram = dense(n, &g.columns, &aff.expand(&f));
        let min_eig = min_eigenvalue(&gram);
        if min_eig >= margin / 2.0 {
            return Feasibility::Feasible(FloatSolution {
                free: f,
                gram,
                min_eig,
                iterations,
            });
        }
        start = f;
    }
    Feasibility::Undetermined {
        best_distance,
        iterations,
    }
}

/// Exact symmetric elimination proving `M` positive semidefinite. Returns
/// the diagonal of `M = L D L^T`; a zero pivot is accepted only when its
/// whole remaining row vanishes.
pub fn ldl_psd(m: &[Vec<BigRational>]) -> Result<Vec<BigRational>, String> {
    let n = m.len();
    // fraction-free elimination on an integer multiple of M, upper triangle only
    let mut den = BigInt::one();
    for row in m {
        for v in row {
            den = num_integer::Integer::lcm(&den, v.denom());
        }
    }
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|row| row.iter().map(|v| v.numer() * (&den / v.denom())).collect())
        .collect();
    let mut prev = BigInt::one();
    let mut diag = Vec::with_capacity(n);
    for k in 0..n {
        let p = a[k][k].clone();
        if p.is_negative() {
            return Err(format!("negative pivot at index {k}"));
        }
        if p.is_zero() {
            if (k + 1..n).any(|j| !a[k][j].is_zero()) {
                return Err(format!("zero pivot with nonzero row at index {k}"));
            }
            diag.push(BigRational::zero());
            continue;
        }
        for i in k + 1..n {
            if a[k][i].is_zero() {
                for j in i..n {
                    let v = &a[i][j] * &p;
                    a[i][j] = v / &prev;
                }
                continue;
            }
            for j in i..n {
                let v = &a[i][j] * &p - &a[k][i] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        diag.push(BigRational::new(p.clone(), prev.clone() * &den));
        prev = p;
    }
    Ok(diag)
}

#[derive(Debug, Clone)]
pub struct RationalizeOptions {
    /// Free columns are rounded to multiples of `2^-k`, for each `k` in turn.
    pub exponents: Vec<u32>,
    /// Precisions tried for the rounded Cholesky factor.
    pub factor_exponents: Vec<u32>,
}

impl Default for RationalizeOptions {
    fn default() -> Self {
        RationalizeOptions {
            exponents: vec![10, 12, 16, 20, 24, 32],
            factor_exponents: vec![24, 32, 40],
        }
    }
}

/// A certificate that `-1 ∈ SOS + I`: `1 + sum c_j s_j* s_j` reduces to zero
/// under rules derived from `generators`.
#[derive(Debug, Clone)]
pub struct SosCertificate {
    pub algebra: FreeAlgebra,
    pub degree: usize,
    pub generators: Vec<NCPoly>,
    /// Rules with a derivation trace from `generators`.
    pub basis: RewriteSystem,
    pub words: Vec<Word>,
    /// Exact symmetric Gram matrix over `words`.
    pub gram: Vec<Vec<BigRational>>,
    /// Weights `c_j >= 0` and polynomials `s_j`.
    pub squares: Vec<(BigRational, NCPoly)>,
}

#[derive(Debug, Clone)]
pub struct RationalizeFailure {
    pub best_margin: f64,
    pub reason: String,
}

fn round_to(v: f64, k: u32) -> BigRational {
    let s = (k as f64).exp2();
    let num = BigRational::from_float((v * s).round()).unwrap_or_else(BigRational::zero);
    num / BigRational::from_integer(BigInt::one() << k)
}

/// Splits an exact positive definite `M` as `L L^T + R` with `L` a rounded
/// Cholesky factor and `R` diagonally dominant, and reads off weighted
/// squares `sum c_j s_j s_j^T = M`.
fn weighted_squares(
    m: &[Vec<BigRational>],
    min_eig: f64,
    factor_exponents: &[u32],
) -> Option<Vec<WeightedSquare>> {
    let n = m.len();
    let shift = min_eig / 2.0;
    let mf = DMatrix::from_fn(n, n, |i, j| {
        rational_to_f64(&m[i][j]) - if i == j { shift } else { 0.0 }
    });
    let chol = mf.cholesky()?;
    let l = chol.l();
    for &s in factor_exponents {
        let scale = (s as f64).exp2();
        let li: Vec<Vec<i128>> = (0..n)
            .map(|i| {
                (0..=i)
                    .map(|k| (l[(i, k)] * scale).round() as i128)
                    .collect()
            })
            .collect();
        let denom = BigRational::from_integer(BigInt::one() << (2 * s));
        let mut r = vec![vec![BigRational::zero(); n]; n];
        for i in 0..n {
            for j in 0..=i {
                let dot: i128 = (0..=j).map(|k| li[i][k] * li[j][k]).sum();
                let v = &m[i][j] - BigRational::from_integer(BigInt::from(dot)) / &denom;
                r[j][i] = v.clone();
                r[i][j] = v;
            }
        }
        let dominant = (0..n).all(|i| {
            let off: BigRational = (0..n).filter(|&j| j != i).map(|j| r[i][j].abs()).sum();
            r[i][i] >= off
        });
        if !dominant {
            continue;
        }
        let unit = BigRational::from_integer(BigInt::one() << s);
        let mut out = Vec::new();
        for k in 0..n {
            let terms: Vec<(usize, BigRational)> = (k..n)
                .filter(|&i| li[i][k] != 0)
                .map(|i| (i, BigRational::from_integer(BigInt::from(li[i][k])) / &unit))
                .collect();
            if !terms.is_empty() {
                out.push((BigRational::one(), terms));
            }
        }
        for i in 0..n {
            let mut slack = r[i][i].clone();
            for j in 0..n {
                if j != i {
                    slack -= r[i][j].abs();
                }
            }
            for j in i + 1..n {
                if !r[i][j].is_zero() {
                    let sign = if r[i][j].is_negative() {
                        -BigRational::one()
                    } else {
                        BigRational::one()
                    };
                    out.push((r[i][j].abs(), vec![(i, BigRational::one()), (j, sign)]));
                }
            }
            if slack.is_positive() {
                out.push((slack, vec![(i, BigRational::one())]));
            }
        }
        return Some(out);
    }
    None
}

/// Rounds a float solution to an exact certificate, escalating precision.
pub fn rationalize_and_verify(
    sol: &FloatSolution,
    g: &GramProblem,
    opts: &RationalizeOptions,
) -> Result<SosCertificate, RationalizeFailure> {
    let e = &g.echelon;
    let a = g.basis.algebra();
    let mut best = f64::NEG_INFINITY;
    let mut reason = String::from("empty precision schedule");
    let Some(trace) = g.basis.trace() else {
        return Err(RationalizeFailure {
            best_margin: best,
            reason: "the rewriting system carries no derivation trace".into(),
        });
    };
    for &k in &opts.exponents {
        let free: Vec<BigRational> = sol.free.iter().map(|v| round_to(*v, k)).collect();
        let x = e.solve(&free);
        let m = g.matrix(&x);
        let n = m.len();
        let mf = DMatrix::from_fn(n, n, |i, j| rational_to_f64(&m[i][j]));
        let lam = min_eigenvalue(&mf);
        best = best.max(lam);
        if lam <= 0.0 {
            reason = format!("rounded Gram matrix has eigenvalue {lam:.3e}");
            continue;
        }
        let Some(squares) = weighted_squares(&m, lam, &opts.factor_exponents) else {
            reason = "rounded factor leaves a remainder that is not diagonally dominant".into();
            continue;
        };
        let squares = squares
            .into_iter()
            .map(|(c, terms)| {
                let p = NCPoly::from_terms(
                    terms
                        .into_iter()
                        .map(|(i, v)| (g.words[i].clone(), a.field().rational(v))),
                );
                (c, p)
            })
            .collect();
        let cert = SosCertificate {
            algebra: a.clone(),
            degree: g.degree,
            generators: trace.inputs.clone(),
            basis: g.basis.clone(),
            words: g.words.clone(),
            gram: m,
            squares,
        };
        match check_certificate(&cert) {
            Ok(_) => return Ok(cert),
            Err(err) => reason = err,
        }
    }
    Err(RationalizeFailure {
        best_margin: best,
        reason,
    })
}

/// Sum of `c * NF(w)` over a linear combination of words.
fn reduce_linear(
    rs: &RewriteSystem,
    terms: HashMap<Word, BigRational>,
) -> Result<HashMap<Word, BigRational>, String> {
    let one = rs.algebra().field().one();
    let mut out: HashMap<Word, BigRational> = HashMap::new();
    for (w, c) in terms {
        if c.is_zero() {
            continue;
        }
        for (v, d) in rs.normal_form(&NCPoly::monomial(one.clone(), w)).terms() {
            let d = d.as_rational().ok_or("non-rational normal form")?;
            *out.entry(v.clone()).or_insert_with(BigRational::zero) += &c * d;
        }
    }
    out.retain(|_, v| !v.is_zero());
    Ok(out)
}

/// Common denominator and integer numerators of a square, when they all fit in `i64`.
fn integer_terms(terms: &[(usize, BigRational)]) -> Option<(BigInt, Vec<(usize, i64)>)> {
    let mut den = BigInt::one();
    for (_, v) in terms {
        den = den.lcm(v.denom());
    }
    let nums = terms
        .iter()
        .map(|(k, v)| (v.numer() * (&den / v.denom())).to_i64().map(|n| (*k, n)))
        .collect::<Option<Vec<_>>>()?;
    Some((den, nums))
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub rules: usize,
    pub squares: usize,
    pub dimension: usize,
}

/// Re-checks a certificate from scratch: replays the rule derivations,
/// reduces `1 + sum M_ij w_i* w_j` and `1 + sum c_j s_j* s_j` to zero, and
/// re-factors `M`.
pub fn check_certificate(c: &SosCertificate) -> Result<CheckReport, String> {
    let a = &c.algebra;
    let trace = c
        .basis
        .trace()
        .ok_or("certificate basis has no derivation trace")?;
    if trace.inputs != c.generators {
        return Err("derivation inputs differ from the stated generators".into());
    }
    for g in &c.generators {
        a.check(g).map_err(|e| e.to_string())?;
    }
    let replayed = gbase::replay_trace(trace)?;
    if replayed.as_slice() != c.basis.rules() {
        return Err("replayed rules differ from the stated rules".into());
    }
    let rs = RewriteSystem::from_rules(a.clone(), replayed, c.basis.status(), c.basis.cap());
    let n = c.words.len();
    if c.gram.len() != n || c.gram.iter().any(|r| r.len() != n) {
        return Err("Gram matrix shape does not match the word list".into());
    }
    for i in 0..n {
        for j in 0..i {
            if c.gram[i][j] != c.gram[j][i] {
                return Err(format!("Gram matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    let adj: Vec<Word> = c.words.iter().map(|w| a.adjoint_word(w)).collect();
    let mut poly: HashMap<Word, BigRational> = HashMap::from([(Word::one(), BigRational::one())]);
    for i in 0..n {
        for j in 0..n {
            if !c.gram[i][j].is_zero() {
                *poly
                    .entry(adj[i].concat(&c.words[j]))
                    .or_insert_with(BigRational::zero) += &c.gram[i][j];
            }
        }
    }
    if let Some((w, v)) = reduce_linear(&rs, poly)?.into_iter().next() {
        return Err(format!(
            "1 + W* M W does not reduce to zero: coefficient {v} at {}",
            a.alphabet().word_to_string(&w)
        ));
    }
    ldl_psd(&c.gram).map_err(|e| format!("Gram matrix is not positive semidefinite: {e}"))?;

    // the squares, expanded independently of M
    let mut index: HashMap<Word, usize> = HashMap::new();
    let mut table: Vec<Word> = Vec::new();
    let mut parsed: Vec<(&BigRational, Vec<(usize, BigRational)>)> = Vec::new();
    for (w, s) in &c.squares {
        if w.is_negative() {
            return Err("negative square weight".into());
        }
        let mut terms = Vec::new();
        for (word, coef) in s.terms() {
            let v = coef
                .as_rational()
                .ok_or("non-rational square coefficient")?
                .clone();
            let k = *index.entry(word.clone()).or_insert_with(|| {
                table.push(word.clone());
                table.len() - 1
            });
            terms.push((k, v));
        }
        parsed.push((w, terms));
    }
    let t = table.len();
    let mut acc = vec![BigRational::zero(); t * t];
    // Long squares share a handful of scales (w / den^2), so their products are
    // summed as machine integers per scale and only converted once.
    let mut groups: HashMap<BigRational, Vec<i128>> = HashMap::new();
    for (w, terms) in &parsed {
        let small = if terms.len() > 8 {
            integer_terms(terms)
        } else {
            None
        };
        let Some((den, nums)) = small else {
            for (p, u) in terms {
                let wu = *w * u;
                for (q, v) in terms {
                    acc[p * t + q] += &wu * v;
                }
            }
            continue;
        };
        let scale = *w / BigRational::from_integer(&den * &den);
        let g = groups
            .entry(scale.clone())
            .or_insert_with(|| vec![0; t * t]);
        for &(p, a) in &nums {
            for &(q, b) in &nums {
                let cell = &mut g[p * t + q];
                match cell.checked_add(a as i128 * b as i128) {
                    Some(v) => *cell = v,
                    None => {
                        acc[p * t + q] +=
                            &scale * BigRational::from_integer(BigInt::from(a as i128 * b as i128));
                    }
                }
            }
        }
    }
    for (scale, g) in groups {
        for (cell, v) in acc.iter_mut().zip(g) {
            if v != 0 {
                *cell += &scale * BigRational::from_integer(BigInt::from(v));
            }
        }
    }
    let tadj: Vec<Word> = table.iter().map(|w| a.adjoint_word(w)).collect();
    let mut poly: HashMap<Word, BigRational> = HashMap::from([(Word::one(), BigRational::one())]);
    for p in 0..t {
        for q in 0..t {
            let v = &acc[p * t + q];
            if !v.is_zero() {
                *poly
                    .entry(tadj[p].concat(&table[q]))
                    .or_insert_with(BigRational::zero) += v;
            }
        }
    }
    if let Some((w, v)) = reduce_linear(&rs, poly)?.into_iter().next() {
        return Err(format!(
            "1 + sum of squares does not reduce to zero: coefficient {v} at {}",
            a.alphabet().word_to_string(&w)
        ));
    }
    Ok(CheckReport {
        rules: rs.rules().len(),
        squares: c.squares.len(),
        dimension: n,
    })
}

#[derive(Debug, Clone)]
pub struct SosOptions {
    pub degree: usize,
    pub cap: usize,
    pub solve: SolveOptions,
    pub rationalize: RationalizeOptions,
}

impl Default for SosOptions {
    fn default() -> Self {
        SosOptions {
            degree: 2,
            cap: 6,
            solve: SolveOptions::default(),
            rationalize: RationalizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SosOutcome {
    Certificate(Box<SosCertificate>),
    Inconclusive(String),
}

/// The full pipeline: traced completion, Gram setup, float search,
/// rounding and exact check.
pub fn search(
    algebra: &FreeAlgebra,
    generators: &[NCPoly],
    opts: &SosOptions,
) -> Result<SosOutcome, SosError> {
    let rs = gbase::complete_with(
        algebra,
        generators,
        opts.cap,
        CompleteOptions {
            trace: true,
            ..Default::default()
        },
    )?;
    let g = setup(&rs, opts.degree)?;
    match solve_feasibility(&g, &opts.solve) {
        Feasibility::Feasible(sol) => match rationalize_and_verify(&sol, &g, &opts.rationalize) {
            Ok(c) => Ok(SosOutcome::Certificate(Box::new(c))),
            Err(f) => Ok(SosOutcome::Inconclusive(format!(
                "rounding failed ({}); best eigenvalue {:.3e}",
                f.reason, f.best_margin
            ))),
        },
        Feasibility::Infeasible(why) => Ok(SosOutcome::Inconclusive(format!(
            "degree {}: {why}",
            opts.degree
        ))),
        Feasibility::Undetermined { best_distance, .. } => Ok(SosOutcome::Inconclusive(format!(
            "degree {}: no positive definite Gram matrix found (distance {best_distance:.3e})",
            opts.degree
        ))),
    }
}

const SOS_KIND: &str = "sos";

pub fn export_certificate(c: &SosCertificate) -> String {
    let a = &c.algebra;
    let mut out = String::new();
    write_header(&mut out, SOS_KIND, a);
    let _ = writeln!(out, "degree {}", c.degree);
    let _ = writeln!(out, "generators {}", c.generators.len());
    for g in &c.generators {
        let _ = writeln!(out, "gen {}", a.format(g));
    }
    let basis = export_basis(&c.basis);
    let _ = writeln!(out, "basis {}", basis.lines().count());
    out += &basis;
    let _ = writeln!(out, "words {}", c.words.len());
    for w in &c.words {
        let _ = writeln!(out, "w {}", a.alphabet().word_to_string(w));
    }
    let n = c.words.len();
    let nnz = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !c.gram[i][j].is_zero())
        .count();
    let _ = writeln!(out, "gram {nnz}");
    for i in 0..n {
        for j in i..n {
            if !c.gram[i][j].is_zero() {
                let _ = writeln!(out, "g {i} {j} {}", c.gram[i][j]);
            }
        }
    }
    let _ = writeln!(out, "squares {}", c.squares.len());
    for (w, s) in &c.squares {
        let _ = writeln!(out, "sq {w} | {}", a.format(s));
    }
    out
}

pub fn parse_certificate(text: &str) -> Result<SosCertificate, ArtifactError> {
    let mut lines = Lines::new(text);
    let algebra = read_header(&mut lines, SOS_KIND)?;
    let degree = lines.expect_count("degree")?;
    let ng = lines.expect_count("generators")?;
    let mut generators = Vec::with_capacity(ng.min(1 << 12));
    for _ in 0..ng {
        let rest = lines.expect("gen")?;
        generators.push(parse_poly_at(&lines, &algebra, rest)?);
    }
    let nb = lines.expect_count("basis")?;
    let start = lines.err("").line;
    let mut chunk = String::new();
    for _ in 0..nb {
        let (_, l) = lines
            .next_line()
            .ok_or_else(|| lines.err("truncated embedded basis"))?;
        chunk.push_str(l);
        chunk.push('\n');
    }
    let basis = parse_basis(&chunk).map_err(|e| ArtifactError {
        line: start + e.line,
        msg: format!("embedded basis: {}", e.msg),
    })?;
    if basis.algebra().alphabet() != algebra.alphabet()
        || basis.algebra().field().order() != algebra.field().order()
    {
        return Err(lines.err("embedded basis is over a different algebra"));
    }
    let nw = lines.expect_count("words")?;
    if nw > MAX_GRAM_DIM {
        return Err(lines.err("too many words"));
    }
    let mut words = Vec::with_capacity(nw);
    for _ in 0..nw {
        let rest = lines.expect("w")?;
        words.push(parse_word(algebra.alphabet(), rest).map_err(|e| lines.err(e))?);
    }
    let nnz = lines.expect_count("gram")?;
    let mut gram = vec![vec![BigRational::zero(); nw]; nw];
    for _ in 0..nnz {
        let rest = lines.expect("g")?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(lines.err("expected 'g i j value'"));
        }
        let i: usize = parts[0].parse().map_err(|_| lines.err("bad row index"))?;
        let j: usize = parts[1]
            .parse()
            .map_err(|_| lines.err("bad column index"))?;
        if i >= nw || j >= nw {
            return Err(lines.err("Gram index out of range"));
        }
        let v: BigRational = parts[2].parse().map_err(|_| lines.err("bad rational"))?;
        gram[i][j] = v.clone();
        gram[j][i] = v;
    }
    let ns = lines.expect_count("squares")?;
    let mut squares = Vec::with_capacity(ns.min(1 << 16));
    for _ in 0..ns {
        let rest = lines.expect("sq")?;
        let (w, p) = rest
            .split_once('|')
            .ok_or_else(|| lines.err("expected 'sq weight | poly'"))?;
        let w: BigRational = w.trim().parse().map_err(|_| lines.err("bad weight"))?;
        squares.push((w, parse_poly_at(&lines, &algebra, p.trim())?));
    }
    lines.finish()?;
    Ok(SosCertificate {
        algebra,
        degree,
        generators,
        basis,
        words,
        gram,
        squares,
    })
}

/// Smallest eigenvalue of the exact Gram matrix, in floating point.
pub fn gram_min_eigenvalue(c: &SosCertificate) -> f64 {
    let n = c.words.len();
    min_eigenvalue(&DMatrix::from_fn(n, n, |i, j| {
        c.gram[i][j].to_f64().unwrap_or(f64::NAN)
    }))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::cyclo::CycloField;
    use crate::freealg::{AdjointRule, Alphabet, VarRole, Variable};
    use crate::gamealg::{encode_coloring, Graph};

    fn one_hermitian() -> FreeAlgebra {
        let role = VarRole::Game {
            player: 0,
            question: 0,
            label: None,
        };
        let x = Variable::new("x", role, AdjointRule::SelfAdjoint);
        FreeAlgebra::new(Alphabet::new(vec![x]).unwrap(), CycloField::new(1).unwrap())
    }

    fn traced(a: &FreeAlgebra, gens: &[NCPoly]) -> RewriteSystem {
        gbase::complete_with(
            a,
            gens,
            6,
            CompleteOptions {
                trace: true,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn triangle(colors: usize) -> (FreeAlgebra, Vec<NCPoly>) {
        let c = encode_coloring(
            &Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap(),
            colors,
        )
        .unwrap();
        (c.ua.algebra.clone(), c.generators())
    }

    #[test]
    fn degree_zero_is_infeasible() {
        let (a, gens) = triangle(3);
        let g = setup(&traced(&a, &gens), 0).unwrap();
        assert_eq!(g.words, vec![Word::one()]);
        assert!(matches!(
            solve_feasibility(&g, &SolveOptions::default()),
            Feasibility::Infeasible(_)
        ));
    }

    #[test]
    fn x_squared_plus_one() {
        let a = one_hermitian();
        let rs = traced(&a, &[a.parse("x x + 1").unwrap()]);
        let g = setup(&rs, 1).unwrap();
        assert_eq!(g.dimension(), 2);
        // M = diag(0, 1) is exact: 1 + x x reduces to 0
        let Feasibility::Feasible(sol) = solve_feasibility(&g, &SolveOptions::default()) else {
            panic!("toy problem should be feasible");
        };
        let c = rationalize_and_verify(&sol, &g, &RationalizeOptions::default()).unwrap();
        check_certificate(&c).unwrap();
    }

    #[test]
    fn negative_eigenvalue_fails_rounding() {
        let a = one_hermitian();
        let rs = traced(&a, &[a.parse("x x + 1").unwrap()]);
        let g = setup(&rs, 1).unwrap();
        assert_eq!(g.echelon.free.len(), 1);
        // the free entry is on the diagonal; a slightly negative value there
        // gives a Gram matrix with a negative eigenvalue after any rounding
        let (i, j) = g.columns[g.echelon.free[0]];
        assert_eq!(i, j);
        let sol = FloatSolution {
            free: vec![-1e-12],
            gram: DMatrix::zeros(2, 2),
            min_eig: -1e-12,
            iterations: 0,
        };
        let err = rationalize_and_verify(&sol, &g, &RationalizeOptions::default()).unwrap_err();
        assert!(err.best_margin <= 0.0);
    }

    #[test]
    fn constraint_rows_are_the_reduced_products() {
        let (a, gens) = triangle(3);
        let rs = traced(&a, &gens);
        let g = setup(&rs, 2).unwrap();
        let mut seen: HashSet<Word> = HashSet::from([Word::one()]);
        for u in &g.words {
            for v in &g.words {
                let p = NCPoly::monomial(a.field().one(), a.adjoint_word(u).concat(v));
                seen.extend(rs.normal_form(&p).terms().iter().map(|(w, _)| w.clone()));
            }
        }
        assert_eq!(g.rows.len(), seen.len());
        assert_eq!(g.rows.iter().cloned().collect::<HashSet<_>>(), seen);
    }

    #[test]
    fn triangle_two_colors_has_certificate() {
        // 1 already lies in the ideal, so the empty sum certifies
        let (a, gens) = triangle(2);
        let opts = SosOptions {
            degree: 1,
            ..SosOptions::default()
        };
        let SosOutcome::Certificate(c) = search(&a, &gens, &opts).unwrap() else {
            panic!("triangle is not 2-colorable");
        };
        assert!(c.words.is_empty() && c.squares.is_empty());
        check_certificate(&c).unwrap();
        let text = export_certificate(&c);
        let back = parse_certificate(&text).unwrap();
        assert_eq!(export_certificate(&back), text);
        check_certificate(&back).unwrap();
    }

    #[test]
    fn tampered_certificate_is_rejected() {
        let a = one_hermitian();
        let opts = SosOptions {
            degree: 1,
            ..SosOptions::default()
        };
        let SosOutcome::Certificate(c) = search(&a, &[a.parse("x x + 1").unwrap()], &opts).unwrap()
        else {
            panic!("expected a certificate");
        };
        let text = export_certificate(&c);
        assert_eq!(export_certificate(&parse_certificate(&text).unwrap()), text);
        let mut bad = (*c).clone();
        bad.squares[0].0 += q(1, 3);
        assert!(check_certificate(&bad).is_err());
        let mut bad = (*c).clone();
        bad.squares[0].0 = -bad.squares[0].0.clone();
        assert!(check_certificate(&bad).is_err());
        let mut bad = (*c).clone();
        bad.generators[0] = a.parse("x x + 2").unwrap();
        assert!(check_certificate(&bad).is_err());
    }

    #[test]
    fn triangle_three_colors_is_inconclusive() {
        let (a, gens) = triangle(3);
        let opts = SosOptions {
            degree: 1,
            ..SosOptions::default()
        };
        assert!(matches!(
            search(&a, &gens, &opts).unwrap(),
            SosOutcome::Inconclusive(_)
        ));
    }

    #[test]
    fn ldl_accepts_and_rejects() {
        let psd = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(1, 2)]];
        assert!(ldl_psd(&psd).is_ok());
        let indefinite = vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(1, 1)]];
        assert!(ldl_psd(&indefinite).is_err());
        let zero_pivot = vec![vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]];
        assert!(ldl_psd(&zero_pivot).is_err());
        let singular = vec![vec![q(0, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]];
        assert!(ldl_psd(&singular).is_ok());
    }
}
