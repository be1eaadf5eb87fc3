//! Expressing operators as polynomials in ordered monomials of generators.
//!
//! Given generators `(H, I1, I2, I12)` and a target operator `T`, find
//! coefficients `c_j(a, b, w)` with `Σ c_j · H^n I1^m I2^p I12^q = T`.
//!
//! Two solvers share the same contract:
//!
//! * [`Strategy::Symbolic`] expands every unknown coefficient into scalar
//!   unknowns per parameter monomial and solves one exact system over `Q`.
//! * [`Strategy::Modular`] exploits the weight grading (`t:1, u:s, ∂t:-1,
//!   ∂u:-s, w:-1`) to fix the `w` power of each coefficient, solves small
//!   specialized systems at lattice points `(a, b)` modulo word primes,
//!   interpolates, and lifts the coefficients by rational reconstruction.
//!
//! Either way the result is re-expanded symbolically and compared with the
//! target before it is returned; a mismatch is an error, never a warning.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use ahash::AHashMap;
use rayon::prelude::*;

use crate::genpoly::{GenMonomial, GenPolynomial};
use crate::modp::{self, Crt, Field, ModOp};
use crate::polyring::{Monomial, ParamBinding, ParamPoly, Var};
use crate::rational::Rational;
use crate::weyl::{DKey, DiffOp, WeylError};

/// Per-generator exponent caps; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub h: Option<u32>,
    pub i1: Option<u32>,
    pub i2: Option<u32>,
    pub i12: Option<u32>,
}

impl Default for Caps {
    /// `I12` enters at most linearly.
    fn default() -> Self {
        Caps {
            h: None,
            i1: None,
            i2: None,
            i12: Some(1),
        }
    }
}

impl Caps {
    pub fn unbounded() -> Self {
        Caps {
            h: None,
            i1: None,
            i2: None,
            i12: None,
        }
    }

    pub fn admits(&self, m: &GenMonomial) -> bool {
        let ok = |cap: Option<u32>, e: u32| cap.is_none_or(|c| e <= c);
        ok(self.h, m.n) && ok(self.i1, m.m) && ok(self.i2, m.p) && ok(self.i12, m.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Modular when the input is weight-homogeneous, symbolic otherwise.
    #[default]
    Auto,
    Symbolic,
    Modular,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReduceOptions {
    pub caps: Caps,
    pub total_degree: u32,
    /// Bound on the total `(a, b, w)` degree of every coefficient.
    pub param_degree: u32,
    pub strategy: Strategy,
}

impl ReduceOptions {
    pub fn new(total_degree: u32, param_degree: u32) -> Self {
        ReduceOptions {
            caps: Caps::default(),
            total_degree,
            param_degree,
            strategy: Strategy::Auto,
        }
    }
}

/// Search bounds reported with a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub total_degree: u32,
    pub param_degree: u32,
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "total_degree={}, param_degree={}",
            self.total_degree, self.param_degree
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReduceError {
    /// No combination exists within the bounds. `proven_any_degree` is set when
    /// the monomial set is insufficient regardless of the parameter degree.
    #[error("no solution within {bounds}{}", if *.proven_any_degree { " (for any param_degree)" } else { "" })]
    NoSolution {
        bounds: Bounds,
        proven_any_degree: bool,
    },
    #[error(transparent)]
    Kernel(#[from] WeylError),
    #[error("candidate failed exact re-substitution: {0}")]
    Unverified(String),
    #[error("specialization is degenerate: {0}")]
    Degenerate(String),
}

/// Inconsistent linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("linear system is inconsistent")]
pub struct NoSolution;

/// Sparse linear system over `Q`: `Σ_c rows[r][c] x_c = rhs[r]`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SparseSystem {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, Rational)>>,
    pub rhs: Vec<Rational>,
}

impl SparseSystem {
    pub fn new(n_cols: usize) -> Self {
        SparseSystem {
            n_cols,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: Vec<(usize, Rational)>, rhs: Rational) {
        self.rows.push(entries);
        self.rhs.push(rhs);
    }
}

/// Gauss-Jordan elimination over `Q`.
///
/// The pivot column is the one with the most nonzeros among unused rows (lowest
/// index on ties); the pivot row is the lowest-index unused row in that column.
/// Free variables are set to zero.
pub fn solve_sparse(system: &SparseSystem) -> Result<Vec<Rational>, NoSolution> {
    let mut rows: Vec<BTreeMap<usize, Rational>> = system
        .rows
        .iter()
        .map(|r| {
            let mut m = BTreeMap::new();
            for (c, v) in r {
                assert!(*c < system.n_cols, "column {c} out of range");
                let e: &mut Rational = m.entry(*c).or_insert(Rational::ZERO);
                *e += v;
            }
            m.retain(|_, v| !v.is_zero());
            m
        })
        .collect();
    let mut rhs = system.rhs.clone();
    let mut used = vec![false; rows.len()];
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    loop {
        let mut support = vec![0usize; system.n_cols];
        for (r, row) in rows.iter().enumerate() {
            if !used[r] {
                for c in row.keys() {
                    support[*c] += 1;
                }
            }
        }
        let Some((col, _)) = support
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > 0)
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
        else {
            break;
        };
        let prow = (0..rows.len())
            .find(|&r| !used[r] && rows[r].contains_key(&col))
            .expect("support");
        used[prow] = true;
        let inv = rows[prow][&col].recip();
        let pr: Vec<(usize, Rational)> = rows[prow].iter().map(|(c, v)| (*c, v * &inv)).collect();
        let prhs = &rhs[prow] * &inv;
        rows[prow] = pr.iter().cloned().collect();
        rhs[prow] = prhs.clone();
        for r in 0..rows.len() {
            if r == prow {
                continue;
            }
            let Some(factor) = rows[r].get(&col).cloned() else {
                continue;
            };
            for (c, v) in &pr {
                let e = rows[r].entry(*c).or_insert(Rational::ZERO);
                *e -= &(&factor * v);
                if e.is_zero() {
                    rows[r].remove(c);
                }
            }
            rhs[r] -= &(&factor * &prhs);
        }
        pivots.push((col, prow));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.is_empty() && !rhs[r].is_zero() {
            return Err(NoSolution);
        }
    }
    let mut x = vec![Rational::ZERO; system.n_cols];
    for (col, row) in pivots {
        x[col] = rhs[row].clone();
    }
    Ok(x)
}

/// `H^n ∘ I1^m ∘ I2^p ∘ I12^q` for `gens = [H, I1, I2, I12]`.
pub fn expand_monomial(gens: &[DiffOp; 4], mono: GenMonomial) -> Result<DiffOp, WeylError> {
    let mut acc = DiffOp::identity();
    for (g, e) in gens.iter().zip(mono.exps()).rev() {
        for _ in 0..e {
            acc = g.compose(&acc)?;
        }
    }
    Ok(acc)
}

/// Re-expands `G` into an operator, sharing suffixes Horner-style.
pub fn expand(gens: &[DiffOp; 4], g: &GenPolynomial) -> Result<DiffOp, WeylError> {
    let terms: Vec<([u32; 4], &ParamPoly)> = g.terms().iter().map(|(m, c)| (m.exps(), c)).collect();
    expand_level(gens, &terms, 0)
}

/// `Σ c · G_level^{e_level} ∘ (rest)`, grouped by the exponent of generator `level`.
fn expand_level(
    gens: &[DiffOp; 4],
    terms: &[([u32; 4], &ParamPoly)],
    level: usize,
) -> Result<DiffOp, WeylError> {
    if level == 4 {
        let mut c = ParamPoly::zero();
        for (_, p) in terms {
            c = c.add(p);
        }
        return Ok(DiffOp::from_poly(c));
    }
    let mut by_exp: BTreeMap<u32, Vec<([u32; 4], &ParamPoly)>> = BTreeMap::new();
    for t in terms {
        by_exp.entry(t.0[level]).or_default().push(*t);
    }
    let max = *by_exp.keys().next_back().expect("nonempty");
    // Horner in the current generator: ((S_max) g + S_{max-1}) g + ...
    let mut acc = DiffOp::zero();
    for e in (0..=max).rev() {
        if !acc.is_zero() {
            acc = gens[level].compose(&acc)?;
        }
        if let Some(group) = by_exp.get(&e) {
            acc = acc.add(&expand_level(gens, group, level + 1)?);
        }
    }
    Ok(acc)
}

/// Weight of every term under `t:1, u:s, ∂t:-1, ∂u:-s, w:-1, a,b:0`, if uniform.
/// `Some(None)` for the zero operator.
pub fn weight(op: &DiffOp, s: i64) -> Option<Option<i64>> {
    let mut w: Option<i64> = None;
    for (&(i, j), p) in op.terms() {
        for (m, _) in p.terms() {
            let v = m.exp(Var::T) as i64 + s * m.exp(Var::U) as i64
                - i as i64
                - s * j as i64
                - m.exp(Var::W) as i64;
            match w {
                None => w = Some(v),
                Some(x) if x != v => return None,
                _ => {}
            }
        }
    }
    Some(w)
}

/// A grading making every generator and the target homogeneous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grading {
    pub s: i64,
    pub gens: [i64; 4],
    pub target: i64,
}

impl Grading {
    /// Tries `wt(u) = 1..=8`. Zero generators are given weight 0.
    pub fn detect(gens: &[DiffOp; 4], target: &DiffOp) -> Option<Grading> {
        'outer: for s in 1..=8 {
            let mut gw = [0i64; 4];
            for (slot, g) in gw.iter_mut().zip(gens) {
                match weight(g, s) {
                    None => continue 'outer,
                    Some(w) => *slot = w.unwrap_or(0),
                }
            }
            let Some(Some(tw)) = weight(target, s) else {
                continue;
            };
            return Some(Grading {
                s,
                gens: gw,
                target: tw,
            });
        }
        None
    }

    pub fn monomial(&self, m: &GenMonomial) -> i64 {
        m.exps()
            .iter()
            .zip(self.gens)
            .map(|(e, w)| *e as i64 * w)
            .sum()
    }

    /// The forced `w` exponent of the coefficient of `m`, if non-negative.
    pub fn omega_power(&self, m: &GenMonomial) -> Option<u32> {
        u32::try_from(self.monomial(m) - self.target).ok()
    }
}

/// Diagnostics from a successful reduction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReduceStats {
    pub strategy: &'static str,
    pub unknowns: usize,
    pub points: usize,
    pub primes: usize,
    /// Dimension of the solution space at a generic point, when known.
    pub kernel_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub poly: GenPolynomial,
    pub stats: ReduceStats,
}

/// Ordered monomials of total degree `≤ d` admitted by `caps`.
pub fn candidates(total_degree: u32, caps: &Caps) -> Vec<GenMonomial> {
    GenMonomial::all_up_to(total_degree, caps.i12.unwrap_or(total_degree))
        .into_iter()
        .filter(|m| caps.admits(m))
        .collect()
}

/// Finds `G` with `expand(G) = target` within the bounds of `opts`.
pub fn reduce_to_generators(
    target: &DiffOp,
    gens: &[DiffOp; 4],
    opts: &ReduceOptions,
) -> Result<Reduction, ReduceError> {
    Reducer::new(
        target.clone(),
        gens.clone(),
        opts.caps,
        opts.total_degree,
        opts.strategy,
    )?
    .solve(opts.param_degree)
}

/// Finds `R` with `I12² = R`, `R` admitted by `caps`.
pub fn find_syzygy(gens: &[DiffOp; 4], opts: &ReduceOptions) -> Result<Reduction, ReduceError> {
    let target = gens[3].compose(&gens[3])?;
    let mut caps = opts.caps;
    if caps.i12.is_none_or(|c| c >= 2) {
        caps.i12 = Some(1);
    }
    reduce_to_generators(
        &target,
        gens,
        &ReduceOptions {
            caps,
            ..opts.clone()
        },
    )
}

/// Runs [`Reducer::solve`] for `param_degree = start, start+2, ...` up to `ceiling`.
pub fn reduce_deepening(
    target: &DiffOp,
    gens: &[DiffOp; 4],
    caps: Caps,
    total_degree: u32,
    start: u32,
    ceiling: u32,
    strategy: Strategy,
) -> Result<Reduction, ReduceError> {
    let mut reducer = Reducer::new(target.clone(), gens.clone(), caps, total_degree, strategy)?;
    let mut p = start;
    loop {
        match reducer.solve(p) {
            Err(ReduceError::NoSolution {
                proven_any_degree: false,
                ..
            }) if p < ceiling => {
                p = (p + 2).min(ceiling);
            }
            other => return other,
        }
    }
}

/// Default starting `param_degree`: the largest parameter degree in the target plus two.
pub fn default_param_degree(target: &DiffOp) -> u32 {
    target.param_degree() + 2
}

const LATTICE_ORIGIN: (i64, i64) = (7, 5);
const MAX_PRIMES: usize = 12;
const SCREEN_POINTS: [(i64, i64, i64, i64, i64, i64); 5] = [
    (3, 2, -2, 3, 5, 7),
    (-7, 5, 1, 4, 2, 3),
    (11, 3, 13, 2, -3, 4),
    (1, 6, -5, 2, 7, 5),
    (9, 4, 2, 9, -1, 2),
];

/// Solutions at lattice points `(a, b)` for one prime and column set.
type PointSolves = BTreeMap<(i64, i64), PointSolve>;

/// Stateful solver that caches specialized solves across `param_degree` values.
pub struct Reducer {
    target: DiffOp,
    gens: [DiffOp; 4],
    candidates: Vec<GenMonomial>,
    total_degree: u32,
    grading: Option<Grading>,
    strategy: Strategy,
    /// (prime index, column set) -> point -> solution
    cache: HashMap<(usize, Vec<GenMonomial>), PointSolves>,
    /// Pivot columns fixed by the first point of each column set, when rank-deficient.
    pivots: HashMap<Vec<GenMonomial>, Vec<bool>>,
    /// Kernel dimension found at the first point of each column set.
    kernel: HashMap<Vec<GenMonomial>, usize>,
}

#[derive(Debug, Clone)]
enum PointSolve {
    Solved { x: Vec<u64> },
    Inconsistent { witness: Vec<u64> },
    BadPrime,
}

impl Reducer {
    pub fn new(
        target: DiffOp,
        gens: [DiffOp; 4],
        caps: Caps,
        total_degree: u32,
        strategy: Strategy,
    ) -> Result<Self, ReduceError> {
        let grading = Grading::detect(&gens, &target);
        if strategy == Strategy::Modular && grading.is_none() && !target.is_zero() {
            return Err(ReduceError::Degenerate(
                "modular strategy needs weight-homogeneous input".into(),
            ));
        }
        Ok(Reducer {
            target,
            gens,
            candidates: candidates(total_degree, &caps),
            total_degree,
            grading,
            strategy,
            cache: HashMap::new(),
            pivots: HashMap::new(),
            kernel: HashMap::new(),
        })
    }

    /// Replaces the candidate monomials (for instance to exclude one of them).
    pub fn with_candidates(mut self, cands: Vec<GenMonomial>) -> Self {
        self.total_degree = cands.iter().map(|m| m.degree()).max().unwrap_or(0);
        self.candidates = cands;
        self.cache.clear();
        self.pivots.clear();
        self.kernel.clear();
        self
    }

    pub fn grading(&self) -> Option<Grading> {
        self.grading
    }

    pub fn solve(&mut self, param_degree: u32) -> Result<Reduction, ReduceError> {
        let bounds = Bounds {
            total_degree: self.total_degree,
            param_degree,
        };
        if self.target.is_zero() {
            return Ok(Reduction {
                poly: GenPolynomial::zero(),
                stats: ReduceStats {
                    strategy: "trivial",
                    ..Default::default()
                },
            });
        }
        let use_modular = match self.strategy {
            Strategy::Modular => true,
            Strategy::Symbolic => false,
            Strategy::Auto => self.grading.is_some(),
        };
        if use_modular {
            self.solve_modular(bounds)
        } else {
            self.solve_symbolic(bounds)
        }
    }

    fn verify(&self, poly: &GenPolynomial) -> Result<(), ReduceError> {
        let back = expand(&self.gens, poly)?;
        if back != self.target {
            let diff = back.sub(&self.target);
            return Err(ReduceError::Unverified(format!(
                "residual has {} coefficient entries",
                diff.size()
            )));
        }
        Ok(())
    }

    // ---- exact strategy ----

    fn solve_symbolic(&mut self, bounds: Bounds) -> Result<Reduction, ReduceError> {
        let cands = self.candidates.clone();
        // unknown = (candidate index, parameter monomial)
        let mut unknowns: Vec<(usize, Monomial)> = Vec::new();
        for (ci, m) in cands.iter().enumerate() {
            let forced = self.grading.map(|g| g.omega_power(m));
            if forced == Some(None) {
                continue;
            }
            for pm in param_monomials(bounds.param_degree) {
                if let Some(Some(e)) = forced {
                    if pm.exp(Var::W) != e {
                        continue;
                    }
                }
                unknowns.push((ci, pm));
            }
        }
        let mut cache: AHashMap<GenMonomial, DiffOp> = AHashMap::new();
        let mut row_index: AHashMap<(DKey, Monomial), usize> = AHashMap::new();
        let mut columns: Vec<Vec<(usize, Rational)>> = Vec::with_capacity(unknowns.len());
        let mut used_cands: Vec<usize> = unknowns.iter().map(|u| u.0).collect();
        used_cands.dedup();
        for &ci in &used_cands {
            let op = cached_expand(&self.gens, cands[ci], &mut cache)?;
            cache.insert(cands[ci], op);
        }
        for &(ci, pm) in &unknowns {
            let op = &cache[&cands[ci]];
            let mut col = Vec::new();
            for (&key, p) in op.terms() {
                for (m, c) in p.terms() {
                    let mm = m.checked_mul(pm).ok_or(WeylError::Poly(
                        crate::polyring::PolyError::ExponentOverflow,
                    ))?;
                    let n = row_index.len();
                    let r = *row_index.entry((key, mm)).or_insert(n);
                    col.push((r, c.clone()));
                }
            }
            columns.push(col);
        }
        let mut rhs_entries = Vec::new();
        for (&key, p) in self.target.terms() {
            for (m, c) in p.terms() {
                let n = row_index.len();
                let r = *row_index.entry((key, *m)).or_insert(n);
                rhs_entries.push((r, c.clone()));
            }
        }
        let mut system = SparseSystem::new(unknowns.len());
        system.rows = vec![Vec::new(); row_index.len()];
        system.rhs = vec![Rational::ZERO; row_index.len()];
        for (ci, col) in columns.into_iter().enumerate() {
            for (r, v) in col {
                system.rows[r].push((ci, v));
            }
        }
        for (r, v) in rhs_entries {
            system.rhs[r] = v;
        }
        let x = solve_sparse(&system).map_err(|_| ReduceError::NoSolution {
            bounds,
            proven_any_degree: false,
        })?;
        let mut poly = GenPolynomial::zero();
        for ((ci, pm), v) in unknowns.iter().zip(x) {
            if !v.is_zero() {
                poly.add_term(cands[*ci], &ParamPoly::term(*pm, v));
            }
        }
        self.verify(&poly)?;
        Ok(Reduction {
            poly,
            stats: ReduceStats {
                strategy: "symbolic",
                unknowns: unknowns.len(),
                points: 0,
                primes: 0,
                kernel_dim: None,
            },
        })
    }

    // ---- modular strategy ----

    fn solve_modular(&mut self, bounds: Bounds) -> Result<Reduction, ReduceError> {
        let grading = self.grading.expect("checked by caller");
        let graded: Vec<(GenMonomial, u32)> = self
            .candidates
            .iter()
            .copied()
            .filter_map(|m| grading.omega_power(&m).map(|e| (m, e)))
            .collect();
        let cols: Vec<(GenMonomial, u32)> = graded
            .iter()
            .copied()
            .filter(|(_, e)| *e <= bounds.param_degree)
            .collect();
        // an inconsistent specialization rules out every param_degree only if no
        // candidate was dropped for its forced w power
        let complete = cols.len() == graded.len();
        let no_solution = |proven: bool| ReduceError::NoSolution {
            bounds,
            proven_any_degree: proven && complete,
        };
        if cols.is_empty() {
            return Err(no_solution(true));
        }
        let col_key: Vec<GenMonomial> = cols.iter().map(|c| c.0).collect();
        let min_e = cols.iter().map(|c| c.1).min().expect("nonempty");
        let d = bounds.param_degree - min_e;
        let lattice: Vec<(i64, i64)> = (0..=d as i64 + 1)
            .flat_map(|s| (0..=s).map(move |i| (i, s - i)))
            .collect();

        let mut crts: Option<Vec<Vec<Crt>>> = None;
        let mut last: Option<Vec<ParamPoly>> = None;
        let mut primes_used = 0usize;
        for pi in 0..MAX_PRIMES {
            let f = Field::new(modp::prime(pi));
            let sols = match self.solve_points(pi, &col_key, &lattice)? {
                Some(s) => s,
                None => continue, // bad prime
            };
            if let Some((pt, witness)) = sols.iter().find_map(|(pt, s)| match s {
                PointSolve::Inconsistent { witness } => Some((*pt, witness.clone())),
                _ => None,
            }) {
                if self.confirm_inconsistent(&col_key, pt, &witness)? {
                    return Err(no_solution(true));
                }
                continue; // unlucky prime
            }
            let kernel_dim = self.kernel.get(&col_key).copied();
            // interpolate each column on the principal lattice of degree d, check on the next ring
            let value = |c: usize, i: i64, j: i64| -> u64 {
                match &sols[&(i, j)] {
                    PointSolve::Solved { x, .. } => x[c],
                    _ => unreachable!(),
                }
            };
            let mut residues: Vec<Vec<u64>> = Vec::with_capacity(cols.len());
            for (c, (_, e)) in cols.iter().enumerate() {
                let coeffs = interpolate(f, d, LATTICE_ORIGIN, |i, j| value(c, i, j));
                for i in 0..=d as i64 + 1 {
                    let j = d as i64 + 1 - i;
                    let at = eval_dense(f, &coeffs, LATTICE_ORIGIN.0 + i, LATTICE_ORIGIN.1 + j);
                    if at != value(c, i, j) {
                        return Err(no_solution(false));
                    }
                }
                let allowed = bounds.param_degree - e;
                for (ea, row) in coeffs.iter().enumerate() {
                    for (eb, v) in row.iter().enumerate() {
                        if *v != 0 && (ea + eb) as u32 > allowed {
                            return Err(no_solution(false));
                        }
                    }
                }
                residues.push(coeffs.into_iter().flatten().collect());
            }
            primes_used += 1;
            match crts.as_mut() {
                None => {
                    crts = Some(
                        residues
                            .iter()
                            .map(|r| r.iter().map(|v| Crt::new(*v, f.p)).collect())
                            .collect(),
                    )
                }
                Some(cs) => {
                    for (cc, rr) in cs.iter_mut().zip(&residues) {
                        for (c, r) in cc.iter_mut().zip(rr) {
                            c.push(*r, f.p);
                        }
                    }
                }
            }
            let Some(polys) = reconstruct(crts.as_ref().expect("set"), d, &cols) else {
                continue;
            };
            if last.as_ref() != Some(&polys) {
                // accept only when a further prime leaves the reconstruction unchanged,
                // unless the candidate already passes the exact checks
                let candidate = assemble(&cols, &polys);
                if self.screen(&candidate)? && self.verify(&candidate).is_ok() {
                    return Ok(self.finish(
                        candidate,
                        cols.len(),
                        lattice.len(),
                        primes_used,
                        kernel_dim,
                    ));
                }
                last = Some(polys);
                continue;
            }
            let candidate = assemble(&cols, &polys);
            if self.screen(&candidate)? {
                self.verify(&candidate)?;
                return Ok(self.finish(
                    candidate,
                    cols.len(),
                    lattice.len(),
                    primes_used,
                    kernel_dim,
                ));
            }
        }
        Err(ReduceError::Unverified(format!(
            "no stable reconstruction after {MAX_PRIMES} primes"
        )))
    }

    fn finish(
        &self,
        poly: GenPolynomial,
        unknowns: usize,
        points: usize,
        primes: usize,
        kernel_dim: Option<usize>,
    ) -> Reduction {
        Reduction {
            poly,
            stats: ReduceStats {
                strategy: "modular",
                unknowns,
                points,
                primes,
                kernel_dim,
            },
        }
    }

    /// Solves at every lattice point for prime `pi`; `None` if the prime is unusable.
    fn solve_points(
        &mut self,
        pi: usize,
        cols: &[GenMonomial],
        lattice: &[(i64, i64)],
    ) -> Result<Option<PointSolves>, ReduceError> {
        let f = Field::new(modp::prime(pi));
        let key = (pi, cols.to_vec());
        let cached = self.cache.entry(key.clone()).or_default();
        let missing: Vec<(i64, i64)> = lattice
            .iter()
            .filter(|p| !cached.contains_key(p))
            .copied()
            .collect();
        // the first point of a column set fixes the pivot columns
        if !self.kernel.contains_key(cols) {
            if let Some(&first) = missing.first() {
                let (s, piv) = solve_point(&self.gens, &self.target, cols, f, first, None, true);
                if let PointSolve::BadPrime = s {
                    return Ok(None);
                }
                if let Some(piv) = piv {
                    self.kernel
                        .insert(cols.to_vec(), piv.iter().filter(|p| !**p).count());
                    if piv.iter().any(|p| !*p) {
                        self.pivots.insert(cols.to_vec(), piv);
                    }
                }
                self.cache.get_mut(&key).expect("entry").insert(first, s);
            }
        }
        let allowed = self.pivots.get(cols).cloned();
        let cached = self.cache.get(&key).expect("entry");
        let todo: Vec<(i64, i64)> = lattice
            .iter()
            .filter(|p| !cached.contains_key(p))
            .copied()
            .collect();
        let gens = &self.gens;
        let target = &self.target;
        let results: Vec<((i64, i64), PointSolve)> = todo
            .par_iter()
            .map(|&pt| {
                (
                    pt,
                    solve_point(gens, target, cols, f, pt, allowed.as_deref(), false).0,
                )
            })
            .collect();
        let cached = self.cache.get_mut(&key).expect("entry");
        for (pt, s) in results {
            cached.insert(pt, s);
        }
        if cached.values().any(|s| matches!(s, PointSolve::BadPrime)) {
            return Ok(None);
        }
        Ok(Some(
            lattice.iter().map(|p| (*p, cached[p].clone())).collect(),
        ))
    }

    /// Re-checks a modular inconsistency exactly on the witness rows.
    fn confirm_inconsistent(
        &self,
        cols: &[GenMonomial],
        pt: (i64, i64),
        witness: &[u64],
    ) -> Result<bool, ReduceError> {
        let bind = ParamBinding::all(
            Rational::from_int(LATTICE_ORIGIN.0 + pt.0),
            Rational::from_int(LATTICE_ORIGIN.1 + pt.1),
            Rational::ONE,
        );
        let gens: [DiffOp; 4] = std::array::from_fn(|i| self.gens[i].eval_params(&bind));
        let target = self.target.eval_params(&bind);
        let mut cache = AHashMap::new();
        let ops: Vec<DiffOp> = cols
            .iter()
            .map(|m| cached_expand(&gens, *m, &mut cache))
            .collect::<Result<_, _>>()?;
        let build = |keys: Option<&[u64]>| {
            let mut index: AHashMap<u64, usize> = AHashMap::new();
            if let Some(keys) = keys {
                for k in keys {
                    let n = index.len();
                    index.entry(*k).or_insert(n);
                }
            }
            let mut sys = SparseSystem::new(cols.len());
            let mut add = |key: u64, c: Option<usize>, v: &Rational, sys: &mut SparseSystem| {
                let r = match index.get(&key) {
                    Some(r) => *r,
                    None if keys.is_none() => {
                        let n = index.len();
                        index.insert(key, n);
                        n
                    }
                    None => return,
                };
                while sys.rows.len() <= r {
                    sys.rows.push(Vec::new());
                    sys.rhs.push(Rational::ZERO);
                }
                match c {
                    Some(c) => sys.rows[r].push((c, v.clone())),
                    None => sys.rhs[r] = v.clone(),
                }
            };
            for (c, op) in ops.iter().enumerate() {
                for (key, v) in exact_entries(op) {
                    add(key, Some(c), &v, &mut sys);
                }
            }
            for (key, v) in exact_entries(&target) {
                add(key, None, &v, &mut sys);
            }
            sys
        };
        if solve_sparse(&build(Some(witness))).is_err() {
            return Ok(true);
        }
        Ok(solve_sparse(&build(None)).is_err())
    }

    /// Exact evaluation at a few rational parameter points before the full check.
    fn screen(&self, poly: &GenPolynomial) -> Result<bool, ReduceError> {
        for &(an, ad, bn, bd, wn, wd) in &SCREEN_POINTS {
            let bind = ParamBinding::all(
                Rational::new(an, ad),
                Rational::new(bn, bd),
                Rational::new(wn, wd),
            );
            let gens: [DiffOp; 4] = std::array::from_fn(|i| self.gens[i].eval_params(&bind));
            let lhs = expand(&gens, &poly.eval_params(&bind))?;
            if lhs != self.target.eval_params(&bind) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn exact_entries(op: &DiffOp) -> Vec<(u64, Rational)> {
    let mut v = Vec::new();
    for (&(i, j), p) in op.terms() {
        for (m, c) in p.terms() {
            v.push((
                modp::pack_key(i, j, m.exp(Var::T), m.exp(Var::U)),
                c.clone(),
            ));
        }
    }
    v
}

fn cached_expand(
    gens: &[DiffOp; 4],
    m: GenMonomial,
    cache: &mut AHashMap<GenMonomial, DiffOp>,
) -> Result<DiffOp, WeylError> {
    if let Some(op) = cache.get(&m) {
        return Ok(op.clone());
    }
    let op = match peel(m) {
        None => DiffOp::identity(),
        Some((g, rest)) => {
            let r = cached_expand(gens, rest, cache)?;
            gens[g].compose(&r)?
        }
    };
    cache.insert(m, op.clone());
    Ok(op)
}

/// Splits off the leftmost generator: `m = gens[g] ∘ rest`.
fn peel(m: GenMonomial) -> Option<(usize, GenMonomial)> {
    let mut e = m.exps();
    let g = e.iter().position(|x| *x > 0)?;
    e[g] -= 1;
    Some((g, GenMonomial::new(e[0], e[1], e[2], e[3])))
}

fn param_monomials(max_degree: u32) -> Vec<Monomial> {
    let mut v = Vec::new();
    for d in 0..=max_degree {
        for ea in 0..=d {
            for eb in 0..=d - ea {
                v.push(Monomial::new(0, 0, ea, eb, d - ea - eb).expect("small exponents"));
            }
        }
    }
    v
}

fn mod_expand(
    gens: &[ModOp; 4],
    m: GenMonomial,
    cache: &mut AHashMap<GenMonomial, ModOp>,
    f: Field,
) -> ModOp {
    if let Some(op) = cache.get(&m) {
        return op.clone();
    }
    let op = match peel(m) {
        None => ModOp::identity(),
        Some((g, rest)) => {
            let r = mod_expand(gens, rest, cache, f);
            gens[g].compose(&r, f)
        }
    };
    cache.insert(m, op.clone());
    op
}

fn solve_point(
    gens: &[DiffOp; 4],
    target: &DiffOp,
    cols: &[GenMonomial],
    f: Field,
    pt: (i64, i64),
    allowed: Option<&[bool]>,
    exhaustive: bool,
) -> (PointSolve, Option<Vec<bool>>) {
    let a = f.from_i64(LATTICE_ORIGIN.0 + pt.0);
    let b = f.from_i64(LATTICE_ORIGIN.1 + pt.1);
    let mut mg = Vec::with_capacity(4);
    for g in gens {
        match ModOp::specialize(g, f, a, b, 1) {
            Some(m) => mg.push(m),
            None => return (PointSolve::BadPrime, None),
        }
    }
    let mg: [ModOp; 4] = mg.try_into().expect("four");
    let Some(mt) = ModOp::specialize(target, f, a, b, 1) else {
        return (PointSolve::BadPrime, None);
    };
    let mut cache = AHashMap::new();
    let columns: Vec<Vec<(u64, u64)>> = cols
        .iter()
        .enumerate()
        .map(|(c, m)| {
            if allowed.is_none_or(|a| a[c]) {
                mod_expand(&mg, *m, &mut cache, f).entries()
            } else {
                Vec::new()
            }
        })
        .collect();
    match solve_mod(f, &columns, &mt.entries(), exhaustive) {
        ModSolve::Solved { x, pivots } => (PointSolve::Solved { x }, Some(pivots)),
        ModSolve::Inconsistent { witness } => (PointSolve::Inconsistent { witness }, None),
    }
}

enum ModSolve {
    Solved { x: Vec<u64>, pivots: Vec<bool> },
    Inconsistent { witness: Vec<u64> },
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Solves `A x = b` over `F_p` with `A` given by sparse columns of packed keys.
///
/// Rows are fed in a fixed pseudo-random order into an incremental echelon
/// basis until the rank saturates; then the residual over all rows decides
/// whether further rows are needed.
///
/// With `exhaustive`, every row is inserted so the reported pivots span the
/// full column space.
fn solve_mod(
    f: Field,
    columns: &[Vec<(u64, u64)>],
    rhs: &[(u64, u64)],
    exhaustive: bool,
) -> ModSolve {
    let n = columns.len();
    let active = columns.iter().filter(|c| !c.is_empty()).count();
    let mut rows: AHashMap<u64, Vec<(usize, u64)>> = AHashMap::new();
    for (c, col) in columns.iter().enumerate() {
        for &(k, v) in col {
            rows.entry(k).or_default().push((c, v));
        }
    }
    let rhs_map: AHashMap<u64, u64> = rhs.iter().copied().collect();
    for &(k, _) in rhs {
        rows.entry(k).or_default();
    }
    let mut keys: Vec<u64> = rows.keys().copied().collect();
    keys.sort_unstable_by_key(|k| (mix(*k), *k));

    let dense = |k: u64| -> Vec<u64> {
        let mut r = vec![0u64; n + 1];
        for &(c, v) in &rows[&k] {
            r[c] = f.add(r[c], v);
        }
        r[n] = rhs_map.get(&k).copied().unwrap_or(0);
        r
    };
    // basis rows normalized so that row[pivot] = 1
    let mut basis: Vec<(usize, Vec<u64>, u64)> = Vec::new();
    let mut is_pivot = vec![false; n];
    let insert = |k: u64,
                  basis: &mut Vec<(usize, Vec<u64>, u64)>,
                  is_pivot: &mut Vec<bool>|
     -> Result<bool, ()> {
        let mut r = dense(k);
        for (pc, prow, _) in basis.iter() {
            let fct = r[*pc];
            if fct != 0 {
                for c in 0..=n {
                    if prow[c] != 0 {
                        r[c] = f.sub(r[c], f.mul(fct, prow[c]));
                    }
                }
            }
        }
        match (0..n).find(|c| r[*c] != 0) {
            Some(pc) => {
                let inv = f.inv(r[pc]);
                for v in r.iter_mut() {
                    *v = f.mul(*v, inv);
                }
                is_pivot[pc] = true;
                basis.push((pc, r, k));
                Ok(true)
            }
            None if r[n] != 0 => Err(()),
            None => Ok(false),
        }
    };
    let witness = |basis: &Vec<(usize, Vec<u64>, u64)>, k: u64| -> Vec<u64> {
        let mut w: Vec<u64> = basis.iter().map(|b| b.2).collect();
        w.push(k);
        w
    };

    let mut stall = 0usize;
    for &k in &keys {
        if basis.len() == active || (!exhaustive && stall > 2 * n + 16) {
            break;
        }
        match insert(k, &mut basis, &mut is_pivot) {
            Ok(true) => stall = 0,
            Ok(false) => stall += 1,
            Err(()) => {
                return ModSolve::Inconsistent {
                    witness: witness(&basis, k),
                }
            }
        }
    }
    loop {
        // back substitution, free variables zero
        let mut x = vec![0u64; n];
        for (pc, prow, _) in basis.iter().rev() {
            let mut v = prow[n];
            for c in 0..n {
                if c != *pc && prow[c] != 0 {
                    v = f.sub(v, f.mul(prow[c], x[c]));
                }
            }
            x[*pc] = v;
        }
        let bad: Vec<u64> = keys
            .iter()
            .copied()
            .filter(|k| {
                let mut s = 0u64;
                for &(c, v) in &rows[k] {
                    s = f.add(s, f.mul(v, x[c]));
                }
                s != rhs_map.get(k).copied().unwrap_or(0)
            })
            .collect();
        if bad.is_empty() {
            return ModSolve::Solved {
                x,
                pivots: is_pivot,
            };
        }
        let mut progressed = false;
        for k in bad {
            match insert(k, &mut basis, &mut is_pivot) {
                Ok(true) => {
                    progressed = true;
                    break;
                }
                Ok(false) => {}
                Err(()) => {
                    return ModSolve::Inconsistent {
                        witness: witness(&basis, k),
                    }
                }
            }
        }
        assert!(
            progressed,
            "residual row reduced to zero without changing the basis"
        );
    }
}

/// Dense coefficients `c[ea][eb]` of the unique polynomial of total degree `≤ d`
/// through the values at `(a0 + i, b0 + j)`, `i + j ≤ d`.
#[allow(clippy::needless_range_loop)]
fn interpolate(
    f: Field,
    d: u32,
    origin: (i64, i64),
    value: impl Fn(i64, i64) -> u64,
) -> Vec<Vec<u64>> {
    let d = d as usize;
    // g[i][j] = Δ_b^j f(i, ·)(0)
    let mut g = vec![vec![0u64; d + 1]; d + 1];
    for i in 0..=d {
        let mut row: Vec<u64> = (0..=d - i).map(|j| value(i as i64, j as i64)).collect();
        for j in 0..=d - i {
            g[i][j] = row[0];
            for l in 0..row.len() - 1 {
                row[l] = f.sub(row[l + 1], row[l]);
            }
            row.pop();
        }
    }
    // h[i][j] = Δ_a^i g(·, j)(0)
    let mut h = vec![vec![0u64; d + 1]; d + 1];
    for j in 0..=d {
        let mut col: Vec<u64> = (0..=d - j).map(|i| g[i][j]).collect();
        for i in 0..=d - j {
            h[i][j] = col[0];
            for l in 0..col.len() - 1 {
                col[l] = f.sub(col[l + 1], col[l]);
            }
            col.pop();
        }
    }
    let mut fact = vec![1u64; d + 1];
    for i in 1..=d {
        fact[i] = f.mul(fact[i - 1], i as u64);
    }
    // falling factorials (x - x0)(x - x0 - 1)... as coefficient vectors in x
    let falling = |x0: i64| -> Vec<Vec<u64>> {
        let mut out = vec![vec![1u64]];
        for l in 0..d {
            let prev = &out[l];
            let root = f.from_i64(x0 + l as i64);
            let mut next = vec![0u64; prev.len() + 1];
            for (e, c) in prev.iter().enumerate() {
                next[e + 1] = f.add(next[e + 1], *c);
                next[e] = f.sub(next[e], f.mul(*c, root));
            }
            out.push(next);
        }
        out
    };
    let fa = falling(origin.0);
    let fb = falling(origin.1);
    let mut out = vec![vec![0u64; d + 1]; d + 1];
    for i in 0..=d {
        for j in 0..=d - i {
            if h[i][j] == 0 {
                continue;
            }
            let c = f.mul(h[i][j], f.inv(f.mul(fact[i], fact[j])));
            for (ea, ca) in fa[i].iter().enumerate() {
                if *ca == 0 {
                    continue;
                }
                let cca = f.mul(c, *ca);
                for (eb, cb) in fb[j].iter().enumerate() {
                    out[ea][eb] = f.add(out[ea][eb], f.mul(cca, *cb));
                }
            }
        }
    }
    out
}

fn eval_dense(f: Field, coeffs: &[Vec<u64>], a: i64, b: i64) -> u64 {
    let (a, b) = (f.from_i64(a), f.from_i64(b));
    let mut s = 0u64;
    let mut pa = 1u64;
    for row in coeffs {
        let mut pb = 1u64;
        for c in row {
            s = f.add(s, f.mul(*c, f.mul(pa, pb)));
            pb = f.mul(pb, b);
        }
        pa = f.mul(pa, a);
    }
    s
}

/// Rational reconstruction of every interpolated coefficient, with the forced `w` power.
fn reconstruct(crts: &[Vec<Crt>], d: u32, cols: &[(GenMonomial, u32)]) -> Option<Vec<ParamPoly>> {
    let width = d as usize + 1;
    let mut out = Vec::with_capacity(cols.len());
    for (cc, (_, e)) in crts.iter().zip(cols) {
        let mut terms = Vec::new();
        for (idx, c) in cc.iter().enumerate() {
            let r = c.reconstruct()?;
            if r.is_zero() {
                continue;
            }
            let (ea, eb) = ((idx / width) as u32, (idx % width) as u32);
            terms.push((Monomial::new(0, 0, ea, eb, *e).ok()?, r));
        }
        out.push(ParamPoly::from_terms(terms));
    }
    Some(out)
}

fn assemble(cols: &[(GenMonomial, u32)], polys: &[ParamPoly]) -> GenPolynomial {
    GenPolynomial::from_terms(cols.iter().zip(polys).map(|((m, _), p)| (*m, p.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    #[test]
    fn solve_sparse_examples() {
        let mut s = SparseSystem::new(1);
        s.push_row(vec![(0, q(2))], q(4));
        assert_eq!(solve_sparse(&s).unwrap(), vec![q(2)]);

        let mut s = SparseSystem::new(2);
        s.push_row(vec![(0, q(1)), (1, q(1))], q(3));
        assert_eq!(solve_sparse(&s).unwrap(), vec![q(3), q(0)]);

        let mut s = SparseSystem::new(1);
        s.push_row(vec![(0, q(1))], q(1));
        s.push_row(vec![(0, q(1))], q(2));
        assert_eq!(solve_sparse(&s), Err(NoSolution));
    }

    #[test]
    fn interpolation_recovers_polynomial() {
        let f = Field::new(modp::prime(0));
        // 3a^2 b - 5b^3 + 7a + 2
        let p = |a: i64, b: i64| 3 * a * a * b - 5 * b * b * b + 7 * a + 2;
        let c = interpolate(f, 3, (7, 5), |i, j| f.from_i64(p(7 + i, 5 + j)));
        assert_eq!(c[2][1], 3);
        assert_eq!(c[0][3], f.from_i64(-5));
        assert_eq!(c[1][0], 7);
        assert_eq!(c[0][0], 2);
        assert_eq!(c[1][1], 0);
    }

    #[test]
    fn modular_solver_handles_overdetermined_systems() {
        let f = Field::new(modp::prime(1));
        // x0 + x1 = 3, x0 - x1 = 1, 2 x0 = 4
        let cols = vec![
            vec![(1, 1), (2, 1), (3, 2)],
            vec![(1, 1), (2, f.from_i64(-1))],
        ];
        let rhs = vec![(1, 3), (2, 1), (3, 4)];
        match solve_mod(f, &cols, &rhs, true) {
            ModSolve::Solved { x, .. } => assert_eq!(x, vec![2, 1]),
            ModSolve::Inconsistent { .. } => panic!("consistent"),
        }
        let rhs = vec![(1, 3), (2, 1), (3, 5)];
        assert!(matches!(
            solve_mod(f, &cols, &rhs, true),
            ModSolve::Inconsistent { .. }
        ));
    }
}
