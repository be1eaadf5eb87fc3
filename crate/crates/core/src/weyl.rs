//! Differential operators `Σ p_ij(t,u;a,b,w) ∂_t^i ∂_u^j` in normal form.
//!
//! Coefficients sit to the left of the derivatives. Composition uses the
//! generalized Leibniz rule
//! `∂_t^i ∂_u^j ∘ q = Σ C(i,r) C(j,s) (∂_t^r ∂_u^s q) ∂_t^{i-r} ∂_u^{j-s}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::intpoly::{self, IntPoly, ZAcc};
use crate::polyring::{JsonTerm, Monomial, ParamBinding, ParamPoly, PolyAcc, PolyError, Var};
use crate::rational::Rational;

/// `(∂_t order, ∂_u order)`.
pub type DKey = (u32, u32);

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct DiffOp {
    terms: BTreeMap<DKey, ParamPoly>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WeylError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("malformed operator document: {0}")]
    Format(String),
}

/// Operator order; the zero operator has no finite order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Zero,
    Finite(u32),
}

impl Order {
    pub fn finite(self) -> Option<u32> {
        match self {
            Order::Zero => None,
            Order::Finite(n) => Some(n),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Zero => f.write_str("-inf"),
            Order::Finite(n) => write!(f, "{n}"),
        }
    }
}

const BINOM_MAX: usize = 64;

fn binom(n: u32, k: u32) -> u64 {
    static TABLE: OnceLock<Vec<Vec<u64>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<u64>> = vec![vec![1]];
        for n in 1..BINOM_MAX {
            let prev = &rows[n - 1];
            let mut row = vec![1u64; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    });
    assert!(
        (n as usize) < BINOM_MAX,
        "derivative order {n} beyond binomial table"
    );
    table[n as usize][k as usize]
}

/// Below this many coefficient products composition stays on one thread.
const PARALLEL_THRESHOLD: usize = 20_000;

impl DiffOp {
    pub fn zero() -> Self {
        DiffOp {
            terms: BTreeMap::new(),
        }
    }

    pub fn identity() -> Self {
        Self::from_poly(ParamPoly::one())
    }

    /// Multiplication operator by `p`.
    pub fn from_poly(p: ParamPoly) -> Self {
        Self::monomial_op(p, 0, 0)
    }

    /// `p ∂_t^i ∂_u^j`.
    pub fn monomial_op(p: ParamPoly, i: u32, j: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !p.is_zero() {
            terms.insert((i, j), p);
        }
        DiffOp { terms }
    }

    pub fn dt() -> Self {
        Self::monomial_op(ParamPoly::one(), 1, 0)
    }

    pub fn du() -> Self {
        Self::monomial_op(ParamPoly::one(), 0, 1)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (DKey, ParamPoly)>) -> Self {
        let mut out = Self::zero();
        for (k, p) in terms {
            out.add_term(k, &p);
        }
        out
    }

    fn add_term(&mut self, k: DKey, p: &ParamPoly) {
        if p.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(existing) => {
                let s = existing.add(p);
                if s.is_zero() {
                    self.terms.remove(&k);
                } else {
                    *existing = s;
                }
            }
            None => {
                self.terms.insert(k, p.clone());
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<DKey, ParamPoly> {
        &self.terms
    }

    pub fn coeff(&self, i: u32, j: u32) -> ParamPoly {
        self.terms.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn order(&self) -> Order {
        self.terms
            .keys()
            .map(|(i, j)| i + j)
            .max()
            .map_or(Order::Zero, Order::Finite)
    }

    /// Total number of stored coefficient terms.
    pub fn size(&self) -> usize {
        self.terms.values().map(|p| p.len()).sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, p) in &other.terms {
            out.add_term(*k, p);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        DiffOp {
            terms: self.terms.iter().map(|(k, p)| (*k, p.neg())).collect(),
        }
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        DiffOp {
            terms: self.terms.iter().map(|(k, p)| (*k, p.scale(s))).collect(),
        }
    }

    /// Left multiplication by a polynomial: `p · A`.
    pub fn mul_poly(&self, p: &ParamPoly) -> Result<Self, WeylError> {
        let mut out = BTreeMap::new();
        for (k, c) in &self.terms {
            let prod = p.checked_mul(c)?;
            if !prod.is_zero() {
                out.insert(*k, prod);
            }
        }
        Ok(DiffOp { terms: out })
    }

    /// `Σ scalar_i · op_i`.
    pub fn linear(ops: &[(ParamPoly, DiffOp)]) -> Result<Self, WeylError> {
        let mut acc: BTreeMap<DKey, PolyAcc> = BTreeMap::new();
        for (s, op) in ops {
            for (k, c) in &op.terms {
                s.mul_into(c, &Rational::ONE, acc.entry(*k).or_default())?;
            }
        }
        Ok(Self::from_accs(acc))
    }

    fn from_accs(acc: BTreeMap<DKey, PolyAcc>) -> Self {
        let terms = acc
            .into_iter()
            .map(|(k, a)| (k, ParamPoly::from_acc(a)))
            .filter(|(_, p)| !p.is_zero())
            .collect();
        DiffOp { terms }
    }

    /// `A ∘ B` in normal form.
    pub fn compose(&self, other: &Self) -> Result<Self, WeylError> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        let max_r = self.terms.keys().map(|k| k.0).max().unwrap_or(0);
        let max_s = self.terms.keys().map(|k| k.1).max().unwrap_or(0);

        // Work on integer multiples of both operands and divide once at the end.
        let den_a = Rational::lcm_denominator(
            self.terms
                .values()
                .flat_map(|p| p.terms().iter().map(|(_, c)| c)),
        );
        let den_b = Rational::lcm_denominator(
            other
                .terms
                .values()
                .flat_map(|p| p.terms().iter().map(|(_, c)| c)),
        );
        let a_terms: Vec<(DKey, IntPoly)> = self
            .terms
            .iter()
            .map(|(k, p)| (*k, IntPoly::scaled(p, &den_a)))
            .collect();

        // derivs[b][r][s] = ∂_t^r ∂_u^s of the b-th coefficient of `other`.
        let b_terms: Vec<(DKey, IntPoly)> = other
            .terms
            .iter()
            .map(|(k, p)| (*k, IntPoly::scaled(p, &den_b)))
            .collect();
        let derivs: Vec<Vec<Vec<IntPoly>>> = b_terms
            .iter()
            .map(|(_, q)| {
                let mut rows = Vec::with_capacity(max_r as usize + 1);
                let mut qt = q.clone();
                for r in 0..=max_r {
                    if r > 0 {
                        qt = qt.diff_n(Var::T, 1);
                    }
                    let mut row = Vec::with_capacity(max_s as usize + 1);
                    let mut qs = qt.clone();
                    for s in 0..=max_s {
                        if s > 0 {
                            qs = qs.diff_n(Var::U, 1);
                        }
                        row.push(qs.clone());
                    }
                    rows.push(row);
                }
                rows
            })
            .collect();

        // Group contributions by output key so each key is accumulated independently.
        let mut jobs: BTreeMap<DKey, Vec<(&IntPoly, &IntPoly, i128)>> = BTreeMap::new();
        let mut work = 0usize;
        for ((i1, j1), p) in &a_terms {
            let (i1, j1) = (*i1, *j1);
            for (bi, ((i2, j2), _)) in b_terms.iter().enumerate() {
                for r in 0..=i1 {
                    for s in 0..=j1 {
                        let dq = &derivs[bi][r as usize][s as usize];
                        if dq.is_zero() {
                            continue;
                        }
                        let c = binom(i1, r) as i128 * binom(j1, s) as i128;
                        work += p.len() * dq.len();
                        jobs.entry((i1 - r + i2, j1 - s + j2))
                            .or_default()
                            .push((p, dq, c));
                    }
                }
            }
        }

        let den = &den_a * &den_b;
        let run = |contribs: &Vec<(&IntPoly, &IntPoly, i128)>| -> Result<ParamPoly, PolyError> {
            let mut acc = ZAcc::default();
            for (p, q, c) in contribs {
                p.mul_into(q, *c, &mut acc)?;
            }
            Ok(intpoly::finish(acc, &den))
        };

        let results: Vec<(DKey, Result<ParamPoly, PolyError>)> = if work >= PARALLEL_THRESHOLD {
            let jobs: Vec<_> = jobs.into_iter().collect();
            jobs.par_iter().map(|(k, c)| (*k, run(c))).collect()
        } else {
            jobs.iter().map(|(k, c)| (*k, run(c))).collect()
        };

        let mut terms = BTreeMap::new();
        for (k, r) in results {
            let p = r?;
            if !p.is_zero() {
                terms.insert(k, p);
            }
        }
        Ok(DiffOp { terms })
    }

    /// `[A, B] = A∘B − B∘A`.
    pub fn commutator(&self, other: &Self) -> Result<Self, WeylError> {
        Ok(self.compose(other)?.sub(&other.compose(self)?))
    }

    pub fn pow(&self, e: u32) -> Result<Self, WeylError> {
        let mut acc = Self::identity();
        for _ in 0..e {
            acc = acc.compose(self)?;
        }
        Ok(acc)
    }

    /// Image of a polynomial under the operator.
    pub fn apply(&self, p: &ParamPoly) -> Result<ParamPoly, WeylError> {
        let mut acc = PolyAcc::default();
        for (&(i, j), c) in &self.terms {
            let d = p.diff_n(Var::T, i).diff_n(Var::U, j);
            c.mul_into(&d, &Rational::ONE, &mut acc)?;
        }
        Ok(ParamPoly::from_acc(acc))
    }

    pub fn eval_params(&self, bind: &ParamBinding) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, p)| (*k, p.eval_params(bind)))
            .filter(|(_, p)| !p.is_zero())
            .collect();
        DiffOp { terms }
    }

    /// Maximum total degree in `a, b, w` over all coefficients.
    pub fn param_degree(&self) -> u32 {
        self.terms
            .values()
            .filter_map(|p| p.param_degree())
            .max()
            .unwrap_or(0)
    }

    /// Iterates over `(∂-key, monomial, coefficient)` triples.
    pub fn flat_terms(&self) -> impl Iterator<Item = (DKey, Monomial, &Rational)> + '_ {
        self.terms
            .iter()
            .flat_map(|(k, p)| p.terms().iter().map(move |(m, c)| (*k, *m, c)))
    }

    pub fn to_json(&self) -> DiffOpJson {
        DiffOpJson {
            format: DIFFOP_FORMAT.to_string(),
            terms: self
                .terms
                .iter()
                .map(|(&(dt, du), p)| DiffOpJsonTerm {
                    dt,
                    du,
                    coeff: p.to_json_terms(),
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &DiffOpJson) -> Result<Self, WeylError> {
        if doc.format != DIFFOP_FORMAT {
            return Err(WeylError::Format(format!(
                "expected format {DIFFOP_FORMAT:?}, found {:?}",
                doc.format
            )));
        }
        let mut out = Self::zero();
        for t in &doc.terms {
            out.add_term((t.dt, t.du), &ParamPoly::from_json_terms(&t.coeff)?);
        }
        Ok(out)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, WeylError> {
        let doc: DiffOpJson =
            serde_json::from_str(s).map_err(|e| WeylError::Format(e.to_string()))?;
        Self::from_json(&doc)
    }
}

impl fmt::Debug for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::expr::print_operator(self))
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::expr::print_operator(self))
    }
}

pub const DIFFOP_FORMAT: &str = "diffop-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffOpJsonTerm {
    pub dt: u32,
    pub du: u32,
    pub coeff: Vec<JsonTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffOpJson {
    pub format: String,
    pub terms: Vec<DiffOpJsonTerm>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyring::mono;

    fn t() -> DiffOp {
        DiffOp::from_poly(ParamPoly::var(Var::T))
    }

    #[test]
    fn canonical_commutation() {
        let lhs = DiffOp::dt().compose(&t()).unwrap();
        let expected = DiffOp::monomial_op(ParamPoly::var(Var::T), 1, 0).add(&DiffOp::identity());
        assert_eq!(lhs, expected);
        assert_eq!(DiffOp::dt().commutator(&t()).unwrap(), DiffOp::identity());
    }

    #[test]
    fn euler_operator_square() {
        let e = DiffOp::monomial_op(ParamPoly::var(Var::T), 1, 0);
        let sq = e.compose(&e).unwrap();
        let t2 = ParamPoly::term(mono(&[(Var::T, 2)]), Rational::ONE);
        let expected = DiffOp::monomial_op(t2, 2, 0).add(&e);
        assert_eq!(sq, expected);
    }

    #[test]
    fn mixed_leibniz() {
        let a = DiffOp::monomial_op(ParamPoly::var(Var::U), 2, 0);
        let b = DiffOp::monomial_op(ParamPoly::var(Var::T), 0, 1);
        let ut = ParamPoly::term(mono(&[(Var::T, 1), (Var::U, 1)]), Rational::ONE);
        let expected = DiffOp::monomial_op(ut, 2, 1).add(&DiffOp::monomial_op(
            ParamPoly::var(Var::U).scale(&Rational::from_int(2)),
            1,
            1,
        ));
        assert_eq!(a.compose(&b).unwrap(), expected);
    }

    #[test]
    fn zero_order_is_sentinel() {
        assert_eq!(DiffOp::zero().order(), Order::Zero);
        assert!(Order::Zero < Order::Finite(0));
        assert_eq!(DiffOp::identity().order(), Order::Finite(0));
    }

    #[test]
    fn json_round_trip() {
        let op = DiffOp::monomial_op(ParamPoly::var(Var::W), 1, 0)
            .add(&DiffOp::du().scale(&Rational::new(-1, 2)));
        let s = op.to_json_string();
        assert_eq!(DiffOp::from_json_str(&s).unwrap(), op);
        assert!(DiffOp::from_json_str(r#"{"format":"x","terms":[]}"#).is_err());
    }
}
