//! Sparse polynomials in `t, u, a, b, w` over exact rationals.
//!
//! Monomials are packed into a single `u128`: the total degree sits in the
//! top field, followed by the exponents of `t, u, a, b, w`. Integer order on
//! the packed word is therefore exactly graded-lex order with
//! `t > u > a > b > w`, and monomial multiplication is one addition.

use std::cmp::Ordering;
use std::fmt;

use ahash::AHashMap;
use serde::{Deserialize, Serialize};

use crate::rational::{ParseRationalError, Rational};

/// Hard cap on any single exponent (exclusive).
pub const EXPONENT_CAP: u32 = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    U,
    A,
    B,
    W,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::T, Var::U, Var::A, Var::B, Var::W];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::U => "u",
            Var::A => "a",
            Var::B => "b",
            Var::W => "w",
        }
    }

    fn shift(self) -> u32 {
        match self {
            Var::T => 64,
            Var::U => 48,
            Var::A => 32,
            Var::B => 16,
            Var::W => 0,
        }
    }

    pub fn is_param(self) -> bool {
        matches!(self, Var::A | Var::B | Var::W)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("exponent overflow: an exponent reached the cap {EXPONENT_CAP}")]
    ExponentOverflow,
    #[error("cannot differentiate with respect to parameter {0}")]
    NotDifferentiable(&'static str),
    #[error("bad coefficient: {0}")]
    BadCoefficient(#[from] ParseRationalError),
}

const DEG_SHIFT: u32 = 80;
const FIELD_MASK: u128 = 0xFFFF;
const GUARD: u128 = {
    let g: u128 = 0x8000;
    g | (g << 16) | (g << 32) | (g << 48) | (g << 64)
};

/// Exponent vector `(e_t, e_u, e_a, e_b, e_w)` with the total degree cached.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(u128);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn new(et: u32, eu: u32, ea: u32, eb: u32, ew: u32) -> Result<Self, PolyError> {
        let mut m = 0u128;
        for (v, e) in Var::ALL.iter().zip([et, eu, ea, eb, ew]) {
            if e >= EXPONENT_CAP {
                return Err(PolyError::ExponentOverflow);
            }
            m |= (e as u128) << v.shift();
        }
        let deg = (et + eu + ea + eb + ew) as u128;
        Ok(Monomial(m | (deg << DEG_SHIFT)))
    }

    pub fn var(v: Var, e: u32) -> Result<Self, PolyError> {
        let mut ex = [0u32; 5];
        ex[v as usize] = e;
        Self::new(ex[0], ex[1], ex[2], ex[3], ex[4])
    }

    #[inline]
    pub fn exp(self, v: Var) -> u32 {
        ((self.0 >> v.shift()) & FIELD_MASK) as u32
    }

    pub fn exponents(self) -> [u32; 5] {
        Var::ALL.map(|v| self.exp(v))
    }

    #[inline]
    pub fn degree(self) -> u32 {
        (self.0 >> DEG_SHIFT) as u32
    }

    /// Degree in `a, b, w` only.
    pub fn param_degree(self) -> u32 {
        self.exp(Var::A) + self.exp(Var::B) + self.exp(Var::W)
    }

    #[inline]
    pub fn checked_mul(self, other: Monomial) -> Option<Monomial> {
        let s = self.0 + other.0;
        if s & GUARD != 0 {
            None
        } else {
            Some(Monomial(s))
        }
    }

    /// Divides by `v^e`; `None` if the exponent is too small.
    #[inline]
    pub fn div_var(self, v: Var, e: u32) -> Option<Monomial> {
        if self.exp(v) < e {
            return None;
        }
        Some(Monomial(
            self.0 - ((e as u128) << v.shift()) - ((e as u128) << DEG_SHIFT),
        ))
    }

    /// Splits into the `(t,u)` part and the `(a,b,w)` part.
    pub fn split_tu(self) -> (Monomial, Monomial) {
        let tu = (self.exp(Var::T), self.exp(Var::U));
        let x = Monomial::new(tu.0, tu.1, 0, 0, 0).expect("within cap");
        let p = Monomial::new(0, 0, self.exp(Var::A), self.exp(Var::B), self.exp(Var::W))
            .expect("within cap");
        (x, p)
    }

    pub fn is_param_only(self) -> bool {
        self.exp(Var::T) == 0 && self.exp(Var::U) == 0
    }

    pub fn raw(self) -> u128 {
        self.0
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", MonomialDisplay(*self))
    }
}

struct MonomialDisplay(Monomial);

impl fmt::Display for MonomialDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in Var::ALL {
            let e = self.0.exp(v);
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if e == 1 {
                f.write_str(v.name())?;
            } else {
                write!(f, "{}^{}", v.name(), e)?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

/// Sparse polynomial with terms sorted in descending graded-lex order.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ParamPoly {
    terms: Vec<(Monomial, Rational)>,
}

pub type PolyAcc = AHashMap<Monomial, Rational>;

impl ParamPoly {
    pub fn zero() -> Self {
        ParamPoly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::ONE)
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(Monomial::ONE, c)
    }

    pub fn int(n: i64) -> Self {
        Self::constant(Rational::from_int(n))
    }

    pub fn term(m: Monomial, c: Rational) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            ParamPoly {
                terms: vec![(m, c)],
            }
        }
    }

    pub fn var(v: Var) -> Self {
        Self::term(Monomial::var(v, 1).expect("within cap"), Rational::ONE)
    }

    /// Builds a polynomial from arbitrary (possibly repeated, possibly zero) terms.
    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut acc = PolyAcc::default();
        for (m, c) in terms {
            *acc.entry(m).or_default() += &c;
        }
        Self::from_acc(acc)
    }

    pub fn from_acc(acc: PolyAcc) -> Self {
        let mut terms: Vec<_> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by_key(|x| std::cmp::Reverse(x.0));
        ParamPoly { terms }
    }

    /// Wraps terms that are already sorted descending, distinct and nonzero.
    fn from_sorted_unchecked(terms: Vec<(Monomial, Rational)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 > w[1].0));
        debug_assert!(terms.iter().all(|(_, c)| !c.is_zero()));
        ParamPoly { terms }
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

    pub fn terms(&self) -> &[(Monomial, Rational)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(Monomial, Rational)> {
        self.terms
    }

    pub fn coeff(&self, m: Monomial) -> Rational {
        match self.terms.binary_search_by(|(x, _)| m.cmp(x)) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => Rational::ZERO,
        }
    }

    /// The constant value if this polynomial has no variables.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::ZERO),
            [(m, c)] if *m == Monomial::ONE => Some(c.clone()),
            _ => None,
        }
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.first().map(|(m, _)| m.degree())
    }

    pub fn degree_in(&self, v: Var) -> Option<u32> {
        self.terms.iter().map(|(m, _)| m.exp(v)).max()
    }

    pub fn param_degree(&self) -> Option<u32> {
        self.terms.iter().map(|(m, _)| m.param_degree()).max()
    }

    pub fn is_param_only(&self) -> bool {
        self.terms.iter().all(|(m, _)| m.is_param_only())
    }

    pub fn neg(&self) -> Self {
        ParamPoly {
            terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect(),
        }
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        ParamPoly {
            terms: self.terms.iter().map(|(m, c)| (*m, c * s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.merge(other, false)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.merge(other, true)
    }

    fn merge(&self, other: &Self, negate: bool) -> Self {
        let (x, y) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(x.len() + y.len());
        let (mut i, mut j) = (0, 0);
        let fix = |c: &Rational| if negate { -c } else { c.clone() };
        while i < x.len() && j < y.len() {
            match x[i].0.cmp(&y[j].0) {
                Ordering::Greater => {
                    out.push(x[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push((y[j].0, fix(&y[j].1)));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = if negate {
                        &x[i].1 - &y[j].1
                    } else {
                        &x[i].1 + &y[j].1
                    };
                    if !c.is_zero() {
                        out.push((x[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&x[i..]);
        out.extend(y[j..].iter().map(|(m, c)| (*m, fix(c))));
        Self::from_sorted_unchecked(out)
    }

    /// Multiplies by a single monomial (order preserving).
    pub fn mul_monomial(&self, m: Monomial, c: &Rational) -> Result<Self, PolyError> {
        if c.is_zero() {
            return Ok(Self::zero());
        }
        let mut out = Vec::with_capacity(self.terms.len());
        for (x, d) in &self.terms {
            out.push((x.checked_mul(m).ok_or(PolyError::ExponentOverflow)?, d * c));
        }
        Ok(Self::from_sorted_unchecked(out))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, PolyError> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        if other.terms.len() == 1 {
            return self.mul_monomial(other.terms[0].0, &other.terms[0].1);
        }
        if self.terms.len() == 1 {
            return other.mul_monomial(self.terms[0].0, &self.terms[0].1);
        }
        let mut acc = PolyAcc::with_capacity(self.terms.len() * other.terms.len() / 2 + 1);
        self.mul_into(other, &Rational::ONE, &mut acc)?;
        Ok(Self::from_acc(acc))
    }

    /// `acc += scale * self * other`.
    pub fn mul_into(
        &self,
        other: &Self,
        scale: &Rational,
        acc: &mut PolyAcc,
    ) -> Result<(), PolyError> {
        for (m1, c1) in &self.terms {
            let c1s = c1 * scale;
            for (m2, c2) in &other.terms {
                let m = m1.checked_mul(*m2).ok_or(PolyError::ExponentOverflow)?;
                acc.entry(m).or_default().add_mul(&c1s, c2);
            }
        }
        Ok(())
    }

    /// `acc += scale * self`.
    pub fn add_into(&self, scale: &Rational, acc: &mut PolyAcc) {
        for (m, c) in &self.terms {
            acc.entry(*m).or_default().add_mul(c, scale);
        }
    }

    pub fn pow(&self, e: u32) -> Result<Self, PolyError> {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    /// Partial derivative with respect to `t` or `u`.
    pub fn diff(&self, v: Var) -> Result<Self, PolyError> {
        if v.is_param() {
            return Err(PolyError::NotDifferentiable(v.name()));
        }
        Ok(self.diff_n(v, 1))
    }

    /// `n`-th partial derivative in `v` (no restriction on `v`).
    pub fn diff_n(&self, v: Var, n: u32) -> Self {
        if n == 0 {
            return self.clone();
        }
        let mut out = Vec::new();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e < n {
                continue;
            }
            let mut f: i64 = 1;
            let mut big = false;
            for k in 0..n {
                match f.checked_mul((e - k) as i64) {
                    Some(x) => f = x,
                    None => {
                        big = true;
                        break;
                    }
                }
            }
            let factor = if big {
                (0..n).fold(Rational::ONE, |acc, k| {
                    &acc * &Rational::from_int((e - k) as i64)
                })
            } else {
                Rational::from_int(f)
            };
            out.push((m.div_var(v, n).expect("checked exponent"), c * &factor));
        }
        // Dividing every term by v^n preserves graded-lex order.
        Self::from_sorted_unchecked(out)
    }

    /// Substitutes the bound parameters; unbound variables are untouched.
    pub fn eval_params(&self, bind: &ParamBinding) -> Self {
        if bind.is_empty() {
            return self.clone();
        }
        let mut acc = PolyAcc::default();
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            let mut ex = m.exponents();
            for (slot, v) in [(2usize, Var::A), (3, Var::B), (4, Var::W)] {
                if let Some(val) = bind.get(v) {
                    coef = &coef * &val.pow(ex[slot]);
                    ex[slot] = 0;
                }
            }
            if coef.is_zero() {
                continue;
            }
            let nm =
                Monomial::new(ex[0], ex[1], ex[2], ex[3], ex[4]).expect("exponents only decrease");
            *acc.entry(nm).or_default() += &coef;
        }
        Self::from_acc(acc)
    }

    /// Full evaluation at a point `[t, u, a, b, w]`.
    pub fn eval(&self, point: &[Rational; 5]) -> Rational {
        let mut total = Rational::ZERO;
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for (i, var) in Var::ALL.iter().enumerate() {
                let e = m.exp(*var);
                if e > 0 {
                    v = &v * &point[i].pow(e);
                }
            }
            total += &v;
        }
        total
    }

    /// Groups terms by their `(t,u)` part: returns (tu-monomial, coefficient in a,b,w).
    pub fn split_by_tu(&self) -> Vec<(Monomial, ParamPoly)> {
        let mut groups: AHashMap<Monomial, Vec<(Monomial, Rational)>> = AHashMap::default();
        for (m, c) in &self.terms {
            let (x, p) = m.split_tu();
            groups.entry(x).or_default().push((p, c.clone()));
        }
        let mut out: Vec<_> = groups
            .into_iter()
            .map(|(x, ts)| (x, ParamPoly::from_terms(ts)))
            .collect();
        out.sort_by_key(|x| std::cmp::Reverse(x.0));
        out
    }

    pub fn to_json_terms(&self) -> Vec<JsonTerm> {
        self.terms
            .iter()
            .map(|(m, c)| JsonTerm {
                num: c.numer_string(),
                den: c.denom_string(),
                exp: JsonExp {
                    t: m.exp(Var::T),
                    u: m.exp(Var::U),
                    a: m.exp(Var::A),
                    b: m.exp(Var::B),
                    w: m.exp(Var::W),
                },
            })
            .collect()
    }

    pub fn from_json_terms(terms: &[JsonTerm]) -> Result<Self, PolyError> {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            let c = Rational::from_decimal_parts(&t.num, &t.den)?;
            let e = &t.exp;
            out.push((Monomial::new(e.t, e.u, e.a, e.b, e.w)?, c));
        }
        Ok(Self::from_terms(out))
    }
}

impl fmt::Debug for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Renders in the operator-expression syntax, e.g. `3/2*t^2*u - w + 1`.
impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if *m == Monomial::ONE {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", MonomialDisplay(*m))?;
            } else {
                write!(f, "{mag}*{}", MonomialDisplay(*m))?;
            }
        }
        Ok(())
    }
}

impl std::ops::Add for &ParamPoly {
    type Output = ParamPoly;
    fn add(self, rhs: &ParamPoly) -> ParamPoly {
        ParamPoly::add(self, rhs)
    }
}

impl std::ops::Sub for &ParamPoly {
    type Output = ParamPoly;
    fn sub(self, rhs: &ParamPoly) -> ParamPoly {
        ParamPoly::sub(self, rhs)
    }
}

/// Panics on exponent overflow; use [`ParamPoly::checked_mul`] when inputs are untrusted.
impl std::ops::Mul for &ParamPoly {
    type Output = ParamPoly;
    fn mul(self, rhs: &ParamPoly) -> ParamPoly {
        self.checked_mul(rhs)
            .expect("exponent overflow in polynomial product")
    }
}

impl std::ops::Neg for &ParamPoly {
    type Output = ParamPoly;
    fn neg(self) -> ParamPoly {
        ParamPoly::neg(self)
    }
}

/// Partial assignment of the parameters `a, b, w`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamBinding {
    pub a: Option<Rational>,
    pub b: Option<Rational>,
    pub w: Option<Rational>,
}

impl ParamBinding {
    pub fn omega_zero() -> Self {
        ParamBinding {
            w: Some(Rational::ZERO),
            ..Default::default()
        }
    }

    pub fn all(a: Rational, b: Rational, w: Rational) -> Self {
        ParamBinding {
            a: Some(a),
            b: Some(b),
            w: Some(w),
        }
    }

    pub fn get(&self, v: Var) -> Option<&Rational> {
        match v {
            Var::A => self.a.as_ref(),
            Var::B => self.b.as_ref(),
            Var::W => self.w.as_ref(),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_none() && self.b.is_none() && self.w.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonExp {
    #[serde(default)]
    pub t: u32,
    #[serde(default)]
    pub u: u32,
    #[serde(default)]
    pub a: u32,
    #[serde(default)]
    pub b: u32,
    #[serde(default)]
    pub w: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsonTerm {
    pub num: String,
    pub den: String,
    pub exp: JsonExp,
}

/// Shorthand constructor used throughout the crate: `mono(&[(Var::T, 2), (Var::U, 1)])`.
pub fn mono(exps: &[(Var, u32)]) -> Monomial {
    let mut e = [0u32; 5];
    for (v, k) in exps {
        e[*v as usize] += k;
    }
    Monomial::new(e[0], e[1], e[2], e[3], e[4]).expect("exponent within cap")
}
