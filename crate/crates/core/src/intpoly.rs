//! Integer-coefficient scratch polynomials used inside operator composition.
//!
//! Composition of operators with large coefficients is dominated by
//! multiply-accumulate on rationals. Clearing denominators first lets the inner
//! loop run on `i128`, spilling to `BigInt` only when a value overflows.

use ahash::AHashMap;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::polyring::{Monomial, ParamPoly, PolyError, Var};
use crate::rational::Rational;

#[derive(Clone, Debug)]
pub(crate) enum Z {
    S(i128),
    B(BigInt),
}

impl Z {
    fn from_big(b: BigInt) -> Z {
        match b.to_i128() {
            Some(s) => Z::S(s),
            None => Z::B(b),
        }
    }

    fn to_big(&self) -> BigInt {
        match self {
            Z::S(s) => BigInt::from(*s),
            Z::B(b) => b.clone(),
        }
    }

    fn mul(&self, other: &Z) -> Z {
        if let (Z::S(x), Z::S(y)) = (self, other) {
            if let Some(p) = x.checked_mul(*y) {
                return Z::S(p);
            }
        }
        Z::B(self.to_big() * other.to_big())
    }

    fn is_zero(&self) -> bool {
        match self {
            Z::S(s) => *s == 0,
            Z::B(b) => b.is_zero(),
        }
    }
}

/// Running sum that stays in `i128` until it cannot.
#[derive(Default)]
pub(crate) struct WideAcc {
    small: i128,
    big: Option<BigInt>,
}

impl WideAcc {
    fn add(&mut self, z: Z) {
        match z {
            Z::S(s) => match self.small.checked_add(s) {
                Some(v) => self.small = v,
                None => {
                    let b = self.big.get_or_insert_with(BigInt::zero);
                    *b += self.small;
                    *b += s;
                    self.small = 0;
                }
            },
            Z::B(b) => *self.big.get_or_insert_with(BigInt::zero) += b,
        }
    }

    fn finish(self) -> Z {
        match self.big {
            None => Z::S(self.small),
            Some(b) => Z::from_big(b + self.small),
        }
    }
}

pub(crate) type ZAcc = AHashMap<Monomial, WideAcc>;

/// A polynomial scaled to integer coefficients.
#[derive(Clone, Debug, Default)]
pub(crate) struct IntPoly {
    pub terms: Vec<(Monomial, Z)>,
}

impl IntPoly {
    /// `den * p`; `den` must clear every denominator of `p`.
    pub fn scaled(p: &ParamPoly, den: &BigInt) -> IntPoly {
        let terms = p
            .terms()
            .iter()
            .map(|(m, c)| {
                let z = match (c, den.to_i128()) {
                    (Rational::Small(n, d), Some(dd)) if dd % (*d as i128) == 0 => {
                        (*n as i128).checked_mul(dd / *d as i128).map(Z::S)
                    }
                    _ => None,
                };
                let z = z.unwrap_or_else(|| {
                    let v = c.numer() * (den / c.denom());
                    Z::from_big(v)
                });
                (*m, z)
            })
            .collect();
        IntPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn diff_n(&self, v: Var, n: u32) -> IntPoly {
        if n == 0 {
            return self.clone();
        }
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e < n {
                continue;
            }
            let f = (0..n).fold(Z::S(1), |acc, k| acc.mul(&Z::S((e - k) as i128)));
            terms.push((m.div_var(v, n).expect("checked exponent"), c.mul(&f)));
        }
        IntPoly { terms }
    }

    /// `acc += scale * self * other`.
    pub fn mul_into(&self, other: &IntPoly, scale: i128, acc: &mut ZAcc) -> Result<(), PolyError> {
        let scale = Z::S(scale);
        for (m1, c1) in &self.terms {
            let c1s = if let Z::S(1) = scale {
                c1.clone()
            } else {
                c1.mul(&scale)
            };
            for (m2, c2) in &other.terms {
                let m = m1.checked_mul(*m2).ok_or(PolyError::ExponentOverflow)?;
                acc.entry(m).or_default().add(c1s.mul(c2));
            }
        }
        Ok(())
    }
}

/// Converts an accumulator back to a rational polynomial, dividing by `den`.
pub(crate) fn finish(acc: ZAcc, den: &BigInt) -> ParamPoly {
    let small_den = den.to_i128();
    let terms = acc.into_iter().filter_map(|(m, w)| {
        let z = w.finish();
        if z.is_zero() {
            return None;
        }
        let r = match (&z, small_den) {
            (Z::S(n), Some(d)) => Rational::from_i128(*n, d),
            _ => {
                if den.is_one() {
                    Rational::from_big(num_rational::BigRational::from_integer(z.to_big()))
                } else {
                    Rational::from_bigints(z.to_big(), den.clone()).expect("nonzero denominator")
                }
            }
        };
        Some((m, r))
    });
    ParamPoly::from_terms(terms)
}
