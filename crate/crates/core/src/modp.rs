//! Arithmetic modulo word-sized primes and parameter-free operators over `F_p`.
//!
//! The reduction engine uses these to solve many small specialized systems
//! quickly; nothing computed here is trusted without exact re-verification.

use std::sync::OnceLock;

use ahash::AHashMap;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};

use crate::polyring::Var;
use crate::rational::Rational;
use crate::weyl::DiffOp;

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'outer: for &b in &BASES {
        let mut x = pow_mod(b, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// The `i`-th largest prime below `2^62`.
pub fn prime(i: usize) -> u64 {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    let list = PRIMES.get_or_init(|| {
        let mut v = Vec::new();
        let mut n = (1u64 << 62) - 1;
        while v.len() < 32 {
            if is_prime(n) {
                v.push(n);
            }
            n -= 2;
        }
        v
    });
    list[i]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    pub p: u64,
}

impl Field {
    pub fn new(p: u64) -> Self {
        Field { p }
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.p)
    }

    pub fn neg(self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn pow(self, a: u64, e: u64) -> u64 {
        pow_mod(a, e, self.p)
    }

    /// Panics on zero.
    pub fn inv(self, a: u64) -> u64 {
        assert!(a != 0, "inverse of zero mod p");
        pow_mod(a, self.p - 2, self.p)
    }

    pub fn from_i64(self, n: i64) -> u64 {
        let r = (n as i128).rem_euclid(self.p as i128);
        r as u64
    }

    pub fn from_bigint(self, n: &BigInt) -> u64 {
        let r = n.mod_floor(&BigInt::from(self.p));
        r.to_u64().expect("reduced residue fits")
    }

    /// `None` when the denominator vanishes mod `p`.
    pub fn from_rational(self, r: &Rational) -> Option<u64> {
        let (n, d) = match r {
            Rational::Small(n, d) => (self.from_i64(*n), self.from_i64(*d)),
            Rational::Big(b) => (self.from_bigint(b.numer()), self.from_bigint(b.denom())),
        };
        if d == 0 {
            None
        } else {
            Some(self.mul(n, self.inv(d)))
        }
    }
}

/// Packs `(dt, du, et, eu)`; each part must be below `2^16`.
#[inline]
pub fn pack_key(i: u32, j: u32, et: u32, eu: u32) -> u64 {
    debug_assert!(i < 1 << 16 && j < 1 << 16 && et < 1 << 16 && eu < 1 << 16);
    ((i as u64) << 48) | ((j as u64) << 32) | ((et as u64) << 16) | eu as u64
}

#[inline]
pub fn unpack_key(k: u64) -> (u32, u32, u32, u32) {
    (
        (k >> 48) as u32,
        ((k >> 32) & 0xffff) as u32,
        ((k >> 16) & 0xffff) as u32,
        (k & 0xffff) as u32,
    )
}

/// Coefficient poly in `(t, u)` over `F_p`: `((et, eu), c)` with `c != 0`.
type TuPoly = Vec<((u32, u32), u64)>;

/// An operator with every parameter substituted, reduced mod `p`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModOp {
    /// Sorted by key; polys sorted by exponents.
    terms: Vec<((u32, u32), TuPoly)>,
}

impl ModOp {
    pub fn identity() -> Self {
        ModOp {
            terms: vec![((0, 0), vec![((0, 0), 1)])],
        }
    }

    /// Substitutes `a, b, w` and reduces. `None` if a coefficient denominator vanishes mod `p`.
    pub fn specialize(op: &DiffOp, f: Field, a: u64, b: u64, w: u64) -> Option<Self> {
        let mut terms = Vec::new();
        for (&(i, j), poly) in op.terms() {
            let mut acc: AHashMap<(u32, u32), u64> = AHashMap::new();
            for (m, c) in poly.terms() {
                let mut v = f.from_rational(c)?;
                v = f.mul(v, f.pow(a, m.exp(Var::A) as u64));
                v = f.mul(v, f.pow(b, m.exp(Var::B) as u64));
                v = f.mul(v, f.pow(w, m.exp(Var::W) as u64));
                let e = acc.entry((m.exp(Var::T), m.exp(Var::U))).or_insert(0);
                *e = f.add(*e, v);
            }
            let mut p: TuPoly = acc.into_iter().filter(|(_, c)| *c != 0).collect();
            if !p.is_empty() {
                p.sort_unstable();
                terms.push(((i, j), p));
            }
        }
        Some(ModOp { terms })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Flat `(packed key, value)` list, sorted by key.
    pub fn entries(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self
            .terms
            .iter()
            .flat_map(|((i, j), p)| {
                let (i, j) = (*i, *j);
                p.iter()
                    .map(move |&((et, eu), c)| (pack_key(i, j, et, eu), c))
            })
            .collect();
        v.sort_unstable();
        v
    }

    pub fn from_entries(f: Field, entries: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let _ = f;
        let mut map: std::collections::BTreeMap<(u32, u32), TuPoly> = Default::default();
        for (k, c) in entries {
            if c == 0 {
                continue;
            }
            let (i, j, et, eu) = unpack_key(k);
            map.entry((i, j)).or_default().push(((et, eu), c));
        }
        let terms = map
            .into_iter()
            .map(|(k, mut p)| {
                p.sort_unstable();
                (k, p)
            })
            .collect();
        ModOp { terms }
    }

    pub fn sub(&self, other: &Self, f: Field) -> Self {
        let mut acc: AHashMap<u64, u64> = self.entries().into_iter().collect();
        for (k, c) in other.entries() {
            let e = acc.entry(k).or_insert(0);
            *e = f.sub(*e, c);
        }
        Self::from_entries(f, acc)
    }

    /// `self ∘ other` by the Leibniz rule.
    pub fn compose(&self, other: &Self, f: Field) -> Self {
        if self.is_zero() || other.is_zero() {
            return ModOp::default();
        }
        let max_r = self.terms.iter().map(|(k, _)| k.0).max().unwrap_or(0);
        let max_s = self.terms.iter().map(|(k, _)| k.1).max().unwrap_or(0);
        let binom = binom_table(f, max_r.max(max_s));
        // derivs[b][r][s]
        let derivs: Vec<Vec<Vec<TuPoly>>> = other
            .terms
            .iter()
            .map(|(_, q)| {
                (0..=max_r)
                    .map(|r| (0..=max_s).map(|s| diff_tu(q, r, s, f)).collect())
                    .collect()
            })
            .collect();
        let mut acc: AHashMap<u64, u64> = AHashMap::new();
        for &((i1, j1), ref pa) in &self.terms {
            for (bi, &((i2, j2), _)) in other.terms.iter().enumerate() {
                for r in 0..=i1 {
                    for s in 0..=j1 {
                        let dq = &derivs[bi][r as usize][s as usize];
                        if dq.is_empty() {
                            continue;
                        }
                        let c = f.mul(
                            binom[i1 as usize][r as usize],
                            binom[j1 as usize][s as usize],
                        );
                        let (oi, oj) = (i1 - r + i2, j1 - s + j2);
                        for &((at, au), ca) in pa {
                            let cac = f.mul(ca, c);
                            for &((bt, bu), cb) in dq {
                                let key = pack_key(oi, oj, at + bt, au + bu);
                                let e = acc.entry(key).or_insert(0);
                                *e = f.add(*e, f.mul(cac, cb));
                            }
                        }
                    }
                }
            }
        }
        Self::from_entries(f, acc)
    }
}

fn binom_table(f: Field, n: u32) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = vec![vec![1]];
    for n in 1..=n as usize {
        let prev = &rows[n - 1];
        let mut row = vec![1u64; n + 1];
        for k in 1..n {
            row[k] = f.add(prev[k - 1], prev[k]);
        }
        rows.push(row);
    }
    rows
}

fn diff_tu(q: &TuPoly, r: u32, s: u32, f: Field) -> TuPoly {
    let mut out = Vec::new();
    for &((et, eu), c) in q {
        if et < r || eu < s {
            continue;
        }
        let mut v = c;
        for k in 0..r {
            v = f.mul(v, (et - k) as u64 % f.p);
        }
        for k in 0..s {
            v = f.mul(v, (eu - k) as u64 % f.p);
        }
        if v != 0 {
            out.push(((et - r, eu - s), v));
        }
    }
    out
}

/// Chinese remaindering followed by rational reconstruction.
pub struct Crt {
    modulus: BigInt,
    residue: BigInt,
}

impl Crt {
    pub fn new(r: u64, p: u64) -> Self {
        Crt {
            modulus: BigInt::from(p),
            residue: BigInt::from(r),
        }
    }

    pub fn push(&mut self, r: u64, p: u64) {
        let pb = BigInt::from(p);
        // x = residue + modulus * k, with k = (r - residue) / modulus mod p
        let f = Field::new(p);
        let cur = f.from_bigint(&self.residue);
        let minv = f.inv(f.from_bigint(&self.modulus));
        let k = f.mul(f.sub(r, cur), minv);
        self.residue += &self.modulus * BigInt::from(k);
        self.modulus *= pb;
    }

    /// The unique `n/d` with `|n|, d ≤ sqrt(M/2)` congruent to the residue, if any.
    pub fn reconstruct(&self) -> Option<Rational> {
        let m = &self.modulus;
        let bound = (m / 2u32).sqrt();
        let (mut r0, mut r1) = (m.clone(), self.residue.mod_floor(m));
        let (mut s0, mut s1) = (BigInt::from(0), BigInt::from(1));
        while r1 > bound {
            let q = &r0 / &r1;
            let r2 = &r0 - &q * &r1;
            let s2 = &s0 - &q * &s1;
            r0 = r1;
            r1 = r2;
            s0 = s1;
            s1 = s2;
        }
        if s1.is_negative() {
            s1 = -s1;
            r1 = -r1;
        }
        if s1 == BigInt::from(0) || s1 > bound {
            return None;
        }
        if r1.gcd(&s1) != BigInt::from(1) {
            return None;
        }
        Rational::from_bigints(r1, s1).ok()
    }
}
