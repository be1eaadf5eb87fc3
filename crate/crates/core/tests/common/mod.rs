//! Shared generators and a naive reference model for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ttw_core::polyring::Monomial;
use ttw_core::{DiffOp, ParamPoly, Rational};

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

pub fn small_rational() -> impl Strategy<Value = Rational> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Rational::new(n, d))
}

pub fn small_poly() -> impl Strategy<Value = ParamPoly> {
    prop::collection::vec(([0u32..3, 0..3, 0..2, 0..2, 0..2], small_rational()), 0..5).prop_map(
        |ts| {
            ParamPoly::from_terms(
                ts.into_iter()
                    .map(|(e, c)| (Monomial::new(e[0], e[1], e[2], e[3], e[4]).unwrap(), c)),
            )
        },
    )
}

pub fn small_op() -> impl Strategy<Value = DiffOp> {
    prop::collection::vec(((0u32..3, 0u32..3), small_poly()), 0..4).prop_map(DiffOp::from_terms)
}

pub fn random_poly(rng: &mut ChaCha8Rng, terms: usize, max_exp: u32) -> ParamPoly {
    ParamPoly::from_terms((0..terms).map(|_| {
        let e: Vec<u32> = (0..5)
            .map(|i| rng.gen_range(0..=if i < 2 { max_exp } else { 1 }))
            .collect();
        let c = Rational::new(rng.gen_range(-9..=9), rng.gen_range(1..=5));
        (Monomial::new(e[0], e[1], e[2], e[3], e[4]).unwrap(), c)
    }))
}

pub fn random_op(rng: &mut ChaCha8Rng, terms: usize, max_order: u32) -> DiffOp {
    DiffOp::from_terms((0..terms).map(|_| {
        let key = (rng.gen_range(0..=max_order), rng.gen_range(0..=max_order));
        (key, random_poly(rng, 3, 2))
    }))
}

/// Reference polynomial: exponent vectors `(t, u, a, b, w)` mapped to big rationals.
pub type Naive = BTreeMap<[u32; 5], BigRational>;

pub fn to_naive(p: &ParamPoly) -> Naive {
    p.terms()
        .iter()
        .map(|(m, c)| (m.exponents(), c.to_big()))
        .collect()
}

fn clean(mut p: Naive) -> Naive {
    p.retain(|_, c| !c.is_zero());
    p
}

pub fn naive_add(a: &Naive, b: &Naive) -> Naive {
    let mut out = a.clone();
    for (e, c) in b {
        *out.entry(*e).or_insert_with(BigRational::zero) += c;
    }
    clean(out)
}

pub fn naive_mul(a: &Naive, b: &Naive) -> Naive {
    let mut out = Naive::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = [
                ea[0] + eb[0],
                ea[1] + eb[1],
                ea[2] + eb[2],
                ea[3] + eb[3],
                ea[4] + eb[4],
            ];
            *out.entry(e).or_insert_with(BigRational::zero) += ca * cb;
        }
    }
    clean(out)
}

/// Repeated single differentiation in variable index `v` (0 = t, 1 = u).
pub fn naive_diff(a: &Naive, v: usize, times: u32) -> Naive {
    let mut cur = a.clone();
    for _ in 0..times {
        let mut next = Naive::new();
        for (e, c) in &cur {
            if e[v] > 0 {
                let mut e2 = *e;
                e2[v] -= 1;
                *next.entry(e2).or_insert_with(BigRational::zero) +=
                    c * BigRational::from_integer(BigInt::from(e[v]));
            }
        }
        cur = clean(next);
    }
    cur
}

/// `A(f) = Σ c_ij ∂t^i ∂u^j f` computed term by term.
pub fn naive_apply(op: &DiffOp, f: &Naive) -> Naive {
    let mut out = Naive::new();
    for (&(i, j), c) in op.terms() {
        let d = naive_diff(&naive_diff(f, 0, i), 1, j);
        out = naive_add(&out, &naive_mul(&to_naive(c), &d));
    }
    out
}

/// Evaluates a reference polynomial at a full point.
pub fn naive_eval(a: &Naive, point: &[BigRational; 5]) -> BigRational {
    let mut acc = BigRational::zero();
    for (e, c) in a {
        let mut term = c.clone();
        for (x, k) in point.iter().zip(e) {
            let mut pw = BigRational::one();
            for _ in 0..*k {
                pw *= x;
            }
            term *= pw;
        }
        acc += term;
    }
    acc
}
