//! Polynomial ring, Weyl algebra and expression layer: worked examples and
//! algebraic laws checked against a naive reference model.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use num_rational::BigRational;
use ttw_core::catalog::{first_integral, hamiltonian, second_integral};
use ttw_core::expr::{parse_operator, parse_poly, print_operator};
use ttw_core::hidden_algebra::{Algebra, GeneratorId};
use ttw_core::polyring::PolyError;
use ttw_core::weyl::{Order, WeylError};
use ttw_core::{DiffOp, ParamBinding, ParamPoly, Rational, Var};

fn pp(s: &str) -> ParamPoly {
    parse_poly(s).unwrap()
}

fn op(s: &str) -> DiffOp {
    parse_operator(s).unwrap()
}

#[test]
fn poly_add_examples() {
    assert_eq!(&pp("t + u") + &pp("t - u"), pp("2*t"));
    let p = pp("3*t^2*u - a*w");
    assert_eq!(&p + &ParamPoly::zero(), p);
    assert_eq!(&pp("a*t") + &pp("b*t"), pp("(a + b)*t"));
}

#[test]
fn poly_mul_examples() {
    assert_eq!(&pp("t + u") * &pp("t - u"), pp("t^2 - u^2"));
    let k = 3;
    let coeff = &pp("2*b + 1") * &ParamPoly::var(Var::T).pow(k - 1).unwrap();
    assert_eq!(coeff, pp("(2*b + 1)*t^2"));
    assert!((&ParamPoly::zero() * &pp("t^4 - w")).is_zero());
}

#[test]
fn poly_diff_examples() {
    assert_eq!(pp("t^3*u").diff(Var::T).unwrap(), pp("3*t^2*u"));
    assert!(pp("w*t^2").diff(Var::U).unwrap().is_zero());
    assert!(matches!(
        pp("a*t").diff(Var::A),
        Err(PolyError::NotDifferentiable(_))
    ));

    // d/du u(t - u) = t - 2u, checked at random rational points
    let lhs = pp("u*(t - u)").diff(Var::U).unwrap();
    let rhs = pp("t - 2*u");
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    for _ in 0..5 {
        let pt: [Rational; 5] =
            std::array::from_fn(|_| Rational::new(rng.gen_range(-50..50), rng.gen_range(1..20)));
        assert_eq!(lhs.eval(&pt), rhs.eval(&pt));
    }
}

#[test]
fn poly_eval_params_examples() {
    assert_eq!(
        pp("4*w*t - 4*(a + b + 1)").eval_params(&ParamBinding::omega_zero()),
        pp("-4*(a + b + 1)")
    );
    let zero = ParamBinding::all(Rational::ZERO, Rational::ZERO, Rational::ZERO);
    assert_eq!(
        pp("16*((a + b)^2 - 1)").eval_params(&zero),
        ParamPoly::int(-16)
    );
    let p = pp("a^2*t - b*w*u + 7");
    assert_eq!(p.eval_params(&ParamBinding::default()), p);
}

#[test]
fn op_linear_examples() {
    let a = op("t*Dt^2 + (a - w)*u*Du");
    let zero = DiffOp::linear(&[(ParamPoly::one(), a.clone()), (ParamPoly::int(-1), a)]).unwrap();
    assert!(zero.is_zero());
    let wdt = DiffOp::linear(&[(ParamPoly::var(Var::W), DiffOp::dt())]).unwrap();
    assert_eq!(wdt.terms().len(), 1);
    assert_eq!(wdt.coeff(1, 0), ParamPoly::var(Var::W));

    // 8H + 16 I2 at k = 1: the first-degree part of the k = 1 double commutator
    let h = hamiltonian(1).unwrap();
    let i2 = second_integral(1).unwrap();
    let tail = DiffOp::linear(&[
        (ParamPoly::int(8), h.clone()),
        (ParamPoly::int(16), i2.clone()),
    ])
    .unwrap();
    assert_eq!(
        tail,
        h.scale(&Rational::from_int(8))
            .add(&i2.scale(&Rational::from_int(16)))
    );
    assert_eq!(tail.order(), Order::Finite(2));
}

#[test]
fn op_compose_examples() {
    assert_eq!(DiffOp::dt().compose(&op("t")).unwrap(), op("t*Dt + 1"));
    let e = op("t*Dt");
    assert_eq!(e.compose(&e).unwrap(), op("t^2*Dt^2 + t*Dt"));
    for n in 0..6u32 {
        let tn = ParamPoly::var(Var::T).pow(n).unwrap();
        assert_eq!(
            e.compose(&e).unwrap().apply(&tn).unwrap(),
            tn.scale(&Rational::from_int((n * n) as i64))
        );
    }
    let lhs = op("u*Dt^2").compose(&op("t*Du")).unwrap();
    assert_eq!(lhs, op("u*t*Dt^2*Du + 2*u*Dt*Du"));
    let f = to_naive(&pp("t^4*u^3 + t*u^2"));
    assert_eq!(
        to_naive(&lhs.apply(&pp("t^4*u^3 + t*u^2")).unwrap()),
        naive_apply(&op("u*Dt^2"), &naive_apply(&op("t*Du"), &f))
    );
}

#[test]
fn op_commutator_examples() {
    assert_eq!(
        DiffOp::dt().commutator(&op("t")).unwrap(),
        DiffOp::identity()
    );
    let h = hamiltonian(1).unwrap();
    assert!(h.commutator(&first_integral(1).unwrap()).unwrap().is_zero());
    let alg = Algebra::new(1, Rational::from_int(5)).unwrap();
    let j1 = alg.build(GeneratorId::J1).unwrap();
    let j2 = alg.build(GeneratorId::J2).unwrap();
    assert_eq!(j2.commutator(&j1).unwrap(), j1.neg());
}

#[test]
fn op_apply_examples() {
    for k in 1..=6 {
        assert!(
            hamiltonian(k)
                .unwrap()
                .apply(&ParamPoly::one())
                .unwrap()
                .is_zero(),
            "h_{k}(1)"
        );
        assert!(
            first_integral(k)
                .unwrap()
                .apply(&ParamPoly::one())
                .unwrap()
                .is_zero(),
            "x_{k}(1)"
        );
    }
    assert_eq!(
        hamiltonian(1).unwrap().apply(&pp("t")).unwrap(),
        pp("4*w*t - 4*(a + b + 1)")
    );
}

#[test]
fn zero_operator_order() {
    assert_eq!(DiffOp::zero().order(), Order::Zero);
    assert_eq!(op("t*Dt^3*Du + Du^2").order(), Order::Finite(4));
}

#[test]
fn exponent_overflow_is_an_error() {
    let big = ParamPoly::var(Var::T).pow(20_000).unwrap();
    assert!(matches!(
        big.checked_mul(&big),
        Err(PolyError::ExponentOverflow)
    ));
    let d = DiffOp::from_poly(big.clone());
    assert!(matches!(
        d.compose(&d),
        Err(WeylError::Poly(PolyError::ExponentOverflow))
    ));
}

#[test]
fn expr_examples() {
    assert_eq!(op("Dt*t - t*Dt"), DiffOp::identity());
    let h1 = op("-4*t*Dt^2 - 8*u*Dt*Du - 4*u*Du^2 + 4*(w*t - a - b - 1)*Dt + 4*(w*u - b - 1/2)*Du");
    assert_eq!(h1, hamiltonian(1).unwrap());
    assert!(op("0").is_zero());
    assert_eq!(print_operator(&DiffOp::zero()), "0");
    assert_eq!(print_operator(&DiffOp::dt()), "Dt");
}

#[test]
fn parse_errors() {
    for bad in ["t +", "Dx", "(t", "t^", "1/0", "t $ u", "t^99999999"] {
        assert!(parse_operator(bad).is_err(), "{bad:?} should not parse");
    }
    assert!(parse_poly("t*Dt").is_err());
}

fn big_point(v: &[Rational; 5]) -> [BigRational; 5] {
    std::array::from_fn(|i| v[i].to_big())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ring_axioms(p in small_poly(), q in small_poly(), r in small_poly()) {
        prop_assert_eq!(&p + &q, &q + &p);
        prop_assert_eq!(&p * &q, &q * &p);
        prop_assert_eq!(&(&p + &q) + &r, &p + &(&q + &r));
        prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
        prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
        prop_assert!((&p - &p).is_zero());
        prop_assert_eq!(&p * &ParamPoly::one(), p.clone());
    }

    #[test]
    fn ring_matches_reference(p in small_poly(), q in small_poly()) {
        prop_assert_eq!(to_naive(&(&p * &q)), naive_mul(&to_naive(&p), &to_naive(&q)));
        prop_assert_eq!(to_naive(&(&p + &q)), naive_add(&to_naive(&p), &to_naive(&q)));
        prop_assert_eq!(to_naive(&p.diff(Var::U).unwrap()), naive_diff(&to_naive(&p), 1, 1));
    }

    #[test]
    fn product_rule(p in small_poly(), q in small_poly()) {
        for v in [Var::T, Var::U] {
            let lhs = (&p * &q).diff(v).unwrap();
            let rhs = &(&p.diff(v).unwrap() * &q) + &(&p * &q.diff(v).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn eval_is_a_homomorphism(p in small_poly(), q in small_poly(), a in small_rational(), b in small_rational(), w in small_rational()) {
        let bind = ParamBinding::all(a.clone(), b.clone(), w.clone());
        prop_assert_eq!((&p * &q).eval_params(&bind), &p.eval_params(&bind) * &q.eval_params(&bind));
        prop_assert_eq!((&p + &q).eval_params(&bind), &p.eval_params(&bind) + &q.eval_params(&bind));
        let pt = [Rational::new(2, 3), Rational::new(-5, 7), a, b, w];
        prop_assert_eq!(p.eval(&pt).to_big(), naive_eval(&to_naive(&p), &big_point(&pt)));
    }

    #[test]
    fn compose_is_associative(a in small_op(), b in small_op(), c in small_op()) {
        let l = a.compose(&b).unwrap().compose(&c).unwrap();
        let r = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn jacobi_and_antisymmetry(a in small_op(), b in small_op(), c in small_op()) {
        let ab = a.commutator(&b).unwrap();
        prop_assert_eq!(ab.clone(), b.commutator(&a).unwrap().neg());
        let j = ab.commutator(&c).unwrap()
            .add(&b.commutator(&c).unwrap().commutator(&a).unwrap())
            .add(&c.commutator(&a).unwrap().commutator(&b).unwrap());
        prop_assert!(j.is_zero());
    }

    #[test]
    fn compose_agrees_with_reference_apply(a in small_op(), b in small_op(), f in small_poly()) {
        let ab = a.compose(&b).unwrap();
        let expected = naive_apply(&a, &naive_apply(&b, &to_naive(&f)));
        prop_assert_eq!(to_naive(&ab.apply(&f).unwrap()), expected.clone());
        prop_assert_eq!(to_naive(&a.apply(&b.apply(&f).unwrap()).unwrap()), expected);
    }

    #[test]
    fn order_bound(a in small_op(), b in small_op()) {
        let ab = a.compose(&b).unwrap();
        if let (Some(x), Some(y)) = (a.order().finite(), b.order().finite()) {
            prop_assert!(ab.order().finite().is_none_or(|o| o <= x + y));
        }
    }

    #[test]
    fn print_parse_round_trip(a in small_op()) {
        let s = print_operator(&a);
        prop_assert_eq!(parse_operator(&s).unwrap(), a);
    }

    #[test]
    fn json_round_trip(a in small_op()) {
        prop_assert_eq!(DiffOp::from_json_str(&a.to_json_string()).unwrap(), a);
    }
}
