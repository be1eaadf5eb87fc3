//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every comparison is exact (tolerance 0): operators, polynomials and
//! relation coefficients are compared as exact rational objects. The long
//! `k = 4` reductions run only with `TTW_HEAVY=1` and are reported as SKIP
//! otherwise.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{naive_apply, random_op, to_naive};
use ttw_core::catalog::{self, ClosureKind, Source};
use ttw_core::expr::{parse_operator, print_operator};
use ttw_core::genpoly::{GenMonomial, GenPolynomial};
use ttw_core::hidden_algebra::{Algebra, GeneratorId};
use ttw_core::polyring::{mono, Monomial};
use ttw_core::reduction::{self, expand, Caps, ReduceError, ReduceOptions, Strategy};
use ttw_core::repspace::{self, RepError};
use ttw_core::{DiffOp, ParamBinding, ParamPoly, Rational, Var};

const PARAM_CEILING: u32 = 24;
const ORACLE_SEED: u64 = 0x7477_2024;
const RANDOM_PAIRS: usize = 200;
const RANDOM_TRIPLES: usize = 200;
const ROUND_TRIPS: usize = 1000;
const MONOMIAL_DEGREE: u32 = 12;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Pass,
    Fail,
    Skip,
}

impl Outcome {
    fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        }
    }
}

struct Criterion {
    items: Vec<(Outcome, String)>,
}

impl Criterion {
    fn new() -> Self {
        Criterion { items: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.items
            .push((if ok { Outcome::Pass } else { Outcome::Fail }, what.into()));
    }

    fn result(&mut self, what: &str, r: Result<String, String>) {
        match r {
            Ok(d) => self.items.push((Outcome::Pass, format!("{what}: {d}"))),
            Err(d) => self.items.push((Outcome::Fail, format!("{what}: {d}"))),
        }
    }

    fn skip(&mut self, what: impl Into<String>) {
        self.items
            .push((Outcome::Skip, format!("{} (set TTW_HEAVY=1)", what.into())));
    }

    fn outcome(&self) -> Outcome {
        if self.items.iter().any(|(o, _)| *o == Outcome::Fail) {
            Outcome::Fail
        } else if self.items.iter().all(|(o, _)| *o == Outcome::Skip) {
            Outcome::Skip
        } else {
            Outcome::Pass
        }
    }
}

fn heavy() -> bool {
    std::env::var("TTW_HEAVY").is_ok_and(|v| v == "1")
}

fn gens(k: u32) -> [DiffOp; 4] {
    catalog::generators(k).expect("catalog generators")
}

fn at_omega_zero(g: &[DiffOp; 4]) -> [DiffOp; 4] {
    g.clone()
        .map(|x| x.eval_params(&ParamBinding::omega_zero()))
}

fn clip(s: String) -> String {
    if s.len() <= 300 {
        s
    } else {
        let mut end = 300;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}... ({} chars)", &s[..end], s.len())
    }
}

fn same(computed: &GenPolynomial, printed: &GenPolynomial) -> Result<String, String> {
    let d = computed.sub(printed);
    if d.is_zero() {
        Ok(format!("{} terms, exact", computed.len()))
    } else {
        Err(clip(format!("{} differing coefficients: {d}", d.len())))
    }
}

fn reduce(target: &DiffOp, g: &[DiffOp; 4], total_degree: u32) -> Result<GenPolynomial, String> {
    reduction::reduce_deepening(
        target,
        g,
        Caps::default(),
        total_degree,
        2,
        PARAM_CEILING,
        Strategy::Auto,
    )
    .map(|r| r.poly)
    .map_err(|e| e.to_string())
}

fn printed_expands(
    g: &[DiffOp; 4],
    target: &DiffOp,
    printed: &GenPolynomial,
) -> Result<String, String> {
    let e = expand(g, printed).map_err(|e| e.to_string())?;
    let d = e.sub(target);
    if d.is_zero() {
        Ok(format!("{} printed terms expand exactly", printed.len()))
    } else {
        Err(format!(
            "residual operator has {} derivative terms",
            d.size()
        ))
    }
}

/// Closure reductions shared by criteria 3 and 4, keyed by `(k, 1 | 2)`.
type ClosureCache = BTreeMap<(u32, usize), Result<GenPolynomial, String>>;

fn closure_reduction(
    cache: &mut ClosureCache,
    k: u32,
    idx: usize,
) -> Result<GenPolynomial, String> {
    cache
        .entry((k, idx))
        .or_insert_with(|| {
            let g = gens(k);
            let target = g[idx].commutator(&g[3]).map_err(|e| e.to_string())?;
            reduce(&target, &g, k + 1)
        })
        .clone()
}

fn ks(heavy_k4: bool) -> Vec<u32> {
    if heavy_k4 {
        vec![1, 2, 3, 4]
    } else {
        vec![1, 2, 3]
    }
}

fn criterion_1() -> Criterion {
    let mut c = Criterion::new();
    for k in 1..=4 {
        let g = gens(k);
        for (name, idx) in [("I1", 1), ("I2", 2), ("I12", 3)] {
            let z = g[0]
                .commutator(&g[idx])
                .map(|x| x.is_zero())
                .unwrap_or(false);
            c.check(z, format!("k={k} [h_k,{name}] = 0"));
        }
    }
    c
}

fn criterion_2() -> Criterion {
    let mut c = Criterion::new();
    for k in 1..=4 {
        let computed = catalog::commutator_integral(k, Source::Computed).expect("computed I12");
        let printed = catalog::commutator_integral(k, Source::Fixture).expect("printed I12");
        let d = computed.sub(&printed);
        if d.is_zero() {
            c.check(
                true,
                format!(
                    "k={k} [I1,I2] equals the printed I12 ({} derivative terms)",
                    computed.size()
                ),
            );
        } else {
            let keys: Vec<String> = d
                .terms()
                .keys()
                .map(|(i, j)| format!("Dt^{i}Du^{j}"))
                .collect();
            c.check(
                false,
                format!(
                    "k={k} [I1,I2] - printed I12 is nonzero on {}",
                    keys.join(", ")
                ),
            );
        }
    }
    c
}

fn criterion_3(cache: &mut ClosureCache) -> Criterion {
    let mut c = Criterion::new();
    for k in ks(heavy()) {
        for (kind, idx) in [(ClosureKind::DoubleI1, 1), (ClosureKind::DoubleI2, 2)] {
            let printed = catalog::expected_closure(k, kind).expect("printed closure");
            let r = closure_reduction(cache, k, idx).and_then(|p| same(&p, &printed));
            c.result(&format!("k={k} {kind} reproduced"), r);
        }
    }
    if !heavy() {
        c.skip("k=4 doubleI1, doubleI2 reproduction");
    }
    let p1 = catalog::expected_closure(4, ClosureKind::DoubleI1).expect("k=4 doubleI1");
    let p2 = catalog::expected_closure(4, ClosureKind::DoubleI2).expect("k=4 doubleI2");
    let w2 = ParamPoly::term(mono(&[(Var::W, 2)]), Rational::ONE);
    c.check(
        p1.coeff(GenMonomial::new(2, 2, 0, 0)) == w2.scale(&Rational::from_int(1024)),
        "C^(I)_{2,2,0,0} = 1024 w^2",
    );
    c.check(
        p2.coeff(GenMonomial::new(2, 1, 1, 0)) == w2.scale(&Rational::from_int(-2048)),
        "C^(II)_{2,1,1,0} = -2048 w^2",
    );
    if heavy() {
        for (kind, idx, p) in [
            (ClosureKind::DoubleI1, 1, &p1),
            (ClosureKind::DoubleI2, 2, &p2),
        ] {
            if let Ok(found) = closure_reduction(cache, 4, idx) {
                let spot = if idx == 1 {
                    GenMonomial::new(2, 2, 0, 0)
                } else {
                    GenMonomial::new(2, 1, 1, 0)
                };
                c.check(
                    found.coeff(spot) == p.coeff(spot),
                    format!("k=4 {kind} computed spot anchor"),
                );
            }
        }
    }
    c
}

fn criterion_4(cache: &mut ClosureCache) -> Criterion {
    let mut c = Criterion::new();
    for k in ks(heavy()) {
        let g = gens(k);
        for idx in [1, 2] {
            let label = if idx == 1 { "[I1,I12]" } else { "[I2,I12]" };
            let target = g[idx].commutator(&g[3]).expect("commutator");
            let at_k = match reduction::reduce_to_generators(
                &target,
                &g,
                &ReduceOptions::new(k, PARAM_CEILING),
            ) {
                Err(ReduceError::NoSolution {
                    proven_any_degree: true,
                    ..
                }) => Ok("NoSolution for every parameter degree".to_string()),
                Err(ReduceError::NoSolution { .. }) => Err(format!(
                    "NoSolution only up to parameter degree {PARAM_CEILING}"
                )),
                Err(e) => Err(e.to_string()),
                Ok(r) => Err(clip(format!("unexpected relation {}", r.poly))),
            };
            c.result(&format!("k={k} {label} at total degree {k}"), at_k);
            let at_k1 = closure_reduction(cache, k, idx).map(|p| format!("{} terms", p.len()));
            c.result(&format!("k={k} {label} at total degree {}", k + 1), at_k1);
        }
    }
    if !heavy() {
        c.skip("k=4 minimal degree");
    }
    c
}

fn criterion_5() -> Criterion {
    let mut c = Criterion::new();
    for k in 1..=3 {
        let g = gens(k);
        let target = g[3].compose(&g[3]).expect("I12^2");
        let printed = catalog::expected_closure(k, ClosureKind::Syzygy).expect("printed syzygy");
        c.result(
            &format!("k={k} I12^2 - R = 0"),
            printed_expands(&g, &target, &printed),
        );
        if k == 3 {
            // the printed k = 3 relation does not expand; report the verified one next to it
            let found = reduce(&target, &g, 6).map(|p| match same(&p, &printed) {
                Ok(_) => "matches the printed relation".to_string(),
                Err(_) => format!(
                    "{} terms, differs from the printed relation in {} coefficients",
                    p.len(),
                    p.sub(&printed).len()
                ),
            });
            c.result("k=3 reduction finds a verified relation", found);
        }
    }
    for k in [3, 4] {
        let g0 = at_omega_zero(&gens(k));
        let target = g0[3].compose(&g0[3]).expect("I12^2");
        let printed =
            catalog::expected_closure(k, ClosureKind::SyzygyOmega0).expect("printed w=0 syzygy");
        c.result(
            &format!("k={k} w=0 I12^2 - R = 0"),
            printed_expands(&g0, &target, &printed),
        );
    }
    if heavy() {
        let g = gens(4);
        let target = g[3].compose(&g[3]).expect("I12^2");
        let r = reduce(&target, &g, 8).and_then(|p| {
            printed_expands(&g, &target, &p)?;
            let d = p.degree().unwrap_or(0);
            if d <= 8 && p.terms().keys().all(|m| m.q <= 1) {
                let pd = p.terms().values().filter_map(|c| c.param_degree()).max().unwrap_or(0);
                Ok(format!(
                    "verified relation, {} terms, degree {d}, I12 linear, coefficient degree {pd} in a, b, w",
                    p.len()
                ))
            } else {
                Err(format!("degree {d} exceeds 8 or I12 not linear"))
            }
        });
        c.result("k=4 general w: find_syzygy at total degree <= 8", r);
    } else {
        c.skip("k=4 general w syzygy");
    }
    c
}

fn criterion_6() -> Criterion {
    let mut c = Criterion::new();
    let w = mono(&[(Var::W, 1)]);
    for k in 1..=4 {
        let h = catalog::hamiltonian(k).expect("h_k");
        let mut ok = true;
        let mut detail = String::new();
        for n in 0..=8 {
            let sp = match repspace::spectrum(&h, n, k) {
                Ok(sp) => sp,
                Err(e) => {
                    ok = false;
                    detail = format!("N={n}: {e}");
                    break;
                }
            };
            let mut got: Vec<Rational> = Vec::new();
            for (_, v) in &sp {
                let cw = v.coeff(w);
                if *v != ParamPoly::term(w, cw.clone()) && !v.is_zero() {
                    ok = false;
                    detail = format!("N={n}: eigenvalue {v} is not a multiple of w");
                }
                got.push(cw);
            }
            let mut want: Vec<Rational> = Vec::new();
            for q in 0..=n / k {
                for p in 0..=n - k * q {
                    want.push(Rational::from_int(4 * (p + k * q) as i64));
                }
            }
            got.sort();
            want.sort();
            if got != want {
                ok = false;
                detail = format!("N={n}: diagonal multiset differs");
            }
        }
        c.check(
            ok,
            format!("k={k} s=k N<=8 triangular with eigenvalues 4w(p+kq) {detail}"),
        );
    }
    c
}

fn criterion_7() -> Criterion {
    let mut c = Criterion::new();
    for k in 1..=4 {
        let h = catalog::hamiltonian(k).expect("h_k");
        for s in [k - 1, k].into_iter().filter(|s| *s > 0) {
            let ok = (0..=6).all(|n| repspace::matrix_of(&h, n, s).is_ok());
            c.check(ok, format!("k={k} s={s} P_N invariant for N<=6"));
        }
        if k >= 3 {
            let s = k - 2;
            let fired = (0..=6).find_map(|n| match repspace::matrix_of(&h, n, s) {
                Err(RepError::NotInvariant { p, q, ip, iq, .. }) => {
                    Some(format!("N={n}: t^{p}u^{q} -> t^{ip}u^{iq}"))
                }
                _ => None,
            });
            c.check(
                fired.is_some(),
                format!("k={k} s={s} NotInvariant {}", fired.unwrap_or_default()),
            );
        }
    }
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::new();
    for s in 1..=6u32 {
        for n in [Rational::ZERO, Rational::new(5, 2)] {
            let a = Algebra::new(s, n.clone()).expect("algebra");
            let t: Vec<DiffOp> = (0..=s)
                .map(|i| a.build(GeneratorId::T(i)).expect("T_i"))
                .collect();
            let r: Vec<DiffOp> = (0..=s)
                .map(|i| a.build(GeneratorId::R(i)).expect("R_i"))
                .collect();
            let nil = (s + 1..=s + 2).all(|i| a.t_closed(i).map(|x| x.is_zero()).unwrap_or(false));
            let tc = t.iter().all(|x| {
                t.iter()
                    .all(|y| x.commutator(y).map(|z| z.is_zero()).unwrap_or(false))
            });
            let rc = r.iter().all(|x| {
                r.iter()
                    .all(|y| x.commutator(y).map(|z| z.is_zero()).unwrap_or(false))
            });
            let tower = a.t_tower_by_commutators().is_ok();
            c.check(
                nil && tc && rc && tower,
                format!("s={s} N={n}: nilpotent {nil}, [T,T]=0 {tc}, [R,R]=0 {rc}, tower {tower}"),
            );
        }
    }
    for k in 2..=4u32 {
        let x = catalog::first_integral(k).expect("x_k");
        let h = catalog::hamiltonian(k).expect("h_k");
        for (name, op, s) in [("x_k", &x, k), ("h_k", &h, k), ("h_k", &h, k - 1)] {
            let r = Algebra::new(s, Rational::ZERO)
                .map_err(|e| e.to_string())
                .and_then(|a| a.express(op, 2).map_err(|e| e.to_string()))
                .map(|g| format!("{} ordered products", g.terms.len()));
            c.result(&format!("k={k} {name} in g^({s}) at degree 2"), r);
        }
    }
    c
}

fn criterion_9() -> Criterion {
    let mut c = Criterion::new();
    let w0 = ParamBinding::omega_zero();
    for k in 1..=4 {
        let (q, r) = catalog::conjecture_forms(k).expect("conjecture forms");
        let g0 = at_omega_zero(&gens(k));
        let t = g0[2].commutator(&g0[3]).expect("commutator");
        c.result(
            &format!("k={k} [I2,I12] at w=0 = 8k^2((-1)^k H^k I2 - I2^2)"),
            reduce(&t, &g0, k + 1).and_then(|p| same(&p, &q)),
        );
        let t = g0[3].compose(&g0[3]).expect("I12^2");
        c.result(
            &format!("k={k} syzygy at w=0 = R_k"),
            reduce(&t, &g0, (2 * k).max(3)).and_then(|p| same(&p, &r)),
        );
        if let Ok(p) = catalog::expected_closure(k, ClosureKind::DoubleI2) {
            c.result(
                &format!("k={k} printed [I2,I12] at w=0"),
                same(&p.eval_params(&w0), &q),
            );
        }
    }
    c
}

fn monomial(p: u32, q: u32) -> ParamPoly {
    ParamPoly::term(Monomial::new(p, q, 0, 0, 0).expect("small"), Rational::ONE)
}

fn criterion_10() -> Criterion {
    let mut c = Criterion::new();
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let monomials: Vec<(u32, u32)> = (0..=MONOMIAL_DEGREE)
        .flat_map(|d| (0..=d).map(move |p| (p, d - p)))
        .collect();

    let mut bad = 0;
    for _ in 0..RANDOM_PAIRS {
        let a = random_op(&mut rng, 4, 3);
        let b = random_op(&mut rng, 4, 3);
        let ab = a.compose(&b).expect("compose");
        for &(p, q) in &monomials {
            let m = monomial(p, q);
            let lhs = to_naive(&ab.apply(&m).expect("apply"));
            if lhs != naive_apply(&a, &naive_apply(&b, &to_naive(&m))) {
                bad += 1;
            }
        }
    }
    c.check(
        bad == 0,
        format!(
            "apply/compose on {} monomials x {RANDOM_PAIRS} pairs: {bad} failures",
            monomials.len()
        ),
    );

    let (mut assoc_bad, mut jacobi_bad) = (0, 0);
    for _ in 0..RANDOM_TRIPLES {
        let a = random_op(&mut rng, 3, 3);
        let b = random_op(&mut rng, 3, 3);
        let d = random_op(&mut rng, 3, 3);
        let l = a.compose(&b).and_then(|x| x.compose(&d)).expect("compose");
        let r = b.compose(&d).and_then(|x| a.compose(&x)).expect("compose");
        if l != r {
            assoc_bad += 1;
        }
        let br = |x: &DiffOp, y: &DiffOp| x.commutator(y).expect("commutator");
        let j = br(&br(&a, &b), &d)
            .add(&br(&br(&b, &d), &a))
            .add(&br(&br(&d, &a), &b));
        if !j.is_zero() {
            jacobi_bad += 1;
        }
    }
    c.check(
        assoc_bad == 0,
        format!("associativity on {RANDOM_TRIPLES} triples: {assoc_bad} failures"),
    );
    c.check(
        jacobi_bad == 0,
        format!("Jacobi on {RANDOM_TRIPLES} triples: {jacobi_bad} failures"),
    );

    let mut rt_bad = 0;
    for _ in 0..ROUND_TRIPS {
        let a = random_op(&mut rng, 5, 4);
        if parse_operator(&print_operator(&a)).ok() != Some(a) {
            rt_bad += 1;
        }
    }
    c.check(
        rt_bad == 0,
        format!("parser round-trip on {ROUND_TRIPS} operators: {rt_bad} failures"),
    );
    c
}

fn main() {
    // accept and ignore libtest arguments such as --nocapture or filters
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    println!(
        "acceptance (tolerance: exact equality; heavy k=4 items: {})",
        if heavy() { "on" } else { "off" }
    );
    let mut cache = ClosureCache::new();
    let mut failed = 0;
    let table: Vec<(u32, &str)> = vec![
        (1, "commutation [h_k, I] = 0"),
        (2, "I12 reconstruction against the printed operators"),
        (3, "polynomial-algebra closures"),
        (4, "minimal degree k+1"),
        (5, "syzygies"),
        (6, "triangular spectrum"),
        (7, "flag invariance and boundary"),
        (8, "hidden algebra"),
        (9, "conjecture cross-checks at w=0"),
        (10, "kernel oracles"),
    ];
    for (n, title) in table {
        if filter.is_some_and(|f| f != n) {
            continue;
        }
        let start = Instant::now();
        let crit = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(&mut cache),
            4 => criterion_4(&mut cache),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(),
            _ => criterion_10(),
        };
        let outcome = crit.outcome();
        if outcome == Outcome::Fail {
            failed += 1;
        }
        println!(
            "{} criterion {n}: {title} ({:.1}s)",
            outcome.label(),
            start.elapsed().as_secs_f64()
        );
        for (o, what) in &crit.items {
            println!("    {} {what}", o.label());
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
