//! Verification suites over the catalog: commutation, closures, syzygies,
//! spectra, hidden-algebra structure and the conjectured general-`k` forms.

use std::fmt;
use std::str::FromStr;

use crate::catalog::{self, ClosureKind, Source};
use crate::genpoly::GenPolynomial;
use crate::hidden_algebra::Algebra;
use crate::polyring::ParamBinding;
use crate::rational::Rational;
use crate::reduction::{
    expand, reduce_deepening, reduce_to_generators, Caps, ReduceError, ReduceOptions, Strategy,
};
use crate::report::VerificationReport;
use crate::repspace::{self, RepError};
use crate::weyl::DiffOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Commutators,
    Closures,
    Syzygies,
    Spectrum,
    Hidden,
    Conjecture,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Commutators,
        Suite::Closures,
        Suite::Syzygies,
        Suite::Spectrum,
        Suite::Hidden,
        Suite::Conjecture,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Commutators => "commutators",
            Suite::Closures => "closures",
            Suite::Syzygies => "syzygies",
            Suite::Spectrum => "spectrum",
            Suite::Hidden => "hidden",
            Suite::Conjecture => "conjecture",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}"))
    }
}

/// `heavy` enables the long-running `k = 4` reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyOptions {
    pub heavy: bool,
}

/// Upper bound on the parameter degree explored when reproducing closures.
pub const PARAM_CEILING: u32 = 24;

pub fn run(k: u32, suite: Suite, opts: VerifyOptions) -> VerificationReport {
    let mut rep = VerificationReport::new(format!("k={k} {suite}"));
    if let Err(e) = catalog::generators(k) {
        rep.fail("catalog", e.to_string());
        return rep;
    }
    let suites: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    for s in suites {
        let sub = match s {
            Suite::Commutators => commutators(k),
            Suite::Closures => closures(k, opts),
            Suite::Syzygies => syzygies(k, opts),
            Suite::Spectrum => spectrum(k),
            Suite::Hidden => hidden(k),
            Suite::Conjecture => conjecture(k),
            Suite::All => unreachable!(),
        };
        rep.extend(sub);
    }
    rep
}

fn short(s: String) -> String {
    const MAX: usize = 600;
    if s.len() <= MAX {
        s
    } else {
        let mut end = MAX;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}... ({} chars)", &s[..end], s.len())
    }
}

fn gens(k: u32) -> Result<[DiffOp; 4], String> {
    catalog::generators(k).map_err(|e| e.to_string())
}

fn omega_zero(g: &[DiffOp; 4]) -> [DiffOp; 4] {
    g.clone()
        .map(|x| x.eval_params(&ParamBinding::omega_zero()))
}

/// Zero commutators with `H`, and the transcribed `I12` against `[I1, I2]`.
pub fn commutators(k: u32) -> VerificationReport {
    let mut rep = VerificationReport::new("commutators");
    let g = match gens(k) {
        Ok(g) => g,
        Err(e) => {
            rep.fail("generators", e);
            return rep;
        }
    };
    for (name, idx) in [("[H,I1]", 1), ("[H,I2]", 2), ("[H,I12]", 3)] {
        rep.run(name, || match g[0].commutator(&g[idx]) {
            Ok(c) if c.is_zero() => Ok("0".into()),
            Ok(c) => Err(format!("{} nonzero terms", c.size())),
            Err(e) => Err(e.to_string()),
        });
    }
    rep.run("[I1,I2] = printed I12", || {
        let printed =
            catalog::commutator_integral(k, Source::Fixture).map_err(|e| e.to_string())?;
        let diff = g[3].sub(&printed);
        if diff.is_zero() {
            Ok(format!("{} terms", printed.size()))
        } else {
            Err(short(format!(
                "computed - printed = {}",
                crate::expr::print_operator(&diff)
            )))
        }
    });
    rep
}

fn compare(computed: &GenPolynomial, printed: &GenPolynomial) -> Result<String, String> {
    let d = computed.sub(printed);
    if d.is_zero() {
        Ok(format!("{} terms", computed.len()))
    } else {
        Err(short(format!("computed - printed = {d}")))
    }
}

/// Reproduces `[I1, I12]` and `[I2, I12]` at total degree `k+1`, checks the
/// printed forms by re-expansion, and proves that degree `k` is too small.
pub fn closures(k: u32, opts: VerifyOptions) -> VerificationReport {
    let mut rep = VerificationReport::new("closures");
    let g = match gens(k) {
        Ok(g) => g,
        Err(e) => {
            rep.fail("generators", e);
            return rep;
        }
    };
    for (kind, idx) in [(ClosureKind::DoubleI1, 1), (ClosureKind::DoubleI2, 2)] {
        let label = if idx == 1 { "[I1,I12]" } else { "[I2,I12]" };
        if k == 4 && !opts.heavy {
            for what in ["printed expands", "reproduce", "degree k fails"] {
                rep.skip(format!("{label} {what}"), "requires --heavy");
            }
            continue;
        }
        let target = match g[idx].commutator(&g[3]) {
            Ok(t) => t,
            Err(e) => {
                rep.fail(label, e.to_string());
                continue;
            }
        };
        let printed = catalog::expected_closure(k, kind);
        rep.run(format!("{label} printed expands"), || {
            let p = printed.as_ref().map_err(|e| e.to_string())?;
            let e = expand(&g, p).map_err(|e| e.to_string())?;
            let diff = e.sub(&target);
            if diff.is_zero() {
                Ok(format!("{} terms", p.len()))
            } else {
                Err(format!("residual has {} terms", diff.size()))
            }
        });
        rep.run(format!("{label} reproduce"), || {
            let r = reduce_deepening(
                &target,
                &g,
                Caps::default(),
                k + 1,
                2,
                PARAM_CEILING,
                Strategy::Auto,
            )
            .map_err(|e| e.to_string())?;
            let p = printed.as_ref().map_err(|e| e.to_string())?;
            compare(&r.poly, p).map(|d| format!("{d}, kernel {:?}", r.stats.kernel_dim))
        });
        rep.run(format!("{label} degree k fails"), || {
            degree_fails(&target, &g, k)
        });
    }
    rep
}

fn degree_fails(target: &DiffOp, g: &[DiffOp; 4], k: u32) -> Result<String, String> {
    match reduce_to_generators(target, g, &ReduceOptions::new(k, PARAM_CEILING)) {
        Err(ReduceError::NoSolution {
            proven_any_degree: true,
            ..
        }) => Ok(format!("no solution at total degree {k}")),
        Err(ReduceError::NoSolution { bounds, .. }) => Err(format!(
            "no solution within {bounds}, not proven for all parameter degrees"
        )),
        Err(e) => Err(e.to_string()),
        Ok(r) => Err(short(format!(
            "unexpected solution at total degree {k}: {}",
            r.poly
        ))),
    }
}

/// `I12² = R` for general `w` (printed for `k ≤ 3`, found and verified for
/// `k = 4`) and at `w = 0`.
pub fn syzygies(k: u32, opts: VerifyOptions) -> VerificationReport {
    let mut rep = VerificationReport::new("syzygies");
    let g = match gens(k) {
        Ok(g) => g,
        Err(e) => {
            rep.fail("generators", e);
            return rep;
        }
    };
    let degree = (2 * k).max(3);
    for (kind, gs) in [
        (ClosureKind::Syzygy, g.clone()),
        (ClosureKind::SyzygyOmega0, omega_zero(&g)),
    ] {
        let label = kind.name();
        if k == 4 && kind == ClosureKind::Syzygy && !opts.heavy {
            rep.skip(format!("{label} reproduce"), "requires --heavy");
            continue;
        }
        let target = match gs[3].compose(&gs[3]) {
            Ok(t) => t,
            Err(e) => {
                rep.fail(label, e.to_string());
                continue;
            }
        };
        let printed = catalog::expected_closure(k, kind).ok();
        if let Some(p) = &printed {
            rep.run(format!("{label} printed expands"), || {
                let e = expand(&gs, p).map_err(|e| e.to_string())?;
                let diff = e.sub(&target);
                if diff.is_zero() {
                    Ok(format!("{} terms", p.len()))
                } else {
                    Err(format!("residual has {} terms", diff.size()))
                }
            });
        }
        rep.run(format!("{label} reproduce"), || {
            let r = reduce_deepening(
                &target,
                &gs,
                Caps::default(),
                degree,
                2,
                PARAM_CEILING,
                Strategy::Auto,
            )
            .map_err(|e| e.to_string())?;
            match &printed {
                Some(p) => compare(&r.poly, p),
                None => {
                    let d = r.poly.degree().unwrap_or(0);
                    if d <= 2 * k {
                        Ok(format!(
                            "verified relation with {} terms, degree {d}",
                            r.poly.len()
                        ))
                    } else {
                        Err(format!("relation degree {d} exceeds {}", 2 * k))
                    }
                }
            }
        });
    }
    rep
}

/// `h_k` on `P_N^(k)`, `N ≤ 8`: triangular with diagonal `4w(p + kq)`; flag
/// invariance for `s ∈ {k−1, k}`, `N ≤ 6`; and failure at `s = k−2`.
pub fn spectrum(k: u32) -> VerificationReport {
    let mut rep = VerificationReport::new("spectrum");
    let (h, data) = match (catalog::hamiltonian(k), catalog::spectral_data(k)) {
        (Ok(h), Ok(d)) => (h, d),
        (Err(e), _) | (_, Err(e)) => {
            rep.fail("catalog", e.to_string());
            return rep;
        }
    };
    rep.run("triangular spectrum s=k, N<=8", || {
        for n in 0..=8 {
            let sp = repspace::spectrum(&h, n, k).map_err(|e| format!("N={n}: {e}"))?;
            for ((p, q), v) in sp {
                if v != data.eps(p, q) {
                    return Err(format!("N={n}: eigenvalue at (p,q)=({p},{q}) is {v}"));
                }
            }
        }
        Ok(format!(
            "dim P_8 = {}",
            repspace::basis(8, k).map(|b| b.len()).unwrap_or(0)
        ))
    });
    for s in [k.saturating_sub(1), k] {
        if s == 0 {
            continue;
        }
        let flag = repspace::flag_check(&h, s, 6);
        rep.check(
            format!("flag s={s}, N<=6"),
            flag.passed(),
            flag.failures()
                .map(|c| format!("{}: {}", c.id, c.detail))
                .next()
                .unwrap_or_default(),
        );
    }
    if k >= 3 {
        let s = k - 2;
        rep.run(format!("not invariant s={s}"), || {
            for n in 0..=6 {
                match repspace::matrix_of(&h, n, s) {
                    Err(RepError::NotInvariant {
                        n, p, q, ip, iq, ..
                    }) => {
                        return Ok(format!("N={n}: t^{p} u^{q} -> t^{ip} u^{iq}"));
                    }
                    Err(e) => return Err(e.to_string()),
                    Ok(_) => {}
                }
            }
            Err("every P_N with N <= 6 is invariant".into())
        });
    }
    rep
}

/// Structure of `g^(s)` for `s ∈ {k−1, k}` at three values of `N`, and
/// expressibility of `x_k` and `h_k` by products of at most two generators.
pub fn hidden(k: u32) -> VerificationReport {
    let mut rep = VerificationReport::new("hidden");
    let ns = [
        Rational::from_int(0),
        Rational::from_int(3),
        Rational::new(7, 2),
    ];
    for s in [k.saturating_sub(1), k] {
        if s == 0 {
            continue;
        }
        for n in &ns {
            let alg = Algebra::new(s, n.clone()).expect("s > 0");
            let mut sub = alg.verify_structure();
            sub.suite = format!("s={s} N={n}");
            rep.extend(sub);
        }
    }
    let (h, x) = match (catalog::hamiltonian(k), catalog::first_integral(k)) {
        (Ok(h), Ok(x)) => (h, x),
        (Err(e), _) | (_, Err(e)) => {
            rep.fail("catalog", e.to_string());
            return rep;
        }
    };
    let mut targets = vec![("x_k", &x, k), ("h_k", &h, k)];
    if k >= 2 {
        targets.push(("h_k", &h, k - 1));
    }
    for (name, op, s) in targets {
        rep.run(format!("{name} in g^({s})"), || {
            let alg = Algebra::new(s, Rational::ZERO).map_err(|e| e.to_string())?;
            alg.express(op, 2)
                .map(|c| format!("{} products", c.terms.len()))
                .map_err(|e| e.to_string())
        });
    }
    rep
}

/// The `w⁰` parts of `[I2, I12]` and of the syzygy against the conjectured
/// general-`k` forms, computed at `w = 0` and, where printed, read off the
/// printed relations.
pub fn conjecture(k: u32) -> VerificationReport {
    let mut rep = VerificationReport::new("conjecture");
    let (g, (q, r)) = match (
        gens(k),
        catalog::conjecture_forms(k).map_err(|e| e.to_string()),
    ) {
        (Ok(g), Ok(f)) => (g, f),
        (Err(e), _) | (_, Err(e)) => {
            rep.fail("catalog", e);
            return rep;
        }
    };
    let g0 = omega_zero(&g);
    let w0 = ParamBinding::omega_zero();
    rep.run("[I2,I12] at w=0", || {
        let target = g0[2].commutator(&g0[3]).map_err(|e| e.to_string())?;
        let red = reduce_deepening(
            &target,
            &g0,
            Caps::default(),
            k + 1,
            2,
            PARAM_CEILING,
            Strategy::Auto,
        )
        .map_err(|e| e.to_string())?;
        compare(&red.poly, &q)
    });
    if let Ok(p) = catalog::expected_closure(k, ClosureKind::DoubleI2) {
        rep.run("printed [I2,I12] at w=0", || {
            compare(&p.eval_params(&w0), &q)
        });
    }
    rep.run("syzygy at w=0", || {
        let target = g0[3].compose(&g0[3]).map_err(|e| e.to_string())?;
        let red = reduce_deepening(
            &target,
            &g0,
            Caps::default(),
            (2 * k).max(3),
            2,
            PARAM_CEILING,
            Strategy::Auto,
        )
        .map_err(|e| e.to_string())?;
        compare(&red.poly, &r)
    });
    if let Ok(p) = catalog::expected_closure(k, ClosureKind::SyzygyOmega0) {
        rep.run("printed syzygy at w=0", || compare(&p.eval_params(&w0), &r));
    }
    rep
}
