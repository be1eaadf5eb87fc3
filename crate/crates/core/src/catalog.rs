//! Concrete operators of the TTW system in the invariant coordinates `(t, u)`
//! and the expected right-hand sides of their polynomial-algebra relations.
//!
//! `H` and `I1` have closed forms for every `k`. `I2` and `I12` exist only as
//! transcribed tables (fixtures) for `k = 1..4`. Fixtures are compiled in;
//! setting `TTW_FIXTURES` to a directory reads them from disk instead.

use std::path::PathBuf;

use crate::genpoly::{GenMonomial, GenPolyError, GenPolynomial};
use crate::polyring::{mono, ParamPoly, Var};
use crate::rational::Rational;
use crate::weyl::{DiffOp, WeylError};

pub const FIXTURE_ENV: &str = "TTW_FIXTURES";

macro_rules! embedded {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/", $path)))),*]
    };
}

static EMBEDDED: &[(&str, &str)] = embedded![
    "k1/H.json",
    "k1/I1.json",
    "k1/I2.json",
    "k1/I12.json",
    "k2/H.json",
    "k2/I1.json",
    "k2/I2.json",
    "k2/I12.json",
    "k3/H.json",
    "k3/I1.json",
    "k3/I2.json",
    "k3/I12.json",
    "k4/H.json",
    "k4/I1.json",
    "k4/I2.json",
    "k4/I12.json",
    "k1/closures/doubleI1.json",
    "k1/closures/doubleI2.json",
    "k1/closures/syzygy.json",
    "k1/closures/syzygy_omega0.json",
    "k2/closures/doubleI1.json",
    "k2/closures/doubleI2.json",
    "k2/closures/syzygy.json",
    "k2/closures/syzygy_omega0.json",
    "k3/closures/doubleI1.json",
    "k3/closures/doubleI2.json",
    "k3/closures/syzygy.json",
    "k3/closures/syzygy_omega0.json",
    "k4/closures/doubleI1.json",
    "k4/closures/doubleI2.json",
    "k4/closures/syzygy_omega0.json",
];

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("k must be a positive integer, got {0}")]
    BadIndex(u32),
    #[error("no catalog integral for k={0}")]
    NoIntegral(u32),
    #[error("the relation {which} at k={k} has no printed form")]
    NotPrinted { k: u32, which: ClosureKind },
    #[error("fixture {path}: {msg}")]
    Fixture { path: String, msg: String },
}

impl From<(String, WeylError)> for CatalogError {
    fn from((path, e): (String, WeylError)) -> Self {
        CatalogError::Fixture {
            path,
            msg: e.to_string(),
        }
    }
}

impl From<(String, GenPolyError)> for CatalogError {
    fn from((path, e): (String, GenPolyError)) -> Self {
        CatalogError::Fixture {
            path,
            msg: e.to_string(),
        }
    }
}

/// Reads a fixture by relative path, honouring `TTW_FIXTURES`.
pub fn fixture_text(rel: &str) -> Result<String, CatalogError> {
    if let Some(dir) = std::env::var_os(FIXTURE_ENV) {
        let path = PathBuf::from(dir).join(rel);
        return std::fs::read_to_string(&path).map_err(|e| CatalogError::Fixture {
            path: path.display().to_string(),
            msg: e.to_string(),
        });
    }
    EMBEDDED
        .iter()
        .find(|(p, _)| *p == rel)
        .map(|(_, s)| s.to_string())
        .ok_or_else(|| CatalogError::Fixture {
            path: rel.to_string(),
            msg: "not found".into(),
        })
}

fn load_op(rel: String) -> Result<DiffOp, CatalogError> {
    let text = fixture_text(&rel)?;
    DiffOp::from_json_str(&text).map_err(|e| (rel, e).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    H,
    I1,
    I2,
    I12,
}

impl Which {
    pub const ALL: [Which; 4] = [Which::H, Which::I1, Which::I2, Which::I12];

    pub fn name(self) -> &'static str {
        match self {
            Which::H => "H",
            Which::I1 => "I1",
            Which::I2 => "I2",
            Which::I12 => "I12",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Computed,
    Fixture,
}

fn p(src: &str) -> ParamPoly {
    crate::expr::parse_poly(src).expect("internal polynomial literal")
}

fn t_pow(e: u32) -> ParamPoly {
    ParamPoly::term(mono(&[(Var::T, e)]), Rational::ONE)
}

fn check_k(k: u32) -> Result<(), CatalogError> {
    if k == 0 {
        Err(CatalogError::BadIndex(k))
    } else {
        Ok(())
    }
}

/// `h_k = −4t∂t² − 8ku∂t∂u − 4k²t^{k−1}u∂u² + 4[wt − (a+b)k − 1]∂t + [4wku − 2k²(2b+1)t^{k−1}]∂u`.
pub fn hamiltonian(k: u32) -> Result<DiffOp, CatalogError> {
    check_k(k)?;
    let kk = Rational::from_int(k as i64);
    let k2 = &kk * &kk;
    let tk1 = t_pow(k - 1);
    let u = ParamPoly::var(Var::U);
    let terms = vec![
        ((2, 0), p("-4*t")),
        ((1, 1), u.scale(&Rational::from_int(-8 * k as i64))),
        ((0, 2), (&tk1 * &u).scale(&(&k2 * &Rational::from_int(-4)))),
        (
            (1, 0),
            p("w*t - 1")
                .sub(&p("a + b").scale(&kk))
                .scale(&Rational::from_int(4)),
        ),
        (
            (0, 1),
            (&u * &ParamPoly::var(Var::W))
                .scale(&(&kk * &Rational::from_int(4)))
                .sub(&(&tk1 * &p("2*b + 1")).scale(&(&k2 * &Rational::from_int(2)))),
        ),
    ];
    Ok(DiffOp::from_terms(terms))
}

/// `x_k = −4k²u(t^k − u)∂u² − 4k²[(b+½)t^k − (a+b+1)u]∂u`.
pub fn first_integral(k: u32) -> Result<DiffOp, CatalogError> {
    check_k(k)?;
    let k2 = Rational::from_int((k * k) as i64);
    let m4k2 = &k2 * &Rational::from_int(-4);
    let tk = t_pow(k);
    let u = ParamPoly::var(Var::U);
    let c2 = (&u * &tk.sub(&u)).scale(&m4k2);
    let c1 = (&p("b + 1/2") * &tk)
        .sub(&(&p("a + b + 1") * &u))
        .scale(&m4k2);
    Ok(DiffOp::from_terms(vec![((0, 2), c2), ((0, 1), c1)]))
}

fn catalog_k(k: u32) -> Result<(), CatalogError> {
    check_k(k)?;
    if k > 4 {
        return Err(CatalogError::NoIntegral(k));
    }
    Ok(())
}

/// The order-`2k` integral as transcribed, `k = 1..4`.
pub fn second_integral(k: u32) -> Result<DiffOp, CatalogError> {
    catalog_k(k)?;
    load_op(format!("k{k}/I2.json"))
}

/// `I12 = [I1, I2]`, either computed or as transcribed.
pub fn commutator_integral(k: u32, source: Source) -> Result<DiffOp, CatalogError> {
    catalog_k(k)?;
    match source {
        Source::Fixture => load_op(format!("k{k}/I12.json")),
        Source::Computed => {
            let i1 = first_integral(k)?;
            let i2 = second_integral(k)?;
            i1.commutator(&i2).map_err(|e| (format!("k{k}"), e).into())
        }
    }
}

/// Generic entry point used by the CLI. `I12` is always the computed commutator;
/// the transcribed table is reachable through [`commutator_integral`].
pub fn operator(k: u32, which: Which) -> Result<DiffOp, CatalogError> {
    match which {
        Which::H => {
            catalog_k(k)?;
            hamiltonian(k)
        }
        Which::I1 => {
            catalog_k(k)?;
            first_integral(k)
        }
        Which::I2 => second_integral(k),
        Which::I12 => commutator_integral(k, Source::Computed),
    }
}

/// `(H, I1, I2, I12)` for catalog index `k`, with `I12 = [I1, I2]` computed.
pub fn generators(k: u32) -> Result<[DiffOp; 4], CatalogError> {
    Ok([
        operator(k, Which::H)?,
        operator(k, Which::I1)?,
        operator(k, Which::I2)?,
        operator(k, Which::I12)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClosureKind {
    /// `[I1, I12]`
    DoubleI1,
    /// `[I2, I12]`
    DoubleI2,
    /// `I12² = R`
    Syzygy,
    /// `I12² = R` at `w = 0`
    SyzygyOmega0,
}

impl ClosureKind {
    pub const ALL: [ClosureKind; 4] = [
        ClosureKind::DoubleI1,
        ClosureKind::DoubleI2,
        ClosureKind::Syzygy,
        ClosureKind::SyzygyOmega0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClosureKind::DoubleI1 => "doubleI1",
            ClosureKind::DoubleI2 => "doubleI2",
            ClosureKind::Syzygy => "syzygy",
            ClosureKind::SyzygyOmega0 => "syzygy_omega0",
        }
    }
}

impl std::fmt::Display for ClosureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The printed right-hand side of a relation.
pub fn expected_closure(k: u32, which: ClosureKind) -> Result<GenPolynomial, CatalogError> {
    catalog_k(k)?;
    if k == 4 && which == ClosureKind::Syzygy {
        return Err(CatalogError::NotPrinted { k, which });
    }
    let rel = format!("k{k}/closures/{}.json", which.name());
    let text = fixture_text(&rel)?;
    GenPolynomial::from_json_str(&text).map_err(|e| (rel, e).into())
}

/// Eigenvalue data of `h_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectralData {
    pub k: u32,
    /// `E0 = 2w[(a+b)k + 1]`
    pub e0: ParamPoly,
    /// `c_k = k²(a+b)²`
    pub c_k: ParamPoly,
}

impl SpectralData {
    /// `4w(p + kq)`
    pub fn eps(&self, p_: u32, q: u32) -> ParamPoly {
        ParamPoly::var(Var::W).scale(&Rational::from_int(4 * (p_ + self.k * q) as i64))
    }
}

pub fn spectral_data(k: u32) -> Result<SpectralData, CatalogError> {
    check_k(k)?;
    let kk = Rational::from_int(k as i64);
    let ab = p("a + b");
    let e0 = (&ParamPoly::var(Var::W) * &ab.scale(&kk).add(&ParamPoly::one()))
        .scale(&Rational::from_int(2));
    let c_k = (&ab * &ab).scale(&(&kk * &kk));
    Ok(SpectralData { k, e0, c_k })
}

/// Leading (`w⁰`) parts of the conjectured general-`k` forms:
/// `Q_{k+1} = 8k²((−1)^k H^k I2 − I2²)` and
/// `R_k = 4k⁴(2a+1)(2a−3)H^{2k} + (−1)^{k+1} 8k² H^k (2 I1 I2 − I12)
///        + 16k⁴(−1)^{k+1}(2a²+2ab−a+b−9) H^k I2
///        + 16k²(I1 I2² + k²((a+b)²−9) I2² − I2 I12)`.
pub fn conjecture_forms(k: u32) -> Result<(GenPolynomial, GenPolynomial), CatalogError> {
    check_k(k)?;
    let ki = k as i64;
    let sign = if k.is_multiple_of(2) { 1 } else { -1 };
    let k2 = 8 * ki * ki;
    let q = GenPolynomial::from_terms([
        (GenMonomial::new(k, 0, 1, 0), ParamPoly::int(k2 * sign)),
        (GenMonomial::new(0, 0, 2, 0), ParamPoly::int(-k2)),
    ]);
    let k4 = ki.pow(4);
    let r = GenPolynomial::from_terms([
        (
            GenMonomial::new(2 * k, 0, 0, 0),
            p("(2*a + 1)*(2*a - 3)").scale(&Rational::from_int(4 * k4)),
        ),
        (
            GenMonomial::new(k, 1, 1, 0),
            ParamPoly::int(-sign * 16 * ki * ki),
        ),
        (
            GenMonomial::new(k, 0, 0, 1),
            ParamPoly::int(sign * 8 * ki * ki),
        ),
        (
            GenMonomial::new(k, 0, 1, 0),
            p("2*a^2 + 2*a*b - a + b - 9").scale(&Rational::from_int(-sign * 16 * k4)),
        ),
        (GenMonomial::new(0, 1, 2, 0), ParamPoly::int(16 * ki * ki)),
        (
            GenMonomial::new(0, 0, 2, 0),
            p("(a + b)^2 - 9").scale(&Rational::from_int(16 * k4)),
        ),
        (GenMonomial::new(0, 0, 1, 1), ParamPoly::int(-16 * ki * ki)),
    ]);
    Ok((q, r))
}
