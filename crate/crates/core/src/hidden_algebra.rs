//! The algebra `g^(s)`: `gl(2)` generators `J1..J4`, the commutative towers
//! `R_i = t^i ∂u` and `T_i`, the Euler-Cartan generator `J0`, and
//! expressibility of operators as ordered polynomials in these generators.
//!
//! `N` is carried as a rational number and substituted at construction.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::polyring::{Monomial, ParamPoly};
use crate::rational::Rational;
use crate::reduction::{solve_sparse, SparseSystem};
use crate::report::VerificationReport;
use crate::weyl::{DKey, DiffOp, WeylError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneratorId {
    J1,
    J2,
    J3,
    J4,
    R(u32),
    T(u32),
    J0,
}

impl fmt::Display for GeneratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorId::J1 => f.write_str("J1"),
            GeneratorId::J2 => f.write_str("J2"),
            GeneratorId::J3 => f.write_str("J3"),
            GeneratorId::J4 => f.write_str("J4"),
            GeneratorId::R(i) => write!(f, "R{i}"),
            GeneratorId::T(i) => write!(f, "T{i}"),
            GeneratorId::J0 => f.write_str("J0"),
        }
    }
}

#[derive(Debug, Error)]
pub enum HiddenError {
    #[error("tower index s must be positive")]
    BadS,
    #[error("R({i}) is out of range for s={s}")]
    BadIndex { i: u32, s: u32 },
    #[error("nested commutator T_{i} disagrees with the closed form (s={s})")]
    TowerMismatch { s: u32, i: u32 },
    #[error("no expression in g^({s}) generators with products of degree <= {degree}")]
    NoSolution { s: u32, degree: u32 },
    #[error(transparent)]
    Kernel(#[from] WeylError),
}

/// `g^(s)` at a fixed value of `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algebra {
    pub s: u32,
    pub n: Rational,
}

fn op(terms: &[(i64, i64, u32, u32, u32, u32)]) -> DiffOp {
    op_q(
        &terms
            .iter()
            .map(|&(num, den, et, eu, i, j)| (Rational::new(num, den), et, eu, i, j))
            .collect::<Vec<_>>(),
    )
}

fn op_q(terms: &[(Rational, u32, u32, u32, u32)]) -> DiffOp {
    let mut out = DiffOp::zero();
    for (c, et, eu, i, j) in terms {
        let m = Monomial::new(*et, *eu, 0, 0, 0).expect("small exponents");
        out = out.add(&DiffOp::monomial_op(ParamPoly::term(m, c.clone()), *i, *j));
    }
    out
}

impl Algebra {
    pub fn new(s: u32, n: Rational) -> Result<Self, HiddenError> {
        if s == 0 {
            return Err(HiddenError::BadS);
        }
        Ok(Algebra { s, n })
    }

    /// `J1, J2, J3, J4, R_0..R_s, T_0..T_s`, the `2s+6` generators in the
    /// fixed product order.
    pub fn generating_set(&self) -> Vec<GeneratorId> {
        let mut out = vec![
            GeneratorId::J1,
            GeneratorId::J2,
            GeneratorId::J3,
            GeneratorId::J4,
        ];
        out.extend((0..=self.s).map(GeneratorId::R));
        out.extend((0..=self.s).map(GeneratorId::T));
        out
    }

    pub fn build(&self, id: GeneratorId) -> Result<DiffOp, HiddenError> {
        let s = self.s;
        let n3 = &self.n / &Rational::from_int(3);
        let sq = Rational::from_int(s as i64);
        Ok(match id {
            GeneratorId::J1 => op(&[(1, 1, 0, 0, 1, 0)]),
            GeneratorId::J2 => op_q(&[(Rational::ONE, 1, 0, 1, 0), (-&n3, 0, 0, 0, 0)]),
            GeneratorId::J3 => op_q(&[(sq, 0, 1, 0, 1), (-&n3, 0, 0, 0, 0)]),
            GeneratorId::J4 => op_q(&[
                (Rational::ONE, 2, 0, 1, 0),
                (sq, 1, 1, 0, 1),
                (-&self.n, 1, 0, 0, 0),
            ]),
            GeneratorId::R(i) => {
                if i > s {
                    return Err(HiddenError::BadIndex { i, s });
                }
                op(&[(1, 1, i, 0, 0, 1)])
            }
            GeneratorId::T(i) => self.t_closed(i)?,
            GeneratorId::J0 => self.j0(),
        })
    }

    /// `J0 = t∂t + s u∂u − N`
    pub fn j0(&self) -> DiffOp {
        op_q(&[
            (Rational::ONE, 1, 0, 1, 0),
            (Rational::from_int(self.s as i64), 0, 1, 0, 1),
            (-&self.n, 0, 0, 0, 0),
        ])
    }

    /// Closed form `T_i = u ∂t^{s−i} J0 (J0+1) ⋯ (J0+i−1)`, zero for `i > s`.
    pub fn t_closed(&self, i: u32) -> Result<DiffOp, HiddenError> {
        if i > self.s {
            return Ok(DiffOp::zero());
        }
        let mut acc = op(&[(1, 1, 0, 1, self.s - i, 0)]);
        let j0 = self.j0();
        for m in 0..i {
            let shifted = j0.add(&DiffOp::from_poly(ParamPoly::int(m as i64)));
            acc = acc.compose(&shifted)?;
        }
        Ok(acc)
    }

    /// `T_0..T_s` by repeated commutators with `J4`, checked against the
    /// closed form. The nested bracket is taken as `[X, J4]` with
    /// `[A,B] = AB − BA`, and the `i`-fold bracket equals the closed form
    /// times the falling factorial `s(s−1)⋯(s−i+1)`; the two agree
    /// literally only for `s = 1`. The returned operators are the
    /// commutators themselves. The tower must terminate: the bracket after
    /// `T_s` is zero.
    pub fn t_tower_by_commutators(&self) -> Result<Vec<DiffOp>, HiddenError> {
        let j4 = self.build(GeneratorId::J4)?;
        let mut cur = self.t_closed(0)?;
        let mut out = vec![cur.clone()];
        let mut norm = Rational::ONE;
        for i in 1..=self.s + 1 {
            cur = cur.commutator(&j4)?;
            norm = &norm * &Rational::from_int(self.s as i64 - i as i64 + 1);
            if cur != self.t_closed(i)?.scale(&norm) {
                return Err(HiddenError::TowerMismatch { s: self.s, i });
            }
            if i <= self.s {
                out.push(cur.clone());
            }
        }
        Ok(out)
    }

    pub fn word(&self, w: &[GeneratorId]) -> Result<DiffOp, HiddenError> {
        let mut acc = DiffOp::identity();
        for &g in w {
            acc = acc.compose(&self.build(g)?)?;
        }
        Ok(acc)
    }

    /// Ordered words `g_1 g_2 ⋯ g_d` with non-decreasing positions in
    /// [`generating_set`](Self::generating_set), `d ≤ degree`, starting with
    /// the empty word.
    pub fn words(&self, degree: u32) -> Vec<Vec<GeneratorId>> {
        let gens = self.generating_set();
        let mut out = vec![Vec::new()];
        let mut frontier: Vec<(usize, Vec<GeneratorId>)> = vec![(0, Vec::new())];
        for _ in 0..degree {
            let mut next = Vec::new();
            for (start, w) in &frontier {
                for (idx, g) in gens.iter().enumerate().skip(*start) {
                    let mut w2 = w.clone();
                    w2.push(*g);
                    next.push((idx, w2));
                }
            }
            out.extend(next.iter().map(|(_, w)| w.clone()));
            frontier = next;
        }
        out
    }

    /// Writes `target` as `Σ c_w · w` over ordered words of degree at most
    /// `degree`, with `c_w` polynomial in `a, b, w`. Since every word is free
    /// of the parameters, the system splits by parameter monomial and each
    /// piece is an exact linear system over the rationals.
    pub fn express(&self, target: &DiffOp, degree: u32) -> Result<GenCombination, HiddenError> {
        let words = self.words(degree);
        let ops = words
            .iter()
            .map(|w| self.word(w))
            .collect::<Result<Vec<_>, _>>()?;
        let mut parts: BTreeMap<Monomial, DiffOp> = BTreeMap::new();
        for (key, m, c) in target.flat_terms() {
            let (tu, param) = m.split_tu();
            let piece = DiffOp::monomial_op(ParamPoly::term(tu, c.clone()), key.0, key.1);
            let e = parts.entry(param).or_insert_with(DiffOp::zero);
            *e = e.add(&piece);
        }
        let mut coeffs = vec![ParamPoly::zero(); words.len()];
        for (param, part) in &parts {
            let x = fit(part, &ops).ok_or(HiddenError::NoSolution { s: self.s, degree })?;
            for (i, xi) in x.into_iter().enumerate() {
                if !xi.is_zero() {
                    coeffs[i] = coeffs[i].add(&ParamPoly::term(*param, xi));
                }
            }
        }
        let terms = words
            .into_iter()
            .zip(coeffs)
            .filter(|(_, c)| !c.is_zero())
            .collect::<Vec<_>>();
        let combo = GenCombination {
            s: self.s,
            n: self.n.clone(),
            terms,
        };
        if combo.expand()? != *target {
            return Err(HiddenError::NoSolution { s: self.s, degree });
        }
        Ok(combo)
    }

    /// Structure checks: generating-set size `2s+6`, commutativity of the
    /// `R` and `T` towers, nilpotency, the commutator tower against its
    /// closed form, and closure of the `gl(2)` brackets on
    /// `{J1, J2, J3, J4, 1}` (the computed constants are recorded).
    pub fn verify_structure(&self) -> VerificationReport {
        let mut rep = VerificationReport::new(format!("hidden s={} N={}", self.s, self.n));
        let s = self.s;
        let set = self.generating_set();
        let nonzero = set
            .iter()
            .filter(|g| self.build(**g).map(|o| !o.is_zero()).unwrap_or(false))
            .count();
        rep.check(
            "dimension",
            set.len() == (2 * s + 6) as usize && nonzero == set.len(),
            format!("{} generators", nonzero),
        );

        rep.run("R commute", || {
            for i in 0..=s {
                for j in i + 1..=s {
                    let c = bracket(self, GeneratorId::R(i), GeneratorId::R(j))?;
                    if !c.is_zero() {
                        return Err(format!("[R{i},R{j}] != 0"));
                    }
                }
            }
            Ok(String::new())
        });
        rep.run("T commute", || {
            for i in 0..=s {
                for j in i + 1..=s {
                    let c = bracket(self, GeneratorId::T(i), GeneratorId::T(j))?;
                    if !c.is_zero() {
                        return Err(format!("[T{i},T{j}] != 0"));
                    }
                }
            }
            Ok(String::new())
        });
        rep.run("T nilpotent", || {
            let t = self.t_closed(s + 1).map_err(|e| e.to_string())?;
            if t.is_zero() && !self.t_closed(s).map_err(|e| e.to_string())?.is_zero() {
                Ok(format!("T{} = 0", s + 1))
            } else {
                Err("nilpotency fails".into())
            }
        });
        rep.run("T tower", || {
            self.t_tower_by_commutators()
                .map(|t| format!("{} commutators agree", t.len() - 1))
                .map_err(|e| e.to_string())
        });
        rep.run("gl2 closure", || {
            let js = [
                GeneratorId::J1,
                GeneratorId::J2,
                GeneratorId::J3,
                GeneratorId::J4,
            ];
            let basis = js
                .iter()
                .map(|&g| self.build(g).map_err(|e| e.to_string()))
                .chain(std::iter::once(Ok(DiffOp::identity())))
                .collect::<Result<Vec<_>, _>>()?;
            let mut table = Vec::new();
            for a in 0..4 {
                for b in a + 1..4 {
                    let c = bracket(self, js[a], js[b])?;
                    let x = fit(&c, &basis)
                        .ok_or_else(|| format!("[{},{}] leaves gl2", js[a], js[b]))?;
                    table.push(format!(
                        "[{},{}]={}",
                        js[a],
                        js[b],
                        render_combo(&x, &["J1", "J2", "J3", "J4", "1"])
                    ));
                }
            }
            Ok(table.join("; "))
        });
        rep
    }
}

fn bracket(alg: &Algebra, a: GeneratorId, b: GeneratorId) -> Result<DiffOp, String> {
    let x = alg.build(a).map_err(|e| e.to_string())?;
    let y = alg.build(b).map_err(|e| e.to_string())?;
    x.commutator(&y).map_err(|e| e.to_string())
}

fn render_combo(x: &[Rational], names: &[&str]) -> String {
    let parts = x
        .iter()
        .zip(names)
        .filter(|(c, _)| !c.is_zero())
        .map(|(c, n)| {
            if c.is_one() {
                n.to_string()
            } else {
                format!("{c}*{n}")
            }
        })
        .collect::<Vec<_>>();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Rational `x` with `Σ x_i basis_i = target`, if one exists.
pub fn fit(target: &DiffOp, basis: &[DiffOp]) -> Option<Vec<Rational>> {
    let mut rows: BTreeMap<(DKey, Monomial), Vec<(usize, Rational)>> = BTreeMap::new();
    for (col, b) in basis.iter().enumerate() {
        for (key, m, c) in b.flat_terms() {
            rows.entry((key, m)).or_default().push((col, c.clone()));
        }
    }
    let mut rhs: BTreeMap<(DKey, Monomial), Rational> = BTreeMap::new();
    for (key, m, c) in target.flat_terms() {
        rows.entry((key, m)).or_default();
        rhs.insert((key, m), c.clone());
    }
    let mut sys = SparseSystem::new(basis.len());
    for (k, entries) in rows {
        sys.push_row(entries, rhs.remove(&k).unwrap_or_default());
    }
    solve_sparse(&sys).ok()
}

/// `Σ c_w · w` over ordered generator words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenCombination {
    pub s: u32,
    pub n: Rational,
    pub terms: Vec<(Vec<GeneratorId>, ParamPoly)>,
}

impl GenCombination {
    pub fn expand(&self) -> Result<DiffOp, HiddenError> {
        let alg = Algebra::new(self.s, self.n.clone())?;
        let mut out = DiffOp::zero();
        for (w, c) in &self.terms {
            out = out.add(&alg.word(w)?.mul_poly(c)?);
        }
        Ok(out)
    }
}

impl fmt::Display for GenCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({c})")?;
            for g in w {
                write!(f, "*{g}")?;
            }
        }
        Ok(())
    }
}
