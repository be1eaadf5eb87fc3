//! Invariant polynomial spaces `P_N^(s) = span{t^p u^q : p + s q ≤ N}`,
//! exact matrices of operators on them, and triangular spectra.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyring::{JsonTerm, Monomial, ParamPoly};
use crate::report::VerificationReport;
use crate::weyl::{DiffOp, WeylError};

#[derive(Debug, Error)]
pub enum RepError {
    #[error("P_{n}^({s}) is not invariant: t^{p} u^{q} maps to t^{ip} u^{iq}")]
    NotInvariant {
        n: u32,
        s: u32,
        p: u32,
        q: u32,
        ip: u32,
        iq: u32,
    },
    #[error("not triangular in the graded order: entry ({row}, {col}) links grades {row_grade} and {col_grade}")]
    NotTriangular {
        row: usize,
        col: usize,
        row_grade: u32,
        col_grade: u32,
    },
    #[error("s must be positive")]
    BadS,
    #[error(transparent)]
    Kernel(#[from] WeylError),
}

/// Basis of `P_N^(s)` ordered by grade `p + s q`, ties by `p` ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    pub n: u32,
    pub s: u32,
    pub elements: Vec<(u32, u32)>,
}

impl MonomialBasis {
    pub fn grade(&self, (p, q): (u32, u32)) -> u32 {
        p + self.s * q
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn index_of(&self, pq: (u32, u32)) -> Option<usize> {
        self.elements.iter().position(|e| *e == pq)
    }
}

pub fn basis(n: u32, s: u32) -> Result<MonomialBasis, RepError> {
    if s == 0 {
        return Err(RepError::BadS);
    }
    let mut elements = Vec::new();
    for g in 0..=n {
        for q in 0..=g / s {
            elements.push((g - s * q, q));
        }
    }
    elements.sort_by_key(|&(p, q)| (p + s * q, p));
    Ok(MonomialBasis { n, s, elements })
}

/// Entry `(r, c)` is the coefficient of `basis[r]` in `op(basis[c])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepMatrix {
    pub basis: MonomialBasis,
    pub entries: BTreeMap<(usize, usize), ParamPoly>,
}

pub fn matrix_of(op: &DiffOp, n: u32, s: u32) -> Result<RepMatrix, RepError> {
    let basis = basis(n, s)?;
    let index: BTreeMap<(u32, u32), usize> = basis
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| (*e, i))
        .collect();
    let mut entries = BTreeMap::new();
    for (c, &(p, q)) in basis.elements.iter().enumerate() {
        let m = Monomial::new(p, q, 0, 0, 0).expect("small exponents");
        let image = op.apply(&ParamPoly::term(m, crate::Rational::ONE))?;
        for (tu, coeff) in image.split_by_tu() {
            let key = (tu.exp(crate::Var::T), tu.exp(crate::Var::U));
            match index.get(&key) {
                Some(&r) => {
                    entries.insert((r, c), coeff);
                }
                None => {
                    return Err(RepError::NotInvariant {
                        n,
                        s,
                        p,
                        q,
                        ip: key.0,
                        iq: key.1,
                    })
                }
            }
        }
    }
    Ok(RepMatrix { basis, entries })
}

impl RepMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn get(&self, r: usize, c: usize) -> ParamPoly {
        self.entries.get(&(r, c)).cloned().unwrap_or_default()
    }

    /// Strict graded triangularity: every off-diagonal entry maps a
    /// monomial to one of strictly lower grade.
    pub fn check_triangular(&self) -> Result<(), RepError> {
        for &(r, c) in self.entries.keys() {
            if r == c {
                continue;
            }
            let rg = self.basis.grade(self.basis.elements[r]);
            let cg = self.basis.grade(self.basis.elements[c]);
            if rg >= cg {
                return Err(RepError::NotTriangular {
                    row: r,
                    col: c,
                    row_grade: rg,
                    col_grade: cg,
                });
            }
        }
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<ParamPoly> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Matrix product in the same basis.
    pub fn mul(&self, other: &RepMatrix) -> RepMatrix {
        let mut acc: BTreeMap<(usize, usize), ParamPoly> = BTreeMap::new();
        for (&(r, k), x) in &self.entries {
            for (&(k2, c), y) in other.entries.range((k, 0)..(k + 1, 0)) {
                debug_assert_eq!(k, k2);
                let e = acc.entry((r, c)).or_default();
                *e = e.add(&(x * y));
            }
        }
        acc.retain(|_, v| !v.is_zero());
        RepMatrix {
            basis: self.basis.clone(),
            entries: acc,
        }
    }

    /// The leading `dim` by `dim` block.
    pub fn leading_block(&self, dim: usize) -> BTreeMap<(usize, usize), ParamPoly> {
        self.entries
            .iter()
            .filter(|((r, c), _)| *r < dim && *c < dim)
            .map(|(k, v)| (*k, v.clone()))
            .collect()
    }

    pub fn to_json(&self) -> RepMatrixJson {
        RepMatrixJson {
            format: "repmat-v1".into(),
            n: self.basis.n,
            s: self.basis.s,
            basis: self.basis.elements.iter().map(|&(p, q)| [p, q]).collect(),
            entries: self
                .entries
                .iter()
                .map(|(&(r, c), v)| RepEntryJson {
                    r,
                    c,
                    coeff: v.to_json_terms(),
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("matrix serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepEntryJson {
    pub r: usize,
    pub c: usize,
    pub coeff: Vec<JsonTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepMatrixJson {
    pub format: String,
    #[serde(rename = "N")]
    pub n: u32,
    pub s: u32,
    pub basis: Vec<[u32; 2]>,
    pub entries: Vec<RepEntryJson>,
}

/// Eigenvalues keyed by the exponents `(p, q)` of the basis monomial.
pub type Spectrum = Vec<((u32, u32), ParamPoly)>;

/// Diagonal of the matrix of `op` on `P_N^(s)`, in basis order, provided the
/// matrix is strictly graded-triangular.
pub fn spectrum(op: &DiffOp, n: u32, s: u32) -> Result<Spectrum, RepError> {
    let m = matrix_of(op, n, s)?;
    m.check_triangular()?;
    Ok(m.basis.elements.iter().copied().zip(m.diagonal()).collect())
}

/// Invariance of `P_N^(s)` for every `N ≤ n_max`, and nesting: the matrix on
/// `P_N` is the leading block of the matrix on `P_{N+1}`.
pub fn flag_check(op: &DiffOp, s: u32, n_max: u32) -> VerificationReport {
    let mut rep = VerificationReport::new(format!("flag s={s}"));
    let mut prev: Option<RepMatrix> = None;
    for n in 0..=n_max {
        match matrix_of(op, n, s) {
            Ok(m) => {
                let nested = match &prev {
                    Some(pm) => m.leading_block(pm.dim()) == pm.entries,
                    None => true,
                };
                rep.check(
                    format!("N={n}"),
                    nested,
                    if nested {
                        format!("dim {}", m.dim())
                    } else {
                        "not nested".into()
                    },
                );
                prev = Some(m);
            }
            Err(e) => {
                rep.fail(format!("N={n}"), e.to_string());
                prev = None;
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{first_integral, hamiltonian};
    use crate::expr::{parse_operator, parse_poly};

    #[test]
    fn basis_examples() {
        assert_eq!(
            basis(2, 2).unwrap().elements,
            vec![(0, 0), (1, 0), (0, 1), (2, 0)]
        );
        assert_eq!(basis(0, 3).unwrap().elements, vec![(0, 0)]);
        assert_eq!(basis(2, 1).unwrap().len(), 6);
    }

    #[test]
    fn h2_on_p2() {
        let m = matrix_of(&hamiltonian(2).unwrap(), 2, 2).unwrap();
        m.check_triangular().unwrap();
        let d = m.diagonal();
        let w = |c| parse_poly(&format!("{c}*w")).unwrap();
        assert_eq!(d, vec![ParamPoly::zero(), w(4), w(8), w(8)]);
    }

    #[test]
    fn x1_column_of_u() {
        let m = matrix_of(&first_integral(1).unwrap(), 1, 1).unwrap();
        // equal grades tie-break by p ascending
        assert_eq!(m.basis.elements, vec![(0, 0), (0, 1), (1, 0)]);
        assert_eq!(m.get(2, 1), parse_poly("-4*b - 2").unwrap());
        assert_eq!(m.get(1, 1), parse_poly("4*a + 4*b + 4").unwrap());
    }

    #[test]
    fn h3_needs_s2() {
        assert!(matches!(
            matrix_of(&hamiltonian(3).unwrap(), 2, 1),
            Err(RepError::NotInvariant { .. })
        ));
    }

    #[test]
    fn h1_spectrum() {
        let sp = spectrum(&hamiltonian(1).unwrap(), 1, 1).unwrap();
        let vals: Vec<_> = sp.into_iter().map(|(_, v)| v).collect();
        assert_eq!(
            vals,
            vec![
                ParamPoly::zero(),
                parse_poly("4*w").unwrap(),
                parse_poly("4*w").unwrap()
            ]
        );
    }

    #[test]
    fn zero_op_spectrum() {
        let sp = spectrum(&DiffOp::zero(), 3, 2).unwrap();
        assert!(sp.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn not_triangular() {
        let op = parse_operator("u*Dt").unwrap();
        assert!(matches!(
            spectrum(&op, 2, 1),
            Err(RepError::NotTriangular { .. })
        ));
    }

    #[test]
    fn representation_property() {
        let a = hamiltonian(2).unwrap();
        let b = first_integral(2).unwrap();
        let ab = matrix_of(&a.compose(&b).unwrap(), 4, 2).unwrap();
        let prod = matrix_of(&a, 4, 2)
            .unwrap()
            .mul(&matrix_of(&b, 4, 2).unwrap());
        assert_eq!(ab, prod);
    }

    #[test]
    fn flag_h2() {
        let r = flag_check(&hamiltonian(2).unwrap(), 2, 6);
        assert!(r.passed(), "{}", r.to_text());
    }

    #[test]
    fn json_shape() {
        let m = matrix_of(&hamiltonian(1).unwrap(), 1, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json_string()).unwrap();
        assert_eq!(v["format"], "repmat-v1");
        assert_eq!(v["N"], 1);
        assert_eq!(v["basis"][2], serde_json::json!([1, 0]));
    }
}
