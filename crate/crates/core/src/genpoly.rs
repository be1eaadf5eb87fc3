//! Polynomials in ordered monomials `H^n I1^m I2^p I12^q` with coefficients in `Q[a,b,w]`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::polyring::{JsonTerm, ParamBinding, ParamPoly, PolyError};

/// Exponents of `(H, I1, I2, I12)`; the operator is `H^n ∘ I1^m ∘ I2^p ∘ I12^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GenMonomial {
    pub n: u32,
    pub m: u32,
    pub p: u32,
    pub q: u32,
}

impl GenMonomial {
    pub const ONE: GenMonomial = GenMonomial {
        n: 0,
        m: 0,
        p: 0,
        q: 0,
    };

    pub const fn new(n: u32, m: u32, p: u32, q: u32) -> Self {
        GenMonomial { n, m, p, q }
    }

    pub fn degree(&self) -> u32 {
        self.n + self.m + self.p + self.q
    }

    pub fn exps(&self) -> [u32; 4] {
        [self.n, self.m, self.p, self.q]
    }

    /// All monomials of total degree `≤ max_degree` with `q ≤ max_q`, in ascending order.
    pub fn all_up_to(max_degree: u32, max_q: u32) -> Vec<GenMonomial> {
        let mut v = Vec::new();
        for n in 0..=max_degree {
            for m in 0..=max_degree - n {
                for p in 0..=max_degree - n - m {
                    for q in 0..=(max_degree - n - m - p).min(max_q) {
                        v.push(GenMonomial::new(n, m, p, q));
                    }
                }
            }
        }
        v.sort();
        v
    }
}

impl PartialOrd for GenMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded, then lexicographic with `H > I1 > I2 > I12`.
impl Ord for GenMonomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.degree(), self.n, self.m, self.p, self.q).cmp(&(
            other.degree(),
            other.n,
            other.m,
            other.p,
            other.q,
        ))
    }
}

impl fmt::Display for GenMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (name, e) in [
            ("H", self.n),
            ("I1", self.m),
            ("I2", self.p),
            ("I12", self.q),
        ] {
            match e {
                0 => {}
                1 => parts.push(name.to_string()),
                _ => parts.push(format!("{name}^{e}")),
            }
        }
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join("*"))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct GenPolynomial {
    terms: BTreeMap<GenMonomial, ParamPoly>,
}

impl GenPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (GenMonomial, ParamPoly)>) -> Self {
        let mut g = Self::zero();
        for (m, c) in terms {
            g.add_term(m, &c);
        }
        g
    }

    pub fn add_term(&mut self, m: GenMonomial, c: &ParamPoly) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_default();
        *e = e.add(c);
        if e.is_zero() {
            self.terms.remove(&m);
        }
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

    pub fn terms(&self) -> &BTreeMap<GenMonomial, ParamPoly> {
        &self.terms
    }

    pub fn coeff(&self, m: GenMonomial) -> ParamPoly {
        self.terms.get(&m).cloned().unwrap_or_default()
    }

    /// Highest total degree of a monomial, `None` for zero.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, &c.neg());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c);
        }
        out
    }

    pub fn eval_params(&self, bind: &ParamBinding) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (*m, c.eval_params(bind))))
    }

    pub fn to_json(&self) -> GenPolyJson {
        GenPolyJson {
            format: GENPOLY_FORMAT.to_string(),
            monomials: self
                .terms
                .iter()
                .rev()
                .map(|(m, c)| GenPolyJsonTerm {
                    h: m.n,
                    i1: m.m,
                    i2: m.p,
                    i12: m.q,
                    coeff: c.to_json_terms(),
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &GenPolyJson) -> Result<Self, GenPolyError> {
        if doc.format != GENPOLY_FORMAT {
            return Err(GenPolyError::Format(format!(
                "expected {GENPOLY_FORMAT:?}, found {:?}",
                doc.format
            )));
        }
        let mut g = Self::zero();
        for t in &doc.monomials {
            let c = ParamPoly::from_json_terms(&t.coeff)?;
            if !c.is_param_only() {
                return Err(GenPolyError::Format(
                    "coefficients must not contain t or u".into(),
                ));
            }
            g.add_term(GenMonomial::new(t.h, t.i1, t.i2, t.i12), &c);
        }
        Ok(g)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, GenPolyError> {
        let doc: GenPolyJson =
            serde_json::from_str(s).map_err(|e| GenPolyError::Format(e.to_string()))?;
        Self::from_json(&doc)
    }
}

impl fmt::Display for GenPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            let mono = m.to_string();
            match c.as_constant() {
                Some(v) if *m != GenMonomial::ONE => {
                    if v.is_one() {
                        write!(f, "{mono}")?
                    } else {
                        write!(f, "{v}*{mono}")?
                    }
                }
                _ if *m == GenMonomial::ONE => write!(f, "({c})")?,
                _ => write!(f, "({c})*{mono}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for GenPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenPolyError {
    #[error("malformed genpoly document: {0}")]
    Format(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

pub const GENPOLY_FORMAT: &str = "genpoly-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenPolyJsonTerm {
    #[serde(rename = "H")]
    pub h: u32,
    #[serde(rename = "I1")]
    pub i1: u32,
    #[serde(rename = "I2")]
    pub i2: u32,
    #[serde(rename = "I12")]
    pub i12: u32,
    pub coeff: Vec<JsonTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenPolyJson {
    pub format: String,
    pub monomials: Vec<GenPolyJsonTerm>,
}
