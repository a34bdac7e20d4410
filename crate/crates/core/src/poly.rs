use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::jet::Scalar;

/// Multivariate polynomial with real coefficients on R^n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyField {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl PolyField {
    pub fn zero(dim: usize) -> Self {
        PolyField {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = PolyField::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate function x^k.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        let mut e = vec![0; dim];
        e[k] = 1;
        PolyField::monomial(e, 1.0)
    }

    pub fn monomial(exponents: Vec<u32>, coeff: f64) -> Self {
        let mut p = PolyField::zero(exponents.len());
        p.add_term(exponents, coeff);
        p
    }

    /// Builds a polynomial from `(exponents, coeff)` pairs; repeated exponents add up.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = PolyField::zero(dim);
        for (e, c) in terms {
            if e.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: e.len(),
                });
            }
            if !c.is_finite() {
                return Err(GeometryError::Config(format!(
                    "non-finite coefficient {c} for exponents {e:?}"
                )));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(e).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Exact partial derivative with respect to x^k.
    pub fn partial(&self, k: usize) -> PolyField {
        let mut out = PolyField::zero(self.dim);
        for (e, &c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[k] -= 1;
            out.add_term(d, c * e[k] as f64);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_generic(x)
    }

    pub fn eval_generic<S: Scalar>(&self, x: &[S]) -> S {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = S::cst(0.0);
        for (e, &c) in &self.terms {
            let mut term = S::cst(c);
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    term = term * xi.powi(k as i32);
                }
            }
            acc = acc + term;
        }
        acc
    }

    pub fn scale(&self, c: f64) -> PolyField {
        let mut out = PolyField::zero(self.dim);
        for (e, &v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    /// Exact equality up to an absolute coefficient tolerance.
    pub fn approx_eq(&self, other: &PolyField, tol: f64) -> bool {
        let diff = self.clone() - other.clone();
        diff.terms.values().all(|c| c.abs() <= tol)
    }
}

impl Add for PolyField {
    type Output = PolyField;
    fn add(mut self, rhs: PolyField) -> PolyField {
        assert_eq!(self.dim, rhs.dim, "polynomial dimension mismatch");
        for (e, c) in rhs.terms {
            self.add_term(e, c);
        }
        self
    }
}

impl Sub for PolyField {
    type Output = PolyField;
    fn sub(self, rhs: PolyField) -> PolyField {
        self + (-rhs)
    }
}

impl Neg for PolyField {
    type Output = PolyField;
    fn neg(self) -> PolyField {
        self.scale(-1.0)
    }
}

impl Mul for PolyField {
    type Output = PolyField;
    fn mul(self, rhs: PolyField) -> PolyField {
        assert_eq!(self.dim, rhs.dim, "polynomial dimension mismatch");
        let mut out = PolyField::zero(self.dim);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}
