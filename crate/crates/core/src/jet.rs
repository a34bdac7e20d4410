//! Forward-mode differentiation by truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] carries every Taylor coefficient of a function of `nvars`
//! variables up to total degree `order`. Arithmetic on jets is exact up to
//! that degree, so third (or fourth) derivatives of a composed expression come
//! out without finite-difference noise. All geometry in this crate is written
//! against the [`Scalar`] trait, so the same code evaluates on plain `f64` or
//! on jets.

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Numeric type the geometry code is generic over.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    /// Value part (the zeroth Taylor coefficient).
    fn re(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn recip(&self) -> Self {
        Self::cst(1.0) / self.clone()
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
}

/// Sum of products `sum_i a_i * b_i` over equally long slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::cst(0.0), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// `sum_i c_i * y_i` for real coefficients.
pub fn contract<S: Scalar>(c: &[f64], y: &[S]) -> S {
    c.iter()
        .zip(y)
        .fold(S::cst(0.0), |acc, (ci, yi)| acc + yi.clone() * *ci)
}

/// `y^T M y` for a real row-major `n x n` matrix.
pub fn quadratic_form<S: Scalar>(m: &[f64], y: &[S]) -> S {
    let n = y.len();
    let mut acc = S::cst(0.0);
    for i in 0..n {
        let row = contract(&m[i * n..(i + 1) * n], y);
        acc = acc + row * y[i].clone();
    }
    acc
}

/// Monomial bookkeeping shared by all jets of one shape.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
}

impl JetSpace {
    /// Shared space for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    fn build(nvars: usize, order: usize) -> JetSpace {
        assert!(order <= u8::MAX as usize, "jet order too large");
        let mut exps = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u8; nvars];
            push_compositions(&mut exps, &mut current, 0, degree);
        }
        let index: HashMap<Vec<u8>, usize> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degree = |e: &Vec<u8>| e.iter().map(|&v| v as usize).sum::<usize>();
        let mut products = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            let di = degree(ei);
            for (j, ej) in exps.iter().enumerate() {
                if di + degree(ej) > order {
                    continue;
                }
                let sum: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                let k = index[&sum];
                products.push((i as u32, j as u32, k as u32));
            }
        }
        JetSpace {
            nvars,
            order,
            exps,
            index,
            products,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }
}

fn push_compositions(out: &mut Vec<Vec<u8>>, current: &mut [u8], pos: usize, remaining: usize) {
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == current.len() - 1 {
        current[pos] = remaining as u8;
        out.push(current.to_vec());
        current[pos] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v as u8;
        push_compositions(out, current, pos + 1, remaining - v);
    }
    current[pos] = 0;
}

/// Truncated Taylor expansion around a point.
///
/// A jet without a space is a plain constant and combines with any other jet.
#[derive(Clone, Debug)]
pub struct Jet {
    space: Option<Arc<JetSpace>>,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64) -> Jet {
        Jet {
            space: None,
            c: vec![v],
        }
    }

    /// The independent variable `var`, expanded around `value`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
        assert!(var < space.nvars, "variable index out of range");
        let mut c = vec![0.0; space.len()];
        c[0] = value;
        if space.order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            c[space.index[&e]] = 1.0;
        }
        Jet {
            space: Some(space.clone()),
            c,
        }
    }

    /// Seeds every entry of `values` as its own variable, starting at `first_var`.
    pub fn seed(space: &Arc<JetSpace>, first_var: usize, values: &[f64]) -> Vec<Jet> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(space, first_var + i, v))
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn space(&self) -> Option<&Arc<JetSpace>> {
        self.space.as_ref()
    }

    /// Taylor coefficient of the monomial with exponents `exps`.
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        match &self.space {
            None => {
                if exps.iter().all(|&e| e == 0) {
                    self.c[0]
                } else {
                    0.0
                }
            }
            Some(sp) => sp.index.get(exps).map_or(0.0, |&k| self.c[k]),
        }
    }

    /// Mixed partial derivative along the listed variables (repeats allowed).
    pub fn derivative(&self, vars: &[usize]) -> f64 {
        let Some(sp) = &self.space else {
            return if vars.is_empty() { self.c[0] } else { 0.0 };
        };
        if vars.len() > sp.order {
            return 0.0;
        }
        let mut e = vec![0u8; sp.nvars];
        for &v in vars {
            e[v] += 1;
        }
        let factorial: f64 = e
            .iter()
            .map(|&k| (1..=k as u32).product::<u32>() as f64)
            .product();
        self.coeff(&e) * factorial
    }

    /// Partial derivative with respect to `var`.
    ///
    /// The result keeps the same space but its top-degree coefficients are
    /// unknown and set to zero; it is exact only up to degree `order - 1`.
    pub fn partial(&self, var: usize) -> Jet {
        let Some(sp) = &self.space else {
            return Jet::constant(0.0);
        };
        let mut out = vec![0.0; sp.len()];
        let mut lower = vec![0u8; sp.nvars];
        for (k, e) in sp.exps.iter().enumerate() {
            let m = e[var];
            if m == 0 || self.c[k] == 0.0 {
                continue;
            }
            lower.copy_from_slice(e);
            lower[var] -= 1;
            out[sp.index[&lower]] += m as f64 * self.c[k];
        }
        Jet {
            space: Some(sp.clone()),
            c: out,
        }
    }

    /// `f(self)` given the Taylor coefficients `f^(k)(a) / k!` of `f` at the value `a`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let Some(sp) = &self.space else {
            return Jet::constant(taylor[0]);
        };
        let mut h = self.clone();
        h.c[0] = 0.0;
        let top = sp.order.min(taylor.len() - 1);
        let mut acc = Jet::constant(taylor[top]);
        for k in (0..top).rev() {
            acc = acc * h.clone() + taylor[k];
        }
        acc
    }

    fn order(&self) -> usize {
        self.space.as_ref().map_or(0, |s| s.order)
    }

    fn join(a: &Option<Arc<JetSpace>>, b: &Option<Arc<JetSpace>>) -> Arc<JetSpace> {
        match (a, b) {
            (Some(x), Some(y)) => {
                assert!(
                    Arc::ptr_eq(x, y) || (x.nvars == y.nvars && x.order == y.order),
                    "mixing jets of different shapes"
                );
                x.clone()
            }
            _ => unreachable!("join called with a constant operand"),
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        match (&self.space, &rhs.space) {
            (_, None) => {
                self.c[0] += rhs.c[0];
                self
            }
            (None, _) => rhs + self.c[0],
            _ => {
                Jet::join(&self.space, &rhs.space);
                for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                    *a += *b;
                }
                self
            }
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for a in self.c.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        match (&self.space, &rhs.space) {
            (_, None) => self * rhs.c[0],
            (None, _) => rhs * self.c[0],
            _ => {
                let sp = Jet::join(&self.space, &rhs.space);
                let mut out = vec![0.0; sp.len()];
                for &(i, j, k) in &sp.products {
                    out[k as usize] += self.c[i as usize] * rhs.c[j as usize];
                }
                Jet {
                    space: Some(sp),
                    c: out,
                }
            }
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if rhs.space.is_none() {
            return self / rhs.c[0];
        }
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for a in self.c.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Scalar for Jet {
    fn cst(v: f64) -> Self {
        Jet::constant(v)
    }

    fn re(&self) -> f64 {
        self.c[0]
    }

    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    fn powf(&self, p: f64) -> Self {
        let a = self.c[0];
        let k_max = self.order();
        let mut taylor = Vec::with_capacity(k_max + 1);
        let mut t = a.powf(p);
        taylor.push(t);
        for k in 1..=k_max {
            // binom(p, k) a^(p-k), built incrementally
            t *= (p - (k as f64 - 1.0)) / (k as f64 * a);
            taylor.push(t);
        }
        self.compose(&taylor)
    }

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = Jet::constant(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    fn recip(&self) -> Self {
        let a = self.c[0];
        let k_max = self.order();
        let mut taylor = Vec::with_capacity(k_max + 1);
        let mut t = 1.0 / a;
        taylor.push(t);
        for _ in 1..=k_max {
            t *= -1.0 / a;
            taylor.push(t);
        }
        self.compose(&taylor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_sizes_match_binomials() {
        assert_eq!(JetSpace::get(3, 4).len(), 35);
        assert_eq!(JetSpace::get(6, 2).len(), 28);
        assert_eq!(JetSpace::get(1, 5).len(), 6);
    }

    #[test]
    fn univariate_derivatives_of_reciprocal() {
        let sp = JetSpace::get(1, 4);
        let x = Jet::variable(&sp, 0, 2.0);
        let f = x.recip();
        // d^k/dx^k 1/x = (-1)^k k! / x^(k+1)
        let expect = [0.5, -0.25, 0.25, -0.375, 0.75];
        for (k, e) in expect.iter().enumerate() {
            let d = f.derivative(&vec![0; k]);
            assert!((d - e).abs() < 1e-14, "k={k}: {d} vs {e}");
        }
    }

    #[test]
    fn mixed_partials_of_product() {
        let sp = JetSpace::get(2, 3);
        let x = Jet::variable(&sp, 0, 1.5);
        let y = Jet::variable(&sp, 1, -0.5);
        // f = x^2 y + sqrt(x) y^2
        let f = x.powi(2) * y.clone() + x.sqrt() * y.powi(2);
        assert!((f.derivative(&[0, 1]) - 2.0 * 1.5 - 0.5 / 1.5f64.sqrt() * 2.0 * -0.5).abs() < 1e-13);
        assert!((f.derivative(&[0, 0, 1]) - (2.0 - 0.25 * 1.5f64.powf(-1.5) * 2.0 * -0.5)).abs() < 1e-13);
        assert!((f.derivative(&[1, 1, 1])).abs() < 1e-14);
    }

    #[test]
    fn powf_matches_closed_form_derivatives() {
        let sp = JetSpace::get(1, 3);
        let x = Jet::variable(&sp, 0, 1.3);
        let f = x.powf(2.7);
        let d3 = 2.7 * 1.7 * 0.7 * 1.3f64.powf(-0.3);
        assert!((f.derivative(&[0, 0, 0]) - d3).abs() < 1e-12);
    }

    #[test]
    fn partial_lowers_degree() {
        let sp = JetSpace::get(2, 3);
        let x = Jet::variable(&sp, 0, 0.7);
        let y = Jet::variable(&sp, 1, 0.2);
        let f = x.powi(3) * y.clone();
        let fx = f.partial(0);
        // fx = 3 x^2 y, d/dy of that = 3 x^2
        assert!((fx.value() - 3.0 * 0.49 * 0.2).abs() < 1e-14);
        assert!((fx.derivative(&[1]) - 3.0 * 0.49).abs() < 1e-14);
    }

    #[test]
    fn constants_combine_with_variables() {
        let sp = JetSpace::get(1, 2);
        let x = Jet::variable(&sp, 0, 3.0);
        let f = Jet::constant(2.0) * x.clone() - Jet::constant(1.0) + x.clone() / Jet::constant(4.0);
        assert!((f.value() - 5.75).abs() < 1e-15);
        assert!((f.derivative(&[0]) - 2.25).abs() < 1e-15);
        let g = Jet::constant(1.0) / x;
        assert!((g.derivative(&[0, 0]) - 2.0 / 27.0).abs() < 1e-15);
    }
}
