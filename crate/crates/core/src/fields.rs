//! Polynomial tensor fields and the Riemannian-side data at a point.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::jet::{contract, Scalar};
use crate::linalg;
use crate::poly::PolyField;

/// Symmetric matrix of polynomials `a_ij(x)`.
#[derive(Clone, Debug)]
pub struct MetricField {
    dim: usize,
    a: Vec<PolyField>,
    // da[k][i * n + j] = d_k a_ij
    da: Vec<Vec<PolyField>>,
}

impl MetricField {
    /// `a` is row-major `n x n`; symmetry is checked coefficient by coefficient.
    pub fn new(dim: usize, a: Vec<PolyField>) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim * dim,
                got: a.len(),
            });
        }
        for (k, p) in a.iter().enumerate() {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            let (i, j) = (k / dim, k % dim);
            if i < j && a[i * dim + j] != a[j * dim + i] {
                return Err(GeometryError::Config(format!(
                    "metric is not symmetric: a[{i}][{j}] differs from a[{j}][{i}]"
                )));
            }
        }
        let da = (0..dim)
            .map(|k| a.iter().map(|p| p.partial(k)).collect())
            .collect();
        Ok(MetricField { dim, a, da })
    }

    pub fn euclidean(dim: usize) -> Self {
        let a = (0..dim * dim)
            .map(|k| PolyField::constant(dim, if k / dim == k % dim { 1.0 } else { 0.0 }))
            .collect();
        MetricField::new(dim, a).expect("identity is symmetric")
    }

    /// Diagonal metric from its diagonal entries.
    pub fn diagonal(diag: Vec<PolyField>) -> Result<Self> {
        let dim = diag.len();
        let mut a = vec![PolyField::zero(dim); dim * dim];
        for (i, d) in diag.into_iter().enumerate() {
            a[i * dim + i] = d;
        }
        MetricField::new(dim, a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, i: usize, j: usize) -> &PolyField {
        &self.a[i * self.dim + j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        MetricField::new(self.dim, self.a.iter().map(|p| p.scale(c)).collect())
            .expect("scaling keeps symmetry")
    }

    pub fn matrix_at(&self, p: &[f64]) -> Vec<f64> {
        self.a.iter().map(|q| q.eval(p)).collect()
    }

    pub fn matrix_generic<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.a.iter().map(|q| q.eval_generic(x)).collect()
    }

    fn derivative_at(&self, p: &[f64]) -> Vec<Vec<f64>> {
        self.da
            .iter()
            .map(|row| row.iter().map(|q| q.eval(p)).collect())
            .collect()
    }

    pub fn check_positive_definite(&self, p: &[f64]) -> Result<()> {
        self.check_dim(p)?;
        linalg::check_positive_definite(&self.matrix_at(p), self.dim)
    }

    /// Positive-definiteness at every listed point; reports the first failure.
    pub fn check_positive_definite_on(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            self.check_positive_definite(p).map_err(|e| {
                GeometryError::Config(format!("metric fails at x = {p:?}: {e}"))
            })?;
        }
        Ok(())
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(())
    }
}

/// Covector of polynomials `b_i(x)`.
#[derive(Clone, Debug)]
pub struct OneFormField {
    dim: usize,
    b: Vec<PolyField>,
    db: Vec<Vec<PolyField>>,
}

impl OneFormField {
    pub fn new(b: Vec<PolyField>) -> Result<Self> {
        let dim = b.len();
        for p in &b {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        let db = b
            .iter()
            .map(|p| (0..dim).map(|k| p.partial(k)).collect())
            .collect();
        Ok(OneFormField { dim, b, db })
    }

    pub fn constant(b: &[f64]) -> Self {
        let dim = b.len();
        OneFormField::new(b.iter().map(|&c| PolyField::constant(dim, c)).collect())
            .expect("constant form is well formed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, i: usize) -> &PolyField {
        &self.b[i]
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(PolyField::is_zero)
    }

    pub fn at(&self, p: &[f64]) -> Vec<f64> {
        self.b.iter().map(|q| q.eval(p)).collect()
    }

    pub fn generic<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.b.iter().map(|q| q.eval_generic(x)).collect()
    }

    /// `db[i][j] = d_j b_i` at `p`.
    fn derivative_at(&self, p: &[f64]) -> Vec<f64> {
        self.db
            .iter()
            .flat_map(|row| row.iter().map(|q| q.eval(p)))
            .collect()
    }
}

/// Christoffel symbols of the second kind, `get(i, j, k) = Γ^i_jk`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Christoffel {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    /// `G^i = ½ Γ^i_jk y^j y^k`.
    pub fn spray<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                let block = &self.data[i * n * n..(i + 1) * n * n];
                crate::jet::quadratic_form(block, y) * 0.5
            })
            .collect()
    }
}

fn christoffel_from(a_inv: &[f64], da: &[Vec<f64>], n: usize) -> Christoffel {
    let mut data = vec![0.0; n * n * n];
    // lowered[l][j][k] = ½(d_j a_lk + d_k a_lj − d_l a_jk)
    let mut lowered = vec![0.0; n * n * n];
    for l in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = 0.5 * (da[j][l * n + k] + da[k][l * n + j] - da[l][j * n + k]);
                lowered[(l * n + j) * n + k] = v;
                lowered[(l * n + k) * n + j] = v;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let v: f64 = (0..n)
                    .map(|l| a_inv[i * n + l] * lowered[(l * n + j) * n + k])
                    .sum();
                data[(i * n + j) * n + k] = v;
                data[(i * n + k) * n + j] = v;
            }
        }
    }
    Christoffel { dim: n, data }
}

pub fn christoffel(metric: &MetricField, p: &[f64]) -> Result<Christoffel> {
    metric.check_positive_definite(p)?;
    let n = metric.dim;
    let a = metric.matrix_at(p);
    let a_inv = linalg::inverse(&a, n).ok_or(GeometryError::DegenerateMetric {
        pivot: 0.0,
        scale: 1.0,
    })?;
    Ok(christoffel_from(&a_inv, &metric.derivative_at(p), n))
}

pub fn riemann_spray(metric: &MetricField, p: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    Ok(christoffel(metric, p)?.spray(y))
}

/// Everything about α and β at a point that does not depend on y.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub dim: usize,
    pub a: Vec<f64>,
    pub a_inv: Vec<f64>,
    pub gamma: Christoffel,
    pub b: Vec<f64>,
    pub b_up: Vec<f64>,
    pub bsq: f64,
    /// `nabla_b[i * n + j] = b_{i|j}`
    pub nabla_b: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    /// `r_j = b^i r_ij`
    pub r_vec: Vec<f64>,
    /// `s_j = b^i s_ij`
    pub s_vec: Vec<f64>,
    /// `s^i = a^ik s_k`
    pub s_up: Vec<f64>,
}

impl PointGeometry {
    pub fn at(metric: &MetricField, oneform: &OneFormField, p: &[f64]) -> Result<Self> {
        let n = metric.dim;
        if oneform.dim != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: oneform.dim,
            });
        }
        metric.check_positive_definite(p)?;
        let a = metric.matrix_at(p);
        let a_inv = linalg::inverse(&a, n).ok_or(GeometryError::DegenerateMetric {
            pivot: 0.0,
            scale: 1.0,
        })?;
        let gamma = christoffel_from(&a_inv, &metric.derivative_at(p), n);
        let b = oneform.at(p);
        let db = oneform.derivative_at(p);
        let b_up = linalg::mat_vec(&a_inv, &b);
        let bsq = linalg::dot(&b, &b_up);

        let mut nabla_b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let conn: f64 = (0..n).map(|k| b[k] * gamma.get(k, i, j)).sum();
                nabla_b[i * n + j] = db[i * n + j] - conn;
            }
        }
        let mut r = vec![0.0; n * n];
        let mut s = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                r[i * n + j] = 0.5 * (nabla_b[i * n + j] + nabla_b[j * n + i]);
                s[i * n + j] = 0.5 * (nabla_b[i * n + j] - nabla_b[j * n + i]);
            }
        }
        let r_vec: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| b_up[i] * r[i * n + j]).sum())
            .collect();
        let s_vec: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| b_up[i] * s[i * n + j]).sum())
            .collect();
        let s_up = linalg::mat_vec(&a_inv, &s_vec);
        Ok(PointGeometry {
            dim: n,
            a,
            a_inv,
            gamma,
            b,
            b_up,
            bsq,
            nabla_b,
            r,
            s,
            r_vec,
            s_vec,
            s_up,
        })
    }

    pub fn alpha<S: Scalar>(&self, y: &[S]) -> S {
        crate::jet::quadratic_form(&self.a, y).sqrt()
    }

    pub fn beta<S: Scalar>(&self, y: &[S]) -> S {
        contract(&self.b, y)
    }

    pub fn max_abs_s(&self) -> f64 {
        self.s.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `s^i_0 = a^ik s_kj y^j`.
    pub fn s_up0<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        let n = self.dim;
        let s_k0: Vec<S> = (0..n).map(|k| contract(&self.s[k * n..(k + 1) * n], y)).collect();
        (0..n)
            .map(|i| {
                (0..n).fold(S::cst(0.0), |acc, k| {
                    acc + s_k0[k].clone() * self.a_inv[i * n + k]
                })
            })
            .collect()
    }

    pub fn r00<S: Scalar>(&self, y: &[S]) -> S {
        crate::jet::quadratic_form(&self.r, y)
    }

    pub fn s0<S: Scalar>(&self, y: &[S]) -> S {
        contract(&self.s_vec, y)
    }

    pub fn r0<S: Scalar>(&self, y: &[S]) -> S {
        contract(&self.r_vec, y)
    }
}

/// Pointwise covariant data of β together with its contractions against y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaData {
    pub nabla_b: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub r00: f64,
    pub s0: f64,
    pub r0: f64,
    pub si0: Vec<f64>,
    pub ri0: Vec<f64>,
    pub s_up0: Vec<f64>,
    pub s_up: Vec<f64>,
    pub r_vec: Vec<f64>,
    pub s_vec: Vec<f64>,
    pub b_up: Vec<f64>,
    pub bsq: f64,
    pub beta_val: f64,
    pub alpha_val: f64,
}

pub fn beta_data(
    metric: &MetricField,
    oneform: &OneFormField,
    p: &[f64],
    y: &[f64],
) -> Result<BetaData> {
    let g = PointGeometry::at(metric, oneform, p)?;
    if y.len() != g.dim {
        return Err(GeometryError::DimensionMismatch {
            expected: g.dim,
            got: y.len(),
        });
    }
    Ok(beta_data_from(&g, y))
}

pub fn beta_data_from(g: &PointGeometry, y: &[f64]) -> BetaData {
    let n = g.dim;
    let ri0: Vec<f64> = (0..n).map(|i| linalg::dot(&g.r[i * n..(i + 1) * n], y)).collect();
    let si0: Vec<f64> = (0..n).map(|i| linalg::dot(&g.s[i * n..(i + 1) * n], y)).collect();
    BetaData {
        nabla_b: g.nabla_b.clone(),
        r: g.r.clone(),
        s: g.s.clone(),
        r00: linalg::dot(&ri0, y),
        s0: linalg::dot(&g.s_vec, y),
        r0: linalg::dot(&g.r_vec, y),
        s_up0: linalg::mat_vec(&g.a_inv, &si0),
        si0,
        ri0,
        s_up: g.s_up.clone(),
        r_vec: g.r_vec.clone(),
        s_vec: g.s_vec.clone(),
        b_up: g.b_up.clone(),
        bsq: g.bsq,
        beta_val: g.beta(y),
        alpha_val: g.alpha(y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(e: [u32; 2], c: f64) -> PolyField {
        PolyField::monomial(e.to_vec(), c)
    }

    fn warped() -> MetricField {
        // a = diag(1, (x^1)^2)
        MetricField::diagonal(vec![p2([0, 0], 1.0), p2([2, 0], 1.0)]).unwrap()
    }

    #[test]
    fn flat_metric_has_no_christoffels() {
        let g = christoffel(&MetricField::euclidean(3), &[0.3, -1.0, 2.0]).unwrap();
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warped_christoffels_by_hand() {
        let g = christoffel(&warped(), &[2.0, 0.0]).unwrap();
        // Γ^2_12 = a22,1 / (2 a22) = 2x/(2x^2) = 1/x; Γ^1_22 = −½ a22,1 = −x
        assert!((g.get(1, 0, 1) - 0.5).abs() < 1e-15);
        assert!((g.get(1, 1, 0) - 0.5).abs() < 1e-15);
        assert!((g.get(0, 1, 1) + 2.0).abs() < 1e-15);
        assert_eq!(g.get(0, 0, 0), 0.0);
        assert_eq!(g.get(1, 1, 1), 0.0);
        let ga = riemann_spray(&warped(), &[2.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((ga[0] + 1.0).abs() < 1e-15 && ga[1] == 0.0);
    }

    #[test]
    fn constant_scaling_leaves_christoffels() {
        let m = warped();
        let g1 = christoffel(&m, &[1.3, 0.4]).unwrap();
        let g2 = christoffel(&m.scaled(7.5), &[1.3, 0.4]).unwrap();
        for (a, b) in g1.data.iter().zip(&g2.data) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        assert!(matches!(
            christoffel(&warped(), &[0.0, 1.0]),
            Err(GeometryError::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn non_symmetric_metric_is_rejected() {
        let a = vec![p2([0, 0], 1.0), p2([1, 0], 0.1), p2([0, 0], 0.0), p2([0, 0], 1.0)];
        assert!(MetricField::new(2, a).is_err());
    }

    #[test]
    fn beta_data_of_shear_form() {
        // b = (x^2, 0) on flat R^2
        let b = OneFormField::new(vec![p2([0, 1], 1.0), PolyField::zero(2)]).unwrap();
        let d = beta_data(&MetricField::euclidean(2), &b, &[0.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(d.r[1], 0.5);
        assert_eq!(d.s[1], 0.5);
        assert_eq!(d.s[2], -0.5);
        assert_eq!(d.r00, 1.0);
        assert_eq!(d.s_vec, vec![0.0, 1.5]);
        assert_eq!(d.s0, 1.5);
        assert_eq!(d.r0, 1.5);
        assert_eq!(d.bsq, 9.0);
    }

    #[test]
    fn constant_form_on_flat_space() {
        let b = OneFormField::constant(&[0.3, -0.4, 1.2]);
        let d = beta_data(&MetricField::euclidean(3), &b, &[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).unwrap();
        assert!(d.nabla_b.iter().all(|&v| v == 0.0));
        assert_eq!(d.r00, 0.0);
        assert!((d.bsq - 1.69).abs() < 1e-15);
    }
}
