//! Finsler norm, fundamental tensor and spray coefficients of F = αφ(β/α).

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::fields::{MetricField, OneFormField, PointGeometry};
use crate::jet::{contract, Jet, JetSpace, Scalar};
use crate::linalg;
use crate::phi::PhiFamily;

/// Smallest admissible α(y) relative to the coordinate norm of y.
pub const ALPHA_RTOL: f64 = 1e-8;

/// Largest tolerated violation of a specialized spray's hypothesis.
pub const PRECONDITION_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct AlphaBetaMetric {
    pub metric: MetricField,
    pub oneform: OneFormField,
    pub family: PhiFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprayVector {
    pub g: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalTensor {
    pub dim: usize,
    pub g: Vec<f64>,
    pub positive_definite: bool,
}

impl AlphaBetaMetric {
    pub fn new(metric: MetricField, oneform: OneFormField, family: PhiFamily) -> Result<Self> {
        if metric.dim() != oneform.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: metric.dim(),
                got: oneform.dim(),
            });
        }
        if matches!(family, PhiFamily::Kropina) && oneform.is_zero() {
            return Err(GeometryError::Config(
                "a Kropina metric needs a nonzero 1-form".into(),
            ));
        }
        Ok(AlphaBetaMetric { metric, oneform, family })
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn point(&self, p: &[f64]) -> Result<PointGeometry> {
        PointGeometry::at(&self.metric, &self.oneform, p)
    }

    pub fn closed_at(&self, p: &[f64]) -> Result<ClosedSpray<'_>> {
        Ok(ClosedSpray { geo: self.point(p)?, family: &self.family })
    }

    /// s = β(y)/α(y) at `p`.
    pub fn s_value(&self, p: &[f64], y: &[f64]) -> Result<f64> {
        let geo = self.point(p)?;
        let alpha = checked_alpha(&geo, y)?;
        Ok(geo.beta(y) / alpha)
    }

    /// Whether (p, y) lies in the domain of F with at least `margin` of room in s.
    pub fn admissible_with_margin(&self, p: &[f64], y: &[f64], margin: f64) -> bool {
        let Ok(s) = self.s_value(p, y) else {
            return false;
        };
        match self.family {
            PhiFamily::Kropina => s > margin,
            PhiFamily::QabMinus { .. } => s > 1.0 + margin,
            _ => self.family.admits(s),
        }
    }

    /// F², with x and y both generic so the oracle can differentiate in x.
    pub fn norm_sq_generic<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let n = self.dim();
        let a = self.metric.matrix_generic(x);
        let mut alpha2 = S::cst(0.0);
        for i in 0..n {
            for j in 0..n {
                alpha2 = alpha2 + a[i * n + j].clone() * y[i].clone() * y[j].clone();
            }
        }
        let b = self.oneform.generic(x);
        let beta = crate::jet::dot(&b, y);
        if !(alpha2.re() > 0.0) {
            return Err(GeometryError::SmallAlpha { alpha: alpha2.re().max(0.0).sqrt() });
        }
        let alpha = alpha2.sqrt();
        let phi = self.family.phi(&(beta / alpha))?;
        Ok(alpha2 * phi.clone() * phi)
    }
}

fn checked_alpha<S: Scalar>(geo: &PointGeometry, y: &[S]) -> Result<S> {
    if y.len() != geo.dim {
        return Err(GeometryError::DimensionMismatch { expected: geo.dim, got: y.len() });
    }
    let alpha = geo.alpha(y);
    let ynorm = y.iter().map(|v| v.re() * v.re()).sum::<f64>().sqrt();
    if !(alpha.re() >= ALPHA_RTOL * ynorm) || ynorm == 0.0 {
        return Err(GeometryError::SmallAlpha { alpha: alpha.re() });
    }
    Ok(alpha)
}

pub fn finsler_norm(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<f64> {
    let geo = ab.point(p)?;
    let alpha = checked_alpha(&geo, y)?;
    Ok(alpha * ab.family.phi(&(geo.beta(y) / alpha))?)
}

/// g_ij = ½ ∂²F²/∂y^i∂y^j.
pub fn fundamental_tensor(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<FundamentalTensor> {
    let n = ab.dim();
    let geo = ab.point(p)?;
    checked_alpha(&geo, y)?;
    let sp = JetSpace::get(n, 2);
    let yj = Jet::seed(&sp, 0, y);
    let alpha2 = crate::jet::quadratic_form(&geo.a, &yj);
    let phi = ab.family.phi(&(geo.beta(&yj) / alpha2.sqrt()))?;
    let f2 = alpha2 * phi.clone() * phi;
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = 0.5 * f2.derivative(&[i, j]);
        }
    }
    let positive_definite = linalg::is_positive_definite(&g, n);
    Ok(FundamentalTensor { dim: n, g, positive_definite })
}

/// G^i = ¼ g^il {∂²F²/∂x^k∂y^l y^k − ∂F²/∂x^l}, differentiating the whole composition.
pub fn spray_oracle(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<SprayVector> {
    let n = ab.dim();
    if p.len() != n || y.len() != n {
        return Err(GeometryError::DimensionMismatch { expected: n, got: p.len().min(y.len()) });
    }
    ab.metric.check_positive_definite(p)?;
    checked_alpha(&ab.point(p)?, y)?;
    let sp = JetSpace::get(2 * n, 2);
    let xj = Jet::seed(&sp, 0, p);
    let yj = Jet::seed(&sp, n, y);
    let f2 = ab.norm_sq_generic(&xj, &yj)?;
    let mut g = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for l in 0..n {
        for i in 0..n {
            g[l * n + i] = 0.5 * f2.derivative(&[n + l, n + i]);
        }
        let mixed: f64 = (0..n).map(|k| f2.derivative(&[k, n + l]) * y[k]).sum();
        rhs[l] = 0.25 * (mixed - f2.derivative(&[l]));
    }
    let out = linalg::solve(&g, n, &rhs).ok_or(GeometryError::DegenerateTensor)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::DegenerateTensor);
    }
    Ok(SprayVector { g: out })
}

/// G^i = G^i_α + αQ s^i_0 + (r00 − 2Qα s0)(Θ y^i/α + Ψ b^i).
pub fn spray_closed_at<S: Scalar>(geo: &PointGeometry, family: &PhiFamily, y: &[S]) -> Result<Vec<S>> {
    let alpha = checked_alpha(geo, y)?;
    let s = geo.beta(y) / alpha.clone();
    let f = family.factors(&s, geo.bsq)?;
    let ga = geo.gamma.spray(y);
    let s_up0 = geo.s_up0(y);
    let aq = alpha.clone() * f.q.clone();
    let bracket = geo.r00(y) - aq.clone() * geo.s0(y) * 2.0;
    let y_coef = bracket.clone() * f.theta / alpha;
    let b_coef = bracket * f.psi;
    Ok((0..geo.dim)
        .map(|i| {
            ga[i].clone()
                + aq.clone() * s_up0[i].clone()
                + y_coef.clone() * y[i].clone()
                + b_coef.clone() * geo.b_up[i]
        })
        .collect())
}

pub fn spray_closed(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<SprayVector> {
    let geo = ab.point(p)?;
    Ok(SprayVector { g: spray_closed_at(&geo, &ab.family, y)? })
}

/// Largest deviation of s_ij from (b_i s_j − b_j s_i)/b², the Kropina Douglas structure.
pub fn kropina_structure_residual(geo: &PointGeometry) -> f64 {
    let n = geo.dim;
    if geo.bsq == 0.0 {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = (geo.b[i] * geo.s_vec[j] - geo.b[j] * geo.s_vec[i]) / geo.bsq;
            worst = worst.max((geo.s[i * n + j] - target).abs());
        }
    }
    worst
}

fn precondition(name: &str, residual: f64, geo: &PointGeometry) -> Result<()> {
    let scale = 1.0 + geo.nabla_b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual <= PRECONDITION_TOL * scale {
        Ok(())
    } else {
        Err(GeometryError::PreconditionViolated { condition: name.into(), residual })
    }
}

/// The specialized spray of each family, valid under that family's Douglas hypothesis.
pub fn spray_family_at<S: Scalar>(geo: &PointGeometry, family: &PhiFamily, y: &[S]) -> Result<Vec<S>> {
    let alpha = checked_alpha(geo, y)?;
    let beta = geo.beta(y);
    let s_val = beta.re() / alpha.re();
    if !family.admits(s_val) {
        return Err(GeometryError::SingularS { s: s_val });
    }
    let ga = geo.gamma.spray(y);
    let r00 = geo.r00(y);
    let a2 = alpha.clone() * alpha.clone();
    let (y_coef, b_coef) = match *family {
        PhiFamily::QabPlus { q } => {
            precondition("max |s_ij|", geo.max_abs_s(), geo)?;
            let den = beta.clone() * beta.clone() * (1.0 - q * q)
                + alpha.clone() * beta.clone() * (2.0 - q)
                + a2.clone() * (1.0 + q * (q - 1.0) * geo.bsq);
            if den.re() == 0.0 {
                return Err(GeometryError::SingularDelta { s: s_val, bsq: geo.bsq });
            }
            let y_coef = (alpha.clone() - beta.clone() * (2.0 * (q - 1.0))) * r00.clone() * (0.5 * q) / den.clone();
            let b_coef = a2 * r00 * (0.5 * q * (q - 1.0)) / den;
            (y_coef, b_coef)
        }
        PhiFamily::QabMinus { q } => {
            precondition("max |s_ij|", geo.max_abs_s(), geo)?;
            let b2 = beta.clone() * beta.clone();
            let den = b2.clone() * (beta.clone() - alpha.clone())
                + (a2.clone() * geo.bsq - b2) * alpha.clone() * q;
            if den.re() == 0.0 {
                return Err(GeometryError::SingularDelta { s: s_val, bsq: geo.bsq });
            }
            let y_coef = beta.clone() * (beta.clone() - alpha.clone() * (2.0 * q)) * r00.clone() * 0.5 / den.clone();
            let b_coef = a2 * alpha * r00 * (0.5 * q) / den;
            (y_coef, b_coef)
        }
        PhiFamily::Kropina => {
            precondition("Kropina structure of s_ij", kropina_structure_residual(geo), geo)?;
            let s_up = &geo.s_up;
            let c = -0.5 / geo.bsq;
            let s0 = geo.s0(y);
            let y_coef = (s0 * 2.0 + r00.clone() * beta * 2.0 / a2.clone()) * c;
            let b_coef = -r00 * c;
            return Ok((0..geo.dim)
                .map(|i| {
                    ga[i].clone()
                        + a2.clone() * (-c * s_up[i])
                        + y_coef.clone() * y[i].clone()
                        + b_coef.clone() * geo.b_up[i]
                })
                .collect());
        }
        PhiFamily::GenericPower { .. } => {
            return Err(GeometryError::UnsupportedFamily(
                "generic_power has no specialized spray".into(),
            ))
        }
    };
    Ok((0..geo.dim)
        .map(|i| ga[i].clone() + y_coef.clone() * y[i].clone() + b_coef.clone() * geo.b_up[i])
        .collect())
}

pub fn spray_family(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<SprayVector> {
    let geo = ab.point(p)?;
    Ok(SprayVector { g: spray_family_at(&geo, &ab.family, y)? })
}

/// A spray at a fixed point, evaluable on any scalar type in y.
pub trait SprayField {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, y: &[S]) -> Result<Vec<S>>;
}

/// Closed-form spray of an (α,β)-metric at a point.
#[derive(Clone, Debug)]
pub struct ClosedSpray<'a> {
    pub geo: PointGeometry,
    pub family: &'a PhiFamily,
}

impl SprayField for ClosedSpray<'_> {
    fn dim(&self) -> usize {
        self.geo.dim
    }
    fn eval<S: Scalar>(&self, y: &[S]) -> Result<Vec<S>> {
        spray_closed_at(&self.geo, self.family, y)
    }
}

/// Riemannian spray ½Γ^i_jk y^j y^k at a point.
#[derive(Clone, Debug)]
pub struct RiemannSpray(pub crate::fields::Christoffel);

impl SprayField for RiemannSpray {
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn eval<S: Scalar>(&self, y: &[S]) -> Result<Vec<S>> {
        Ok(self.0.spray(y))
    }
}

/// G^i + P(y) y^i with the 1-form P = θ_k y^k.
#[derive(Clone, Debug)]
pub struct ProjectiveShift<E> {
    pub inner: E,
    pub theta: Vec<f64>,
}

impl<E: SprayField> SprayField for ProjectiveShift<E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval<S: Scalar>(&self, y: &[S]) -> Result<Vec<S>> {
        let p = contract(&self.theta, y);
        let g = self.inner.eval(y)?;
        Ok(g.into_iter().zip(y).map(|(gi, yi)| gi + p.clone() * yi.clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::PolyField;

    fn flat_constant(family: PhiFamily) -> AlphaBetaMetric {
        AlphaBetaMetric::new(MetricField::euclidean(2), OneFormField::constant(&[1.0, 0.0]), family).unwrap()
    }

    fn curved(family: PhiFamily, b: Vec<PolyField>) -> AlphaBetaMetric {
        let m = |e: [u32; 3], c: f64| PolyField::monomial(e.to_vec(), c);
        let a = vec![
            m([0, 0, 0], 1.0) + m([0, 2, 0], 0.1), m([0, 0, 1], 0.05), PolyField::zero(3),
            m([0, 0, 1], 0.05), m([0, 0, 0], 1.0) + m([1, 0, 0], 0.2), PolyField::zero(3),
            PolyField::zero(3), PolyField::zero(3), m([0, 0, 0], 1.2) + m([1, 1, 0], 0.1),
        ];
        AlphaBetaMetric::new(MetricField::new(3, a).unwrap(), OneFormField::new(b).unwrap(), family).unwrap()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        d / (1.0 + linalg::norm(b))
    }

    #[test]
    fn norms_of_flat_examples() {
        let y = [1.0, 1.0];
        let f = finsler_norm(&flat_constant(PhiFamily::Kropina), &[0.0, 0.0], &y).unwrap();
        assert!((f - 2.0).abs() < 1e-15);
        let ab = flat_constant(PhiFamily::QabPlus { q: 1.0 });
        let f = finsler_norm(&ab, &[0.0, 0.0], &y).unwrap();
        assert!((f - (2f64.sqrt() + 1.0)).abs() < 1e-15);
        let f3 = finsler_norm(&ab, &[0.0, 0.0], &[3.0, 3.0]).unwrap();
        assert!((f3 - 3.0 * f).abs() < 1e-14);
    }

    #[test]
    fn randers_fundamental_tensor_matches_hand_formula() {
        let ab = AlphaBetaMetric::new(
            MetricField::euclidean(2),
            OneFormField::constant(&[0.3, -0.2]),
            PhiFamily::QabPlus { q: 1.0 },
        )
        .unwrap();
        let y = [0.7, 1.1];
        let t = fundamental_tensor(&ab, &[0.0, 0.0], &y).unwrap();
        let alpha = linalg::norm(&y);
        let f = alpha + 0.3 * 0.7 - 0.2 * 1.1;
        let l = [y[0] / alpha + 0.3, y[1] / alpha - 0.2];
        for i in 0..2 {
            for j in 0..2 {
                let a = if i == j { 1.0 } else { 0.0 };
                let expect = f / alpha * (a - y[i] * y[j] / (alpha * alpha)) + l[i] * l[j];
                assert!((t.g[i * 2 + j] - expect).abs() < 1e-14);
            }
        }
        assert!(t.positive_definite);
    }

    #[test]
    fn vanishing_form_gives_riemannian_tensor() {
        let ab = AlphaBetaMetric::new(MetricField::euclidean(2), OneFormField::constant(&[0.0, 0.0]), PhiFamily::QabPlus { q: 2.0 }).unwrap();
        let t = fundamental_tensor(&ab, &[0.0, 0.0], &[0.4, -1.3]).unwrap();
        assert_eq!(t.g, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn flat_constant_sprays_vanish() {
        for fam in [PhiFamily::QabPlus { q: 2.0 }, PhiFamily::Kropina, PhiFamily::QabPlus { q: 3.0 }] {
            let ab = flat_constant(fam);
            let y = [1.0, 0.4];
            assert!(spray_oracle(&ab, &[0.2, 0.3], &y).unwrap().g.iter().all(|v| v.abs() < 1e-14));
            assert!(spray_closed(&ab, &[0.2, 0.3], &y).unwrap().g.iter().all(|v| v.abs() < 1e-14));
            assert!(spray_family(&ab, &[0.2, 0.3], &y).unwrap().g.iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn oracle_agrees_with_closed_form_on_curved_data() {
        let m = |e: [u32; 3], c: f64| PolyField::monomial(e.to_vec(), c);
        let b = vec![m([0, 1, 0], 0.2) + m([0, 0, 0], 0.1), m([0, 0, 1], -0.15), m([1, 0, 0], 0.1)];
        let y = [0.6, -0.3, 0.8];
        for fam in [PhiFamily::QabPlus { q: 3.0 }, PhiFamily::QabPlus { q: -1.0 }, PhiFamily::QabPlus { q: 1.5 }] {
            let ab = curved(fam, b.clone());
            let p = [0.3, -0.2, 0.4];
            let o = spray_oracle(&ab, &p, &y).unwrap();
            let c = spray_closed(&ab, &p, &y).unwrap();
            assert!(rel(&c.g, &o.g) < 1e-12, "{:?} vs {:?}", c.g, o.g);
        }
        let kb = vec![m([0, 0, 0], 1.0) + m([0, 1, 0], 0.2), m([1, 0, 0], 0.3), m([0, 0, 0], 0.4)];
        let ab = curved(PhiFamily::Kropina, kb);
        let o = spray_oracle(&ab, &[0.1, 0.2, 0.3], &y).unwrap();
        let c = spray_closed(&ab, &[0.1, 0.2, 0.3], &y).unwrap();
        assert!(rel(&c.g, &o.g) < 1e-12);
    }

    #[test]
    fn family_spray_refuses_non_closed_form() {
        let m = |e: [u32; 2], c: f64| PolyField::monomial(e.to_vec(), c);
        let ab = AlphaBetaMetric::new(
            MetricField::euclidean(2),
            OneFormField::new(vec![m([0, 1], 0.3), PolyField::zero(2)]).unwrap(),
            PhiFamily::QabPlus { q: 3.0 },
        )
        .unwrap();
        assert!(matches!(
            spray_family(&ab, &[0.0, 0.5], &[1.0, 0.2]),
            Err(GeometryError::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn kropina_outside_cone_is_rejected() {
        let ab = flat_constant(PhiFamily::Kropina);
        assert!(matches!(
            spray_closed(&ab, &[0.0, 0.0], &[-1.0, 0.2]),
            Err(GeometryError::SingularS { .. })
        ));
        assert!(!ab.admissible_with_margin(&[0.0, 0.0], &[0.01, 1.0], 0.05));
    }
}
