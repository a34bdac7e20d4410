//! Douglas tensor, source terms and per-family Douglas certificates.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::fields::PointGeometry;
use crate::jet::{Jet, JetSpace, Scalar};
use crate::phi::PhiFamily;
use crate::sampling::ProbeSet;
use crate::spray::{kropina_structure_residual, AlphaBetaMetric, SprayField};

/// Fewest sample points a certificate accepts.
pub const MIN_CERTIFICATE_POINTS: usize = 20;

/// `get(i, j, k, l) = D^i_jkl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DouglasTensor {
    pub dim: usize,
    pub d: Vec<f64>,
}

impl DouglasTensor {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.d[((i * n + j) * n + k) * n + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.d.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_diff(&self, other: &DouglasTensor) -> f64 {
        self.d.iter().zip(&other.d).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest change under a permutation of the lower indices.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        for w in [self.get(i, k, j, l), self.get(i, l, k, j), self.get(i, j, l, k)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Third y-derivatives of every component of `f`, laid out as `[i][j][k][l]`.
fn third_derivatives<F>(y: &[f64], order: usize, f: F) -> Result<Vec<f64>>
where
    F: FnOnce(&[Jet]) -> Result<Vec<Jet>>,
{
    let n = y.len();
    let sp = JetSpace::get(n, order);
    let yj = Jet::seed(&sp, 0, y);
    let h = f(&yj)?;
    let mut out = vec![0.0; n * n * n * n];
    for (i, hi) in h.iter().enumerate() {
        for j in 0..n {
            for k in j..n {
                for l in k..n {
                    let v = hi.derivative(&[j, k, l]);
                    for (a, b, c) in [(j, k, l), (j, l, k), (k, j, l), (k, l, j), (l, j, k), (l, k, j)] {
                        out[((i * n + a) * n + b) * n + c] = v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// H^i = G^i − λ (∂G^m/∂y^m) y^i on jets of order ≥ 4.
fn projected<S: SprayField>(field: &S, y: &[Jet]) -> Result<Vec<Jet>> {
    let n = y.len();
    let g = field.eval(y)?;
    let div = (0..n).fold(Jet::constant(0.0), |acc, m| acc + g[m].partial(m));
    let lambda = 1.0 / (n as f64 + 1.0);
    Ok(g.into_iter()
        .zip(y)
        .map(|(gi, yi)| gi - div.clone() * yi.clone() * lambda)
        .collect())
}

/// D^i_jkl = ∂³/∂y^j∂y^k∂y^l (G^i − λ ∂_m G^m y^i).
pub fn douglas_tensor<S: SprayField>(field: &S, y: &[f64]) -> Result<DouglasTensor> {
    let n = field.dim();
    if y.len() != n {
        return Err(GeometryError::DimensionMismatch { expected: n, got: y.len() });
    }
    let d = third_derivatives(y, 4, |yj| projected(field, yj))?;
    Ok(DouglasTensor { dim: n, d })
}

pub fn douglas_at(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<DouglasTensor> {
    douglas_tensor(&ab.closed_at(p)?, y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceTerms {
    pub t: Vec<f64>,
    pub t_div: f64,
    pub lambda: f64,
}

/// T^i = αQ s^i_0 + Ψ(r00 − 2αQ s0) b^i and its divergence T^m_{y^m}.
pub fn source_terms_at<S: Scalar>(geo: &PointGeometry, family: &PhiFamily, y: &[S]) -> Result<(Vec<S>, S)> {
    let alpha = geo.alpha(y);
    if !(alpha.re() > 0.0) {
        return Err(GeometryError::SmallAlpha { alpha: alpha.re() });
    }
    let s = geo.beta(y) / alpha.clone();
    let f = family.factors(&s, geo.bsq)?;
    let s0 = geo.s0(y);
    let r00 = geo.r00(y);
    let aq = alpha.clone() * f.q.clone();
    let bracket = r00 - aq.clone() * s0.clone() * 2.0;
    let s_up0 = geo.s_up0(y);
    let t = (0..geo.dim)
        .map(|i| aq.clone() * s_up0[i].clone() + f.psi.clone() * bracket.clone() * geo.b_up[i])
        .collect();
    let gap = S::cst(geo.bsq) - s.clone() * s.clone();
    let t_div = f.dq.clone() * s0.clone()
        + f.dpsi * gap.clone() * bracket / alpha
        + f.psi * (geo.r0(y) - f.dq * gap * s0.clone() - f.q * s * s0) * 2.0;
    Ok((t, t_div))
}

pub fn source_terms(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<SourceTerms> {
    let geo = ab.point(p)?;
    let (t, t_div) = source_terms_at(&geo, &ab.family, y)?;
    Ok(SourceTerms { t, t_div, lambda: 1.0 / (ab.dim() as f64 + 1.0) })
}

/// Third y-derivatives of T^i − λ T_div y^i as a rank-4 array.
pub fn source_douglas(ab: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<DouglasTensor> {
    let geo = ab.point(p)?;
    let n = geo.dim;
    let lambda = 1.0 / (n as f64 + 1.0);
    let d = third_derivatives(y, 3, |yj| {
        let (t, div) = source_terms_at(&geo, &ab.family, yj)?;
        Ok(t.into_iter().zip(yj).map(|(ti, yi)| ti - div.clone() * yi.clone() * lambda).collect())
    })?;
    Ok(DouglasTensor { dim: n, d })
}

/// Max |∂³_y| of (T − T̄) − λ(T_div − T̄_div) y; zero when F and F̄ share their Douglas tensor.
pub fn shared_douglas_residual(f: &AlphaBetaMetric, fbar: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<f64> {
    if f.dim() != fbar.dim() {
        return Err(GeometryError::DimensionMismatch { expected: f.dim(), got: fbar.dim() });
    }
    let a = source_douglas(f, p, y)?;
    let b = source_douglas(fbar, p, y)?;
    // the Riemannian parts are quadratic, so only the source terms contribute
    Ok(a.max_diff(&b))
}

/// Max |D(F) − D(F̄)| from the full sprays.
pub fn douglas_difference(f: &AlphaBetaMetric, fbar: &AlphaBetaMetric, p: &[f64], y: &[f64]) -> Result<f64> {
    Ok(douglas_at(f, p, y)?.max_diff(&douglas_at(fbar, p, y)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DouglasTolerances {
    pub accept: f64,
    pub reject: f64,
}

impl Default for DouglasTolerances {
    fn default() -> Self {
        DouglasTolerances { accept: 1e-7, reject: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DouglasVerdict {
    Douglas,
    NotDouglas,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Per-point τ with the fit residual of b_{i|j} = 2τ[(1+2b²)a_ij − 3b_i b_j].
    Tau { points: Vec<Vec<f64>>, tau: Vec<f64> },
    MaxAbsS { value: f64 },
    KropinaStructure { value: f64 },
    MaxAbsNablaB { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DouglasCertificate {
    pub family: String,
    pub condition: String,
    pub verdict: DouglasVerdict,
    /// Largest violation of the family's algebraic condition over the sample points.
    pub residual: f64,
    /// Largest |D^i_jkl| over the probes.
    pub tensor_residual: f64,
    /// Set when a residual falls between the accept and reject thresholds.
    pub warning: bool,
    pub witness: Witness,
}

impl DouglasCertificate {
    pub fn is_douglas(&self) -> bool {
        self.verdict == DouglasVerdict::Douglas
    }
}

fn is_q(q: f64, target: f64) -> bool {
    (q - target).abs() < 1e-12
}

/// Least-squares τ at one point and the worst entry of the remainder.
fn berwald_fit(geo: &PointGeometry) -> (f64, f64) {
    let n = geo.dim;
    let m: Vec<f64> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            2.0 * ((1.0 + 2.0 * geo.bsq) * geo.a[k] - 3.0 * geo.b[i] * geo.b[j])
        })
        .collect();
    let mm: f64 = m.iter().map(|v| v * v).sum();
    let tau = if mm > 0.0 {
        m.iter().zip(&geo.nabla_b).map(|(a, b)| a * b).sum::<f64>() / mm
    } else {
        0.0
    };
    let res = m
        .iter()
        .zip(&geo.nabla_b)
        .fold(0.0f64, |w, (a, b)| w.max((b - tau * a).abs()));
    (tau, res)
}

/// Evaluates the family's Douglas condition on the probe points and the
/// Douglas tensor on the probe directions; both must pass.
pub fn douglas_certificate(ab: &AlphaBetaMetric, probes: &ProbeSet, tol: DouglasTolerances) -> Result<DouglasCertificate> {
    if probes.points.len() < MIN_CERTIFICATE_POINTS {
        return Err(GeometryError::Config(format!(
            "a Douglas certificate needs at least {MIN_CERTIFICATE_POINTS} sample points, got {}",
            probes.points.len()
        )));
    }
    let geos = probes
        .points
        .iter()
        .map(|p| ab.point(p))
        .collect::<Result<Vec<_>>>()?;
    let max_over = |f: &dyn Fn(&PointGeometry) -> f64| geos.iter().fold(0.0f64, |m, g| m.max(f(g)));
    let max_s = |g: &PointGeometry| g.max_abs_s();
    let (condition, residual, witness) = match ab.family {
        PhiFamily::Kropina => {
            let v = max_over(&kropina_structure_residual);
            ("s_ij = (b_i s_j - b_j s_i)/b^2", v, Witness::KropinaStructure { value: v })
        }
        PhiFamily::QabPlus { q } if is_q(q, 2.0) => {
            let fits: Vec<(f64, f64)> = geos.iter().map(berwald_fit).collect();
            let v = fits.iter().fold(0.0f64, |m, f| m.max(f.1));
            (
                "b_i|j = 2 tau [(1+2b^2) a_ij - 3 b_i b_j]",
                v,
                Witness::Tau { points: probes.points.clone(), tau: fits.iter().map(|f| f.0).collect() },
            )
        }
        PhiFamily::QabPlus { q } if is_q(q, -1.0) => {
            let v = max_over(&|g: &PointGeometry| g.nabla_b.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            ("b_i|j = 0", v, Witness::MaxAbsNablaB { value: v })
        }
        PhiFamily::QabPlus { .. } => {
            let v = max_over(&max_s);
            ("s_ij = 0", v, Witness::MaxAbsS { value: v })
        }
        PhiFamily::QabMinus { q } if !is_q(q.abs(), 1.0) => {
            let v = max_over(&max_s);
            ("s_ij = 0", v, Witness::MaxAbsS { value: v })
        }
        ref other => {
            return Err(GeometryError::UnsupportedFamily(format!(
                "no Douglas certificate for {} with these parameters",
                other.name()
            )))
        }
    };
    let mut tensor_residual: f64 = 0.0;
    for (p, ys) in probes.points.iter().zip(&probes.directions) {
        let field = ab.closed_at(p)?;
        for y in ys {
            tensor_residual = tensor_residual.max(douglas_tensor(&field, y)?.max_abs());
        }
    }
    let worst = residual.max(tensor_residual);
    let verdict = if worst <= tol.accept { DouglasVerdict::Douglas } else { DouglasVerdict::NotDouglas };
    Ok(DouglasCertificate {
        family: ab.family.name().into(),
        condition: condition.into(),
        verdict,
        residual,
        tensor_residual,
        warning: worst > tol.accept && worst < tol.reject,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{MetricField, OneFormField};
    use crate::poly::PolyField;
    use crate::sampling::DomainBox;
    use crate::spray::{ProjectiveShift, RiemannSpray};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m3(e: [u32; 3], c: f64) -> PolyField {
        PolyField::monomial(e.to_vec(), c)
    }

    fn curved_metric() -> MetricField {
        MetricField::diagonal(vec![
            m3([0, 0, 0], 1.0) + m3([0, 1, 0], 0.3),
            m3([0, 0, 0], 1.0) + m3([2, 0, 0], 0.2),
            m3([0, 0, 0], 1.0) + m3([1, 1, 0], 0.1),
        ])
        .unwrap()
    }

    fn shear(family: PhiFamily) -> AlphaBetaMetric {
        // b = (0.3 x^2, 0, 0): s_12 ≠ 0
        AlphaBetaMetric::new(
            MetricField::euclidean(3),
            OneFormField::new(vec![m3([0, 1, 0], 0.3), PolyField::zero(3), PolyField::zero(3)]).unwrap(),
            family,
        )
        .unwrap()
    }

    #[test]
    fn riemannian_spray_has_no_douglas_tensor() {
        let g = crate::fields::christoffel(&curved_metric(), &[0.2, 0.1, -0.3]).unwrap();
        let d = douglas_tensor(&RiemannSpray(g), &[0.3, -0.7, 0.5]).unwrap();
        assert!(d.max_abs() <= 1e-12);
    }

    #[test]
    fn projective_shift_leaves_douglas_tensor() {
        let ab = shear(PhiFamily::QabPlus { q: 3.0 });
        let field = ab.closed_at(&[0.1, 0.2, -0.1]).unwrap();
        let y = [0.8, 0.1, -0.4];
        let d0 = douglas_tensor(&field, &y).unwrap();
        let d1 = douglas_tensor(&ProjectiveShift { inner: field, theta: vec![0.7, -1.2, 0.3] }, &y).unwrap();
        assert!(d0.max_abs() > 1e-3);
        assert!(d0.max_diff(&d1) <= 1e-10);
        assert!(d0.symmetry_defect() == 0.0);
    }

    #[test]
    fn source_divergence_matches_jet_divergence() {
        let ab = shear(PhiFamily::QabPlus { q: 3.0 });
        let p = [0.1, 0.2, -0.1];
        let y = [0.8, 0.1, -0.4];
        let geo = ab.point(&p).unwrap();
        let st = source_terms(&ab, &p, &y).unwrap();
        let sp = JetSpace::get(3, 1);
        let (t, _) = source_terms_at(&geo, &ab.family, &Jet::seed(&sp, 0, &y)).unwrap();
        let div: f64 = (0..3).map(|m| t[m].derivative(&[m])).sum();
        assert!((div - st.t_div).abs() <= 1e-13 * (1.0 + div.abs()));
        assert_eq!(st.lambda, 0.25);
    }

    #[test]
    fn source_terms_vanish_for_parallel_form() {
        let ab = AlphaBetaMetric::new(MetricField::euclidean(3), OneFormField::constant(&[0.2, 0.1, 0.0]), PhiFamily::QabPlus { q: 3.0 }).unwrap();
        let st = source_terms(&ab, &[0.0, 0.0, 0.0], &[1.0, 0.5, 0.2]).unwrap();
        assert!(st.t.iter().all(|&v| v == 0.0) && st.t_div == 0.0);
    }

    #[test]
    fn source_douglas_equals_spray_douglas() {
        let ab = shear(PhiFamily::QabPlus { q: 3.0 });
        let p = [0.1, 0.2, -0.1];
        let y = [0.8, 0.1, -0.4];
        let a = source_douglas(&ab, &p, &y).unwrap();
        let b = douglas_at(&ab, &p, &y).unwrap();
        assert!(a.max_diff(&b) <= 1e-9, "{}", a.max_diff(&b));
    }

    #[test]
    fn certificates_on_flat_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let berwald = AlphaBetaMetric::new(MetricField::euclidean(3), OneFormField::constant(&[0.3, 0.0, 0.1]), PhiFamily::QabPlus { q: 2.0 }).unwrap();
        let probes = ProbeSet::draw(&mut rng, &DomainBox::cube(3, 0.5), &[&berwald], 20, 1).unwrap();
        let c = douglas_certificate(&berwald, &probes, DouglasTolerances::default()).unwrap();
        assert!(c.is_douglas());
        let Witness::Tau { tau, .. } = &c.witness else { panic!("expected tau table") };
        assert!(tau.iter().all(|&t| t == 0.0));

        let bad = shear(PhiFamily::QabPlus { q: 3.0 });
        let probes = ProbeSet::draw(&mut rng, &DomainBox::cube(3, 0.5), &[&bad], 20, 1).unwrap();
        let c = douglas_certificate(&bad, &probes, DouglasTolerances::default()).unwrap();
        assert_eq!(c.verdict, DouglasVerdict::NotDouglas);
        assert!((c.residual - 0.15).abs() < 1e-15);
    }

    #[test]
    fn too_few_points_is_config_error() {
        let ab = shear(PhiFamily::QabPlus { q: 3.0 });
        let probes = ProbeSet { points: vec![vec![0.0; 3]], directions: vec![vec![vec![1.0, 0.0, 0.0]]] };
        assert!(matches!(douglas_certificate(&ab, &probes, DouglasTolerances::default()), Err(GeometryError::Config(_))));
    }
}
