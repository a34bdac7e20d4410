//! Projective relatedness of sprays and the two (q,α,β)/Kropina relation checkers.

use serde::{Deserialize, Serialize};

use crate::douglas::{douglas_certificate, DouglasCertificate, DouglasTolerances};
use crate::error::{GeometryError, Result};
use crate::fields::PointGeometry;
use crate::linalg;
use crate::phi::PhiFamily;
use crate::sampling::ProbeSet;
use crate::spray::{spray_closed_at, AlphaBetaMetric};

/// Minimum fraction of probes that must survive the singular-denominator filter.
pub const MIN_VALID_FRACTION: f64 = 0.9;

/// Returns P = ⟨G−Ḡ, y⟩/⟨y, y⟩ and ‖(G−Ḡ) − P y‖ / (1 + ‖G−Ḡ‖).
pub fn projective_residual(g: &[f64], gbar: &[f64], y: &[f64]) -> (f64, f64) {
    let diff: Vec<f64> = g.iter().zip(gbar).map(|(a, b)| a - b).collect();
    let p = linalg::dot(&diff, y) / linalg::dot(y, y);
    let rest: Vec<f64> = diff.iter().zip(y).map(|(d, yi)| d - p * yi).collect();
    (p, linalg::norm(&rest) / (1.0 + linalg::norm(&diff)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PSample {
    pub point: Vec<f64>,
    pub y: Vec<f64>,
    pub p: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub certificates_pass: bool,
    pub fit_pass: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveReport {
    pub theorem: String,
    pub is_projective: bool,
    pub p_samples: Vec<PSample>,
    /// Spray-level max projective residual over the fit probes.
    pub spray_residual: f64,
    pub theta_fit: Vec<Vec<f64>>,
    pub max_residual: f64,
    /// Fit residual with the b^i correction term left out.
    pub uncorrected_residual: f64,
    pub skipped_probes: usize,
    pub total_probes: usize,
    pub certificate: DouglasCertificate,
    pub certificate_bar: DouglasCertificate,
    /// Largest coordinate angle between b and b̄ over the fit points, in radians.
    pub max_collinearity_angle: f64,
    pub verdict: TheoremVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveTolerances {
    pub douglas: DouglasTolerances,
    pub fit: f64,
}

impl Default for ProjectiveTolerances {
    fn default() -> Self {
        ProjectiveTolerances { douglas: DouglasTolerances::default(), fit: 1e-7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Relation {
    Plus(f64),
    Minus(f64),
}

impl Relation {
    /// Coefficient C of b^i in the relation, or None at a singular denominator.
    fn correction(&self, geo: &PointGeometry, y: &[f64]) -> Option<f64> {
        let alpha = geo.alpha(y);
        let beta = geo.beta(y);
        let r00 = geo.r00(y);
        match *self {
            Relation::Plus(q) => {
                let den = (1.0 - q * q) * beta * beta
                    + (2.0 - q) * alpha * beta
                    + (1.0 + q * (q - 1.0) * geo.bsq) * alpha * alpha;
                (den.abs() >= 1e-10 * alpha * alpha).then(|| 0.5 * q * (q - 1.0) * alpha * alpha * r00 / den)
            }
            Relation::Minus(q) => {
                let den = beta * beta * (beta - alpha) + q * (geo.bsq * alpha * alpha - beta * beta) * alpha;
                (den.abs() >= 1e-10 * alpha.powi(3)).then(|| q * alpha.powi(3) * r00 / (2.0 * den))
            }
        }
    }
}

pub fn theorem1_check(
    f: &AlphaBetaMetric,
    fbar: &AlphaBetaMetric,
    certificate_probes: &ProbeSet,
    fit_probes: &ProbeSet,
    tol: ProjectiveTolerances,
) -> Result<ProjectiveReport> {
    let q = match (&f.family, &fbar.family) {
        (PhiFamily::QabPlus { q }, PhiFamily::Kropina) => *q,
        _ => {
            return Err(GeometryError::UnsupportedPairing(format!(
                "theorem 1 pairs qab_plus with kropina, got {} and {}",
                f.family.name(),
                fbar.family.name()
            )))
        }
    };
    if (q - 1.0).abs() < 1e-3 {
        return Err(GeometryError::Config(format!("q must differ from 1 (got {q})")));
    }
    run_check("theorem1", Relation::Plus(q), f, fbar, certificate_probes, fit_probes, tol)
}

pub fn theorem2_check(
    f: &AlphaBetaMetric,
    fbar: &AlphaBetaMetric,
    certificate_probes: &ProbeSet,
    fit_probes: &ProbeSet,
    tol: ProjectiveTolerances,
) -> Result<ProjectiveReport> {
    let q = match (&f.family, &fbar.family) {
        (PhiFamily::QabMinus { q }, PhiFamily::Kropina) => *q,
        _ => {
            return Err(GeometryError::UnsupportedPairing(format!(
                "theorem 2 pairs qab_minus with kropina, got {} and {}",
                f.family.name(),
                fbar.family.name()
            )))
        }
    };
    if (q - 1.0).abs() < 1e-3 || (q + 1.0).abs() < 1e-3 {
        return Err(GeometryError::Config(format!("q must differ from 1 and -1 (got {q})")));
    }
    run_check("theorem2", Relation::Minus(q), f, fbar, certificate_probes, fit_probes, tol)
}

struct PointFit {
    theta: Vec<f64>,
    max_residual: f64,
}

/// Least-squares θ with Z_m = (θ·y_m) y_m over the probes at one point.
fn fit_theta(zs: &[Vec<f64>], ys: &[&[f64]]) -> PointFit {
    let n = ys[0].len();
    let rows = zs.len() * n;
    let mut a = Vec::with_capacity(rows * n);
    let mut rhs = Vec::with_capacity(rows);
    for (z, y) in zs.iter().zip(ys) {
        for i in 0..n {
            a.extend(y.iter().map(|yk| y[i] * yk));
            rhs.push(z[i]);
        }
    }
    let theta = linalg::least_squares(&a, rows, n, &rhs).unwrap_or_else(|| vec![0.0; n]);
    let max_residual = zs
        .iter()
        .zip(ys)
        .map(|(z, y)| {
            let p = linalg::dot(&theta, y);
            let rest: Vec<f64> = z.iter().zip(y.iter()).map(|(zi, yi)| zi - p * yi).collect();
            linalg::norm(&rest) / (1.0 + linalg::norm(z))
        })
        .fold(0.0, f64::max);
    PointFit { theta, max_residual }
}

fn collinearity_angle(b: &[f64], bbar: &[f64]) -> f64 {
    let nb = linalg::norm(b) * linalg::norm(bbar);
    if nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    (linalg::dot(b, bbar).abs() / nb).clamp(0.0, 1.0).acos()
}

fn run_check(
    name: &str,
    relation: Relation,
    f: &AlphaBetaMetric,
    fbar: &AlphaBetaMetric,
    certificate_probes: &ProbeSet,
    fit_probes: &ProbeSet,
    tol: ProjectiveTolerances,
) -> Result<ProjectiveReport> {
    let n = f.dim();
    if fbar.dim() != n {
        return Err(GeometryError::DimensionMismatch { expected: n, got: fbar.dim() });
    }
    if n < 3 {
        return Err(GeometryError::Config(format!("dimension must be at least 3, got {n}")));
    }
    let certificate = douglas_certificate(f, certificate_probes, tol.douglas)?;
    let certificate_bar = douglas_certificate(fbar, certificate_probes, tol.douglas)?;

    let mut theta_fit = Vec::new();
    let mut p_samples = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut uncorrected_residual: f64 = 0.0;
    let mut spray_residual: f64 = 0.0;
    let mut skipped = 0;
    let mut total = 0;
    let mut angle: f64 = 0.0;
    for (p, ys) in fit_probes.points.iter().zip(&fit_probes.directions) {
        let geo = f.point(p)?;
        let gbar = fbar.point(p)?;
        angle = angle.max(collinearity_angle(&geo.b, &gbar.b));
        let mut zs = Vec::new();
        let mut zs_plain = Vec::new();
        let mut kept: Vec<&[f64]> = Vec::new();
        for y in ys {
            total += 1;
            let Some(c) = relation.correction(&geo, y) else {
                skipped += 1;
                continue;
            };
            if gbar.bsq < 1e-14 {
                skipped += 1;
                continue;
            }
            let (Ok(g_full), Ok(gbar_full)) = (spray_closed_at(&geo, &f.family, y), spray_closed_at(&gbar, &fbar.family, y)) else {
                skipped += 1;
                continue;
            };
            let (pv, res) = projective_residual(&g_full, &gbar_full, y);
            spray_residual = spray_residual.max(res);
            p_samples.push(PSample { point: p.clone(), y: y.clone(), p: pv, residual: res });

            let ga = geo.gamma.spray(y);
            let gabar = gbar.gamma.spray(y);
            let abar2 = gbar.alpha(y).powi(2);
            let rbar00 = gbar.r00(y);
            let k = 0.5 / gbar.bsq;
            let plain: Vec<f64> = (0..n)
                .map(|i| ga[i] - gabar[i] - k * (abar2 * gbar.s_up[i] + rbar00 * gbar.b_up[i]))
                .collect();
            zs.push(plain.iter().zip(&geo.b_up).map(|(z, b)| z + c * b).collect());
            zs_plain.push(plain);
            kept.push(y);
        }
        if kept.len() < n {
            theta_fit.push(vec![f64::NAN; n]);
            continue;
        }
        let fit = fit_theta(&zs, &kept);
        max_residual = max_residual.max(fit.max_residual);
        uncorrected_residual = uncorrected_residual.max(fit_theta(&zs_plain, &kept).max_residual);
        theta_fit.push(fit.theta);
    }
    if total == 0 || ((total - skipped) as f64) < MIN_VALID_FRACTION * total as f64 {
        return Err(GeometryError::Config(format!(
            "{skipped} of {total} probes hit a singular denominator; at least {:.0}% must be usable",
            MIN_VALID_FRACTION * 100.0
        )));
    }
    let certificates_pass = certificate.is_douglas() && certificate_bar.is_douglas();
    let fit_pass = max_residual <= tol.fit;
    let holds = certificates_pass && fit_pass;
    Ok(ProjectiveReport {
        theorem: name.into(),
        is_projective: holds,
        p_samples,
        spray_residual,
        theta_fit,
        max_residual,
        uncorrected_residual,
        skipped_probes: skipped,
        total_probes: total,
        certificate,
        certificate_bar,
        max_collinearity_angle: angle,
        verdict: TheoremVerdict { certificates_pass, fit_pass, holds },
    })
}
