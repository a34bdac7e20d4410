//! Geodesics ẍ + 2G(x, ẋ) = 0 by classical fourth-order Runge-Kutta.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::linalg;
use crate::spray::{finsler_norm, spray_closed, AlphaBetaMetric};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    pub metric_tag: String,
    /// Set when a spray evaluation failed and the path was cut short.
    pub failure: Option<String>,
    /// max |F(x, ẋ) − F(x0, ẏ0)| / F(x0, y0) over the samples.
    pub max_norm_drift: f64,
}

fn accel(ab: &AlphaBetaMetric, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    Ok(spray_closed(ab, x, v)?.g.into_iter().map(|g| -2.0 * g).collect())
}

fn axpy(x: &[f64], h: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(ab: &AlphaBetaMetric, x: &[f64], v: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let a1 = accel(ab, x, v)?;
    let (x2, v2) = (axpy(x, 0.5 * h, v), axpy(v, 0.5 * h, &a1));
    let a2 = accel(ab, &x2, &v2)?;
    let (x3, v3) = (axpy(x, 0.5 * h, &v2), axpy(v, 0.5 * h, &a2));
    let a3 = accel(ab, &x3, &v3)?;
    let (x4, v4) = (axpy(x, h, &v3), axpy(v, h, &a3));
    let a4 = accel(ab, &x4, &v4)?;
    let n = x.len();
    let xn = (0..n).map(|i| x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])).collect();
    let vn = (0..n).map(|i| v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])).collect();
    Ok((xn, vn))
}

pub fn geodesic(ab: &AlphaBetaMetric, p0: &[f64], y0: &[f64], h: f64, steps: usize) -> Result<GeodesicPath> {
    if !(h > 0.0) {
        return Err(GeometryError::Config(format!("step size must be positive, got {h}")));
    }
    let f0 = finsler_norm(ab, p0, y0)?;
    accel(ab, p0, y0)?;
    let mut samples = vec![GeodesicSample { t: 0.0, x: p0.to_vec(), v: y0.to_vec() }];
    let mut failure = None;
    let mut drift: f64 = 0.0;
    let (mut x, mut v) = (p0.to_vec(), y0.to_vec());
    for k in 1..=steps {
        let next = rk4_step(ab, &x, &v, h).and_then(|(xn, vn)| {
            let f = finsler_norm(ab, &xn, &vn)?;
            Ok((xn, vn, f))
        });
        match next {
            Ok((xn, vn, f)) => {
                drift = drift.max((f - f0).abs() / f0);
                x = xn;
                v = vn;
                samples.push(GeodesicSample { t: k as f64 * h, x: x.clone(), v: v.clone() });
            }
            Err(e) => {
                failure = Some(format!("step {k}: {e}"));
                break;
            }
        }
    }
    Ok(GeodesicPath {
        samples,
        metric_tag: ab.family.name().into(),
        failure,
        max_norm_drift: drift,
    })
}

/// Cuts the path where its coordinate arc length reaches `length`.
pub fn truncate_to_length(path: &GeodesicPath, length: f64) -> GeodesicPath {
    let mut out = path.clone();
    let mut acc = 0.0;
    for k in 1..path.samples.len() {
        let (a, b) = (&path.samples[k - 1], &path.samples[k]);
        let seg = linalg::norm(&axpy(&b.x, -1.0, &a.x));
        if acc + seg >= length {
            let w = if seg > 0.0 { (length - acc) / seg } else { 0.0 };
            let lerp = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p + w * (q - p)).collect();
            out.samples.truncate(k);
            out.samples.push(GeodesicSample { t: a.t + w * (b.t - a.t), x: lerp(&a.x, &b.x), v: lerp(&a.v, &b.v) });
            return out;
        }
        acc += seg;
    }
    out
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = axpy(b, -1.0, a);
    let ap = axpy(p, -1.0, a);
    let len2 = linalg::dot(&ab, &ab);
    let t = if len2 > 0.0 { (linalg::dot(&ap, &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    linalg::norm(&axpy(&ap, -t, &ab))
}

fn one_sided(a: &GeodesicPath, b: &GeodesicPath) -> f64 {
    a.samples
        .iter()
        .map(|s| {
            if b.samples.len() == 1 {
                return linalg::norm(&axpy(&s.x, -1.0, &b.samples[0].x));
            }
            b.samples
                .windows(2)
                .map(|w| point_segment_distance(&s.x, &w[0].x, &w[1].x))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff-type distance between the two traced point sets.
pub fn compare_paths(a: &GeodesicPath, b: &GeodesicPath) -> f64 {
    one_sided(a, b).max(one_sided(b, a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub steps: Vec<f64>,
    /// Endpoint differences between successive halvings.
    pub differences: Vec<f64>,
    pub order: f64,
}

/// Observed order from runs with h, h/2 and h/4 over the same horizon.
pub fn convergence_order(ab: &AlphaBetaMetric, p0: &[f64], y0: &[f64], h: f64, steps: usize) -> Result<ConvergenceStudy> {
    let mut ends = Vec::new();
    let mut hs = Vec::new();
    for k in 0..3 {
        let hk = h / f64::from(1u32 << k);
        let path = geodesic(ab, p0, y0, hk, steps << k)?;
        if let Some(f) = &path.failure {
            return Err(GeometryError::Config(format!("convergence run failed: {f}")));
        }
        let last = path.samples.last().expect("path has a start sample");
        ends.push([last.x.clone(), last.v.clone()].concat());
        hs.push(hk);
    }
    let d1 = linalg::norm(&axpy(&ends[0], -1.0, &ends[1]));
    let d2 = linalg::norm(&axpy(&ends[1], -1.0, &ends[2]));
    Ok(ConvergenceStudy { steps: hs, differences: vec![d1, d2], order: (d1 / d2).log2() })
}
