//! Seeded probe generation over a coordinate box and the admissible cones.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::spray::AlphaBetaMetric;

/// Redraws allowed per admissible direction before giving up.
pub const MAX_REDRAWS: usize = 10_000;

/// Room kept from the boundary of the conic domain, measured in s.
pub const S_MARGIN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = DomainBox { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        DomainBox { lo: vec![-half; dim], hi: vec![half; dim] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(GeometryError::Config("domain box bounds must have equal, nonzero length".into()));
        }
        for (k, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(GeometryError::Config(format!("domain box axis {k} is empty: [{l}, {h}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }

    /// Tensor grid with `per_axis` nodes on every axis, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let m = per_axis.max(2);
        let n = self.dim();
        let total = m.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                (0..n)
                    .map(|k| {
                        let t = (idx % m) as f64 / (m - 1) as f64;
                        idx /= m;
                        self.lo[k] + (self.hi[k] - self.lo[k]) * t
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A unit direction admissible for every listed metric at `p`.
pub fn admissible_direction<R: Rng>(
    rng: &mut R,
    metrics: &[&AlphaBetaMetric],
    p: &[f64],
) -> Result<Vec<f64>> {
    for _ in 0..MAX_REDRAWS {
        let y = random_unit(rng, p.len());
        if metrics.iter().all(|m| m.admissible_with_margin(p, &y, S_MARGIN)) {
            return Ok(y);
        }
    }
    Err(GeometryError::Config(format!(
        "no admissible direction found at x = {p:?} after {MAX_REDRAWS} draws"
    )))
}

/// Sample points with a fixed number of admissible directions at each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub points: Vec<Vec<f64>>,
    pub directions: Vec<Vec<Vec<f64>>>,
}

impl ProbeSet {
    pub fn draw<R: Rng>(
        rng: &mut R,
        domain: &DomainBox,
        metrics: &[&AlphaBetaMetric],
        points: usize,
        per_point: usize,
    ) -> Result<Self> {
        let mut pts = Vec::with_capacity(points);
        let mut dirs = Vec::with_capacity(points);
        for _ in 0..points {
            let p = domain.sample(rng);
            let ys = (0..per_point)
                .map(|_| admissible_direction(rng, metrics, &p))
                .collect::<Result<Vec<_>>>()?;
            pts.push(p);
            dirs.push(ys);
        }
        Ok(ProbeSet { points: pts, directions: dirs })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.points
            .iter()
            .zip(&self.directions)
            .flat_map(|(p, ys)| ys.iter().map(move |y| (p.as_slice(), y.as_slice())))
    }

    pub fn len(&self) -> usize {
        self.directions.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Largest ‖β‖_α over the listed points.
pub fn b_max(ab: &AlphaBetaMetric, points: &[Vec<f64>]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for p in points {
        m = m.max(ab.point(p)?.bsq.sqrt());
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{MetricField, OneFormField};
    use crate::phi::PhiFamily;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_covers_corners() {
        let b = DomainBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let g = b.grid(3);
        assert_eq!(g.len(), 9);
        assert!(g.contains(&vec![1.0, 1.0]) && g.contains(&vec![0.0, -1.0]));
    }

    #[test]
    fn empty_axis_is_rejected() {
        assert!(DomainBox::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn kropina_directions_stay_in_cone() {
        let ab = AlphaBetaMetric::new(MetricField::euclidean(3), OneFormField::constant(&[1.0, 0.0, 0.0]), PhiFamily::Kropina).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let set = ProbeSet::draw(&mut rng, &DomainBox::cube(3, 1.0), &[&ab], 5, 4).unwrap();
        assert_eq!(set.len(), 20);
        assert!(set.pairs().all(|(_, y)| y[0] > S_MARGIN));
    }

    #[test]
    fn impossible_cone_is_a_config_error() {
        // |β| ≤ α everywhere here, so the QabMinus cone β > α is empty
        let ab = AlphaBetaMetric::new(MetricField::euclidean(2), OneFormField::constant(&[0.5, 0.0]), PhiFamily::QabMinus { q: 2.0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(admissible_direction(&mut rng, &[&ab], &[0.0, 0.0]), Err(GeometryError::Config(_))));
    }
}
