//! The φ-families and the factors Q, Δ, Θ, Ψ derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};
use crate::jet::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coeff: f64,
    pub exponent: i32,
}

/// φ(s) for F = αφ(β/α).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiFamily {
    /// φ = (1+s)^q
    QabPlus { q: f64 },
    /// φ = s^q / (s−1)^(q−1), used where β > α
    QabMinus { q: f64 },
    /// φ = 1/s, used where β > 0
    Kropina,
    /// φ = Σ c_k s^(e_k)
    GenericPower { terms: Vec<PowerTerm> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiJet {
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
    pub d3phi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryFactors {
    pub q: f64,
    pub dq: f64,
    pub d2q: f64,
    pub delta: f64,
    pub theta: f64,
    pub psi: f64,
}

/// Factors evaluated on any scalar, including the s-derivative of Ψ.
#[derive(Clone, Debug)]
pub struct Factors<S> {
    pub q: S,
    pub dq: S,
    pub d2q: S,
    pub delta: S,
    pub theta: S,
    pub psi: S,
    pub dpsi: S,
}

/// x(x−1)…(x−k+1)
fn falling(x: f64, k: usize) -> f64 {
    (0..k).map(|j| x - j as f64).product()
}

impl PhiFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PhiFamily::QabPlus { .. } => "qab_plus",
            PhiFamily::QabMinus { .. } => "qab_minus",
            PhiFamily::Kropina => "kropina",
            PhiFamily::GenericPower { .. } => "generic_power",
        }
    }

    pub fn q(&self) -> Option<f64> {
        match self {
            PhiFamily::QabPlus { q } | PhiFamily::QabMinus { q } => Some(*q),
            _ => None,
        }
    }

    /// Whether `s` lies in the open set where φ is evaluated.
    pub fn admits(&self, s: f64) -> bool {
        if !s.is_finite() {
            return false;
        }
        match self {
            // integer powers extend past s = −1
            PhiFamily::QabPlus { q } => s > -1.0 || q.fract() == 0.0,
            PhiFamily::QabMinus { .. } => s > 1.0,
            PhiFamily::Kropina => s > 0.0,
            PhiFamily::GenericPower { terms } => s != 0.0 || terms.iter().all(|t| t.exponent >= 0),
        }
    }

    fn check(&self, s: f64) -> Result<()> {
        if self.admits(s) {
            Ok(())
        } else {
            Err(GeometryError::SingularS { s })
        }
    }

    /// φ, φ', φ'', φ''' at `s`.
    pub fn derivs<S: Scalar>(&self, s: &S) -> Result<[S; 4]> {
        self.check(s.re())?;
        Ok(match self {
            PhiFamily::QabPlus { q } => {
                let u = s.clone() + 1.0;
                let base = u.powf(q - 3.0);
                let u2 = u.clone() * u.clone();
                [
                    base.clone() * u2.clone() * u.clone(),
                    base.clone() * u2 * *q,
                    base.clone() * u * (q * (q - 1.0)),
                    base * falling(*q, 3),
                ]
            }
            PhiFamily::Kropina => {
                let inv = s.recip();
                let inv2 = inv.clone() * inv.clone();
                [
                    inv.clone(),
                    -inv2.clone(),
                    inv2.clone() * inv.clone() * 2.0,
                    inv2.clone() * inv2 * -6.0,
                ]
            }
            PhiFamily::QabMinus { q } => {
                // Leibniz on s^q · (s−1)^(1−q)
                let p = 1.0 - q;
                let sm = s.clone() - 1.0;
                let f: Vec<S> = (0..4).map(|k| s.powf(q - k as f64) * falling(*q, k)).collect();
                let g: Vec<S> = (0..4).map(|k| sm.powf(p - k as f64) * falling(p, k)).collect();
                let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
                let d = |n: usize| {
                    (0..=n).fold(S::cst(0.0), |acc, k| {
                        acc + f[k].clone() * g[n - k].clone() * binom[n][k]
                    })
                };
                [d(0), d(1), d(2), d(3)]
            }
            PhiFamily::GenericPower { terms } => {
                let d = |k: usize| {
                    terms.iter().fold(S::cst(0.0), |acc, t| {
                        let c = t.coeff * falling(t.exponent as f64, k);
                        if c == 0.0 {
                            acc
                        } else {
                            acc + s.powi(t.exponent - k as i32) * c
                        }
                    })
                };
                [d(0), d(1), d(2), d(3)]
            }
        })
    }

    pub fn phi<S: Scalar>(&self, s: &S) -> Result<S> {
        Ok(self.derivs(s)?[0].clone())
    }

    pub fn phi_jet(&self, s: f64) -> Result<PhiJet> {
        let [phi, dphi, d2phi, d3phi] = self.derivs(&s)?;
        Ok(PhiJet { phi, dphi, d2phi, d3phi })
    }

    /// Q, Q', Q'' from the generic definitions.
    pub fn q_generic<S: Scalar>(&self, s: &S) -> Result<[S; 3]> {
        let [p0, p1, p2, p3] = self.derivs(s)?;
        let den = p0.clone() - s.clone() * p1.clone();
        let scale = p0.re().abs() + (s.re() * p1.re()).abs();
        if den.re().abs() <= 1e-14 * scale || den.re() == 0.0 {
            return Err(GeometryError::DegenerateDirection { s: s.re() });
        }
        let inv = den.recip();
        let inv2 = inv.clone() * inv.clone();
        let q = p1.clone() * inv.clone();
        let dq = p0.clone() * p2.clone() * inv2.clone();
        let d2q = (p1 * p2.clone() + p0.clone() * p3) * inv2.clone()
            + s.clone() * p0 * p2.clone() * p2 * inv2 * inv * 2.0;
        Ok([q, dq, d2q])
    }

    pub fn q_jet(&self, s: f64) -> Result<(f64, f64, f64)> {
        let [q, dq, d2q] = self.q_generic(&s)?;
        Ok((q, dq, d2q))
    }

    pub fn factors<S: Scalar>(&self, s: &S, bsq: f64) -> Result<Factors<S>> {
        let [q, dq, d2q] = self.q_generic(s)?;
        let gap = S::cst(bsq) - s.clone() * s.clone();
        let delta = s.clone() * q.clone() + gap.clone() * dq.clone() + 1.0;
        if delta.re() == 0.0 || !delta.re().is_finite() {
            return Err(GeometryError::SingularDelta { s: s.re(), bsq });
        }
        let inv = delta.recip();
        let theta = (q.clone() - s.clone() * dq.clone()) * inv.clone() * 0.5;
        let psi = dq.clone() * inv.clone() * 0.5;
        let ddelta = q.clone() - s.clone() * dq.clone() + gap * d2q.clone();
        let dpsi = d2q.clone() * inv.clone() * 0.5 - dq.clone() * ddelta * inv.clone() * inv * 0.5;
        Ok(Factors { q, dq, d2q, delta, theta, psi, dpsi })
    }

    pub fn geometry_factors(&self, s: f64, bsq: f64) -> Result<GeometryFactors> {
        let f = self.factors(&s, bsq)?;
        Ok(GeometryFactors {
            q: f.q,
            dq: f.dq,
            d2q: f.d2q,
            delta: f.delta,
            theta: f.theta,
            psi: f.psi,
        })
    }

    /// s-derivative of Ψ at fixed b².
    pub fn psi_prime(&self, s: f64, bsq: f64) -> Result<f64> {
        Ok(self.factors(&s, bsq)?.dpsi)
    }

    /// The family-specific closed forms, independent of the generic pipeline.
    pub fn closed_form_factors(&self, s: f64, bsq: f64) -> Result<GeometryFactors> {
        self.check(s)?;
        let out = match *self {
            PhiFamily::QabPlus { q } => {
                let u = 1.0 + (1.0 - q) * s;
                if u == 0.0 {
                    return Err(GeometryError::DegenerateDirection { s });
                }
                let d = s * s * (1.0 - q * q) + s * (2.0 - q) + 1.0 + bsq * q * (q - 1.0);
                if d == 0.0 {
                    return Err(GeometryError::SingularDelta { s, bsq });
                }
                GeometryFactors {
                    q: q / u,
                    dq: q * (q - 1.0) / (u * u),
                    d2q: 2.0 * q * (q - 1.0).powi(2) / (u * u * u),
                    delta: d / (u * u),
                    theta: 0.5 * q * (1.0 - 2.0 * (q - 1.0) * s) / d,
                    psi: 0.5 * q * (q - 1.0) / d,
                }
            }
            PhiFamily::QabMinus { q } => {
                let e = s * s * (s - 1.0) + q * (bsq - s * s);
                if e == 0.0 {
                    return Err(GeometryError::SingularDelta { s, bsq });
                }
                GeometryFactors {
                    q: (s - q) / ((q - 1.0) * s),
                    dq: q / ((q - 1.0) * s * s),
                    d2q: -2.0 * q / ((q - 1.0) * s * s * s),
                    delta: e / ((q - 1.0) * s * s),
                    theta: s * (s - 2.0 * q) / (2.0 * e),
                    psi: q / (2.0 * e),
                }
            }
            PhiFamily::Kropina => {
                if bsq == 0.0 {
                    return Err(GeometryError::SingularDelta { s, bsq });
                }
                GeometryFactors {
                    q: -1.0 / (2.0 * s),
                    dq: 1.0 / (2.0 * s * s),
                    d2q: -1.0 / (s * s * s),
                    delta: bsq / (2.0 * s * s),
                    theta: -s / bsq,
                    psi: 1.0 / (2.0 * bsq),
                }
            }
            PhiFamily::GenericPower { .. } => {
                return Err(GeometryError::UnsupportedFamily(
                    "generic_power has no closed-form factors".into(),
                ))
            }
        };
        Ok(out)
    }

    /// Grid of `count` admissible s values with |s| ≤ b_max.
    pub fn s_grid(&self, b_max: f64, count: usize) -> Vec<f64> {
        let (lo, hi, open_lo) = match self {
            PhiFamily::QabPlus { .. } => (-b_max, b_max, false),
            PhiFamily::QabMinus { .. } => (1.0, b_max, true),
            PhiFamily::Kropina => (0.0, b_max, true),
            PhiFamily::GenericPower { .. } => (-b_max, b_max, false),
        };
        if hi <= lo {
            return Vec::new();
        }
        let steps = count.max(2);
        (0..steps)
            .map(|k| {
                if open_lo {
                    lo + (hi - lo) * (k + 1) as f64 / steps as f64
                } else {
                    lo + (hi - lo) * k as f64 / (steps - 1) as f64
                }
            })
            .filter(|&s| self.admits(s))
            .collect()
    }

    /// Scans φ > 0, φ − sφ' > 0 and Δ > 0 (at b² = b_max²) over a dense s grid.
    pub fn regularity_check(&self, b_max: f64) -> RegularityReport {
        self.regularity_check_with(b_max, 2001)
    }

    pub fn regularity_check_with(&self, b_max: f64, points: usize) -> RegularityReport {
        let grid = self.s_grid(b_max, points.max(1000));
        let bsq = b_max * b_max;
        let mut violations = Vec::new();
        let mut worst = f64::INFINITY;
        for &s in &grid {
            let margin = match self.phi_jet(s) {
                Ok(j) => {
                    let m1 = j.phi;
                    let m2 = j.phi - s * j.dphi;
                    let m3 = self
                        .geometry_factors(s, bsq)
                        .map(|f| f.delta)
                        .unwrap_or(f64::NEG_INFINITY);
                    m1.min(m2).min(m3)
                }
                Err(_) => f64::NEG_INFINITY,
            };
            if !(margin > 0.0) {
                violations.push(s);
            }
            worst = worst.min(margin);
        }
        RegularityReport {
            ok: violations.is_empty() && !grid.is_empty(),
            samples: grid.len(),
            violations,
            worst_margin: worst,
        }
    }

    /// Whether Q(s)/s takes distinct values on three admissible probes.
    pub fn q_over_s_varies(&self) -> bool {
        let probes: Vec<f64> = match self {
            PhiFamily::QabMinus { .. } => vec![1.2, 1.5, 1.9],
            PhiFamily::Kropina => vec![0.2, 0.5, 0.9],
            _ => vec![-0.4, 0.3, 0.6],
        };
        let vals: Vec<f64> = probes
            .iter()
            .filter_map(|&s| self.q_jet(s).ok().map(|(q, _, _)| q / s))
            .collect();
        vals.len() == 3 && vals.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-12 * (1.0 + w[0].abs()))
    }

    /// Whether Q itself is constant in s on three probes (Randers case).
    pub fn q_is_constant(&self) -> bool {
        let vals: Vec<f64> = [-0.4, 0.3, 0.6]
            .iter()
            .filter_map(|&s| self.q_jet(s).ok().map(|t| t.0))
            .collect();
        vals.len() == 3 && vals.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-14)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub ok: bool,
    pub samples: usize,
    pub violations: Vec<f64>,
    pub worst_margin: f64,
}
