//! Scenario files: JSON documents describing one or two (α,β)-metrics plus run settings.

use std::path::Path;

use finslerkit_core::phi::RegularityReport;
use finslerkit_core::sampling::b_max;
use finslerkit_core::{AlphaBetaMetric, DomainBox, MetricField, OneFormField, PhiFamily, PolyField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid scenario: `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

pub type PolyTable = Vec<Term>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub oracle: f64,
    pub douglas_accept: f64,
    pub douglas_reject: f64,
    pub projective_fit: f64,
    pub spray_projective: f64,
    pub path_distance: f64,
    pub geodesic_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle: 1e-8,
            douglas_accept: 1e-7,
            douglas_reject: 1e-4,
            projective_fit: 1e-7,
            spray_projective: 1e-7,
            path_distance: 1e-4,
            geodesic_drift: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeCounts {
    /// Points used by Douglas certificates.
    pub certificate_points: usize,
    /// Points used for the θ fit.
    pub fit_points: usize,
    /// Directions per fit point; at least 2n.
    pub fit_directions: usize,
    /// (p, y) pairs for oracle and tensor checks.
    pub samples: usize,
    /// Fresh (p, y) pairs for spray-level projective checks.
    pub spray_probes: usize,
    /// Random (family, s, b²) draws for the factor cross-check.
    pub factor_draws: usize,
}

impl Default for ProbeCounts {
    fn default() -> Self {
        ProbeCounts {
            certificate_points: 20,
            fit_points: 10,
            fit_directions: 8,
            samples: 100,
            spray_probes: 50,
            factor_draws: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub initial: Vec<InitialCondition>,
    pub h: f64,
    pub steps: usize,
    /// Coordinate arc length both paths are cut to before comparison.
    #[serde(default = "unit_length")]
    pub length: f64,
}

fn unit_length() -> f64 {
    1.0
}

/// Expected outcomes, so negative instances count as passing runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub douglas: Option<bool>,
    pub douglas_bar: Option<bool>,
    pub shared_douglas: Option<bool>,
    pub theorem: Option<bool>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub dimension: usize,
    pub metric: Vec<Vec<PolyTable>>,
    pub oneform: Vec<PolyTable>,
    pub family: PhiFamily,
    /// Defaults to `metric` when a second form and family are given.
    #[serde(default)]
    pub metric_bar: Option<Vec<Vec<PolyTable>>>,
    #[serde(default)]
    pub oneform_bar: Option<Vec<PolyTable>>,
    #[serde(default)]
    pub family_bar: Option<PhiFamily>,
    pub domain_box: DomainBox,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub seed: u64,
    #[serde(default)]
    pub probes: ProbeCounts,
    #[serde(default)]
    pub geodesic: Option<GeodesicSpec>,
    #[serde(default)]
    pub expect: Expectations,
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub name: String,
    pub digest: String,
    pub dimension: usize,
    pub f: AlphaBetaMetric,
    pub fbar: Option<AlphaBetaMetric>,
    pub domain: DomainBox,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub probes: ProbeCounts,
    pub geodesic: Option<GeodesicSpec>,
    pub expect: Expectations,
    pub regularity: RegularityReport,
    pub regularity_bar: Option<RegularityReport>,
}

/// Nodes per axis of the grid used for the eager positivity and regularity checks.
const CHECK_GRID: usize = 5;

fn poly(dim: usize, table: &PolyTable, field: &str) -> Result<PolyField, ScenarioError> {
    PolyField::from_terms(dim, table.iter().map(|t| (t.exponents.clone(), t.coeff)))
        .map_err(|e| invalid(field, e.to_string()))
}

fn metric_field(dim: usize, rows: &[Vec<PolyTable>], field: &str) -> Result<MetricField, ScenarioError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(invalid(field, format!("expected a {dim}x{dim} table")));
    }
    let mut comps = Vec::with_capacity(dim * dim);
    for (i, row) in rows.iter().enumerate() {
        for (j, t) in row.iter().enumerate() {
            comps.push(poly(dim, t, &format!("{field}[{i}][{j}]"))?);
        }
    }
    MetricField::new(dim, comps).map_err(|e| invalid(field, e.to_string()))
}

fn oneform_field(dim: usize, rows: &[PolyTable], field: &str) -> Result<OneFormField, ScenarioError> {
    if rows.len() != dim {
        return Err(invalid(field, format!("expected {dim} components")));
    }
    let comps = rows
        .iter()
        .enumerate()
        .map(|(i, t)| poly(dim, t, &format!("{field}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    OneFormField::new(comps).map_err(|e| invalid(field, e.to_string()))
}

fn check_family(family: &PhiFamily, field: &str) -> Result<(), ScenarioError> {
    match family {
        PhiFamily::QabPlus { q } | PhiFamily::QabMinus { q } if !q.is_finite() => {
            Err(invalid(format!("{field}.q"), "q must be finite"))
        }
        PhiFamily::GenericPower { terms } if terms.is_empty() => {
            Err(invalid(format!("{field}.terms"), "at least one term is required"))
        }
        _ => Ok(()),
    }
}

fn build_metric(
    dim: usize,
    metric: &[Vec<PolyTable>],
    oneform: &[PolyTable],
    family: &PhiFamily,
    grid: &[Vec<f64>],
    suffix: &str,
) -> Result<(AlphaBetaMetric, RegularityReport), ScenarioError> {
    let mfield = format!("metric{suffix}");
    let m = metric_field(dim, metric, &mfield)?;
    m.check_positive_definite_on(grid).map_err(|e| invalid(&mfield, e.to_string()))?;
    let b = oneform_field(dim, oneform, &format!("oneform{suffix}"))?;
    check_family(family, &format!("family{suffix}"))?;
    let ab = AlphaBetaMetric::new(m, b, family.clone()).map_err(|e| invalid(format!("family{suffix}"), e.to_string()))?;
    let bm = b_max(&ab, grid).map_err(|e| invalid(&mfield, e.to_string()))?;
    let report = family.regularity_check(bm);
    if !report.ok {
        return Err(invalid(
            format!("family{suffix}"),
            format!(
                "not a regular Finsler metric for b up to {bm:.6}: {} violating s values (worst margin {:.3e})",
                report.violations.len(),
                report.worst_margin
            ),
        ));
    }
    Ok((ab, report))
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let mut message = inner.to_string();
        // serde_json appends its own position, which the variant already carries
        if let Some(cut) = message.rfind(" at line ") {
            message.truncate(cut);
        }
        ScenarioError::Parse { path, line: inner.line(), column: inner.column(), message }
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let bytes = std::fs::read(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    let text = String::from_utf8_lossy(&bytes);
    let file = parse_scenario(&text)?;
    validate(file, digest(&bytes))
}

pub fn validate(file: ScenarioFile, digest: String) -> Result<ScenarioConfig, ScenarioError> {
    let n = file.dimension;
    if n < 2 {
        return Err(invalid("dimension", "must be at least 2"));
    }
    file.domain_box.validate().map_err(|e| invalid("domain_box", e.to_string()))?;
    if file.domain_box.dim() != n {
        return Err(invalid("domain_box", format!("expected {n} axes")));
    }
    let t = &file.tolerances;
    for (name, v) in [
        ("oracle", t.oracle),
        ("douglas_accept", t.douglas_accept),
        ("douglas_reject", t.douglas_reject),
        ("projective_fit", t.projective_fit),
        ("spray_projective", t.spray_projective),
        ("path_distance", t.path_distance),
        ("geodesic_drift", t.geodesic_drift),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("tolerances.{name}"), "must be positive"));
        }
    }
    if t.douglas_accept >= t.douglas_reject {
        return Err(invalid("tolerances.douglas_accept", "must be below douglas_reject"));
    }
    let p = &file.probes;
    if p.certificate_points < 20 {
        return Err(invalid("probes.certificate_points", "must be at least 20"));
    }
    if p.fit_directions < 2 * n {
        return Err(invalid("probes.fit_directions", format!("must be at least 2n = {}", 2 * n)));
    }
    if p.fit_points == 0 || p.samples == 0 || p.spray_probes == 0 {
        return Err(invalid("probes", "counts must be positive"));
    }
    if let Some(g) = &file.geodesic {
        if !(g.h > 0.0) || g.steps == 0 || !(g.length > 0.0) {
            return Err(invalid("geodesic", "h, steps and length must be positive"));
        }
        for (k, ic) in g.initial.iter().enumerate() {
            if ic.x.len() != n || ic.v.len() != n {
                return Err(invalid(format!("geodesic.initial[{k}]"), format!("x and v need {n} entries")));
            }
        }
    }

    let grid = file.domain_box.grid(CHECK_GRID);
    let (f, regularity) = build_metric(n, &file.metric, &file.oneform, &file.family, &grid, "")?;
    let (fbar, regularity_bar) = match (&file.oneform_bar, &file.family_bar) {
        (Some(b), Some(fam)) => {
            let m = file.metric_bar.as_ref().unwrap_or(&file.metric);
            let (ab, r) = build_metric(n, m, b, fam, &grid, "_bar")?;
            (Some(ab), Some(r))
        }
        (None, None) if file.metric_bar.is_none() => (None, None),
        _ => return Err(invalid("family_bar", "oneform_bar and family_bar must be given together")),
    };
    Ok(ScenarioConfig {
        name: file.name,
        digest,
        dimension: n,
        f,
        fbar,
        domain: file.domain_box,
        tolerances: file.tolerances,
        seed: file.seed,
        probes: file.probes,
        geodesic: file.geodesic,
        expect: file.expect,
        regularity,
        regularity_bar,
    })
}
