//! Acceptance suite: one printed line per criterion, nonzero exit if any fails.

use std::path::PathBuf;
use std::process::Command as Process;
use std::time::Instant;

use finslerkit_cli::commands::{factor_crosscheck, run, Command};
use finslerkit_cli::scenario::{load_scenario, ScenarioConfig};
use finslerkit_core::douglas::douglas_difference;
use finslerkit_core::sampling::random_unit;
use finslerkit_core::{
    christoffel, compare_paths, convergence_order, douglas_tensor, geodesic, projective_residual,
    shared_douglas_residual, spray_closed, spray_oracle, theorem1_check, theorem2_check, truncate_to_length,
    AlphaBetaMetric, ProbeSet, ProjectiveShift, ProjectiveTolerances, RiemannSpray,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn scenario(name: &str) -> ScenarioConfig {
    load_scenario(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn probes(cfg: &ScenarioConfig, ms: &[&AlphaBetaMetric], points: usize, per: usize, seed: u64) -> ProbeSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ProbeSet::draw(&mut rng, &cfg.domain, ms, points, per).expect("probe draw")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Outcome {
    ok: bool,
    summary: String,
}

fn outcome(ok: bool, summary: String) -> Outcome {
    Outcome { ok, summary }
}

fn factors() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let start = Instant::now();
    let (worst, used) = factor_crosscheck(&mut rng, 1000);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && used >= 1000 && secs < 1.0,
        format!("{used} draws, max relative deviation {worst:.2e} (tol 1e-10), {secs:.2} s (limit 1 s)"),
    )
}

const ORACLE_CORPUS: [&str; 6] = [
    "curved-randers-2d",
    "curved-qab-plus-3d",
    "curved-qab-minus-3d",
    "curved-kropina-3d",
    "curved-generic-4d",
    "theorem1-positive",
];

fn oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (k, name) in ORACLE_CORPUS.iter().enumerate() {
        let cfg = scenario(name);
        let mut metrics = vec![&cfg.f];
        metrics.extend(cfg.fbar.as_ref());
        for ab in metrics {
            let set = probes(&cfg, &[ab], 100, 1, 100 + k as u64);
            for (p, y) in set.pairs() {
                let closed = spray_closed(ab, p, y).expect("closed spray").g;
                let reference = spray_oracle(ab, p, y).expect("oracle spray").g;
                let diff: Vec<f64> = closed.iter().zip(&reference).map(|(a, b)| a - b).collect();
                worst = worst.max(norm(&diff) / (1.0 + norm(&reference)));
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 30.0,
        format!(
            "{} configs, {count} probes, max relative deviation {worst:.2e} (tol 1e-8), {secs:.2} s (limit 30 s)",
            ORACLE_CORPUS.len()
        ),
    )
}

fn max_douglas(cfg: &ScenarioConfig, ab: &AlphaBetaMetric, seed: u64) -> f64 {
    let set = probes(cfg, &[ab], 30, 1, seed);
    set.pairs()
        .map(|(p, y)| finslerkit_core::douglas::douglas_at(ab, p, y).expect("douglas tensor").max_abs())
        .fold(0.0, f64::max)
}

fn douglas_detection() -> Outcome {
    let start = Instant::now();
    // Levi-Civita sprays of the scenario metrics, evaluated directly from the Christoffel symbols
    let mut riemann: f64 = 0.0;
    for name in ["curved-qab-plus-3d", "curved-generic-4d", "theorem1-positive"] {
        let cfg = scenario(name);
        let set = probes(&cfg, &[&cfg.f], 20, 1, 7);
        for (p, y) in set.pairs() {
            let field = RiemannSpray(christoffel(&cfg.f.metric, p).expect("christoffel"));
            riemann = riemann.max(douglas_tensor(&field, y).expect("douglas").max_abs());
        }
    }
    let q0 = scenario("curved-riemannian-3d");
    riemann = riemann.max(max_douglas(&q0, &q0.f, 8));
    let mut parallel: f64 = 0.0;
    for name in ["douglas-positive-qab-plus", "douglas-positive-qab-minus", "theorem2-positive"] {
        let cfg = scenario(name);
        parallel = parallel.max(max_douglas(&cfg, &cfg.f, 9));
    }
    let neg = scenario("douglas-negative-qab-plus");
    let negative = max_douglas(&neg, &neg.f, 10);
    let kr = scenario("douglas-positive-kropina");
    let kropina = max_douglas(&kr, &kr.f, 11);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        riemann <= 1e-10 && parallel <= 1e-10 && negative >= 1e-4 && kropina <= 1e-7 && secs < 30.0,
        format!(
            "Riemannian {riemann:.2e}, parallel beta {parallel:.2e} (tol 1e-10); non-closed q=3 {negative:.2e} (>= 1e-4); \
             Kropina with b = mu df {kropina:.2e} (tol 1e-7); {secs:.2} s (limit 30 s)"
        ),
    )
}

fn projective_invariance() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for name in ["curved-qab-plus-3d", "curved-kropina-3d", "curved-generic-4d", "douglas-negative-qab-plus", "theorem2-ablation"] {
        let cfg = scenario(name);
        let set = probes(&cfg, &[&cfg.f], 10, 1, 13);
        for (p, y) in set.pairs() {
            let theta: Vec<f64> = random_unit(&mut rng, cfg.dimension).iter().map(|t| 3.0 * t).collect();
            let field = cfg.f.closed_at(p).expect("point geometry");
            let d = douglas_tensor(&field, y).expect("douglas");
            let shifted = douglas_tensor(&ProjectiveShift { inner: field, theta }, y).expect("douglas");
            worst = worst.max(d.max_diff(&shifted));
            count += 1;
        }
    }
    outcome(worst <= 1e-8 && count >= 50, format!("{count} probes, max |D(G) - D(G + P y)| {worst:.2e} (tol 1e-8)"))
}

struct RoundTrip {
    fit: f64,
    holds: bool,
    spray: f64,
    paths: f64,
    theta_error: f64,
    negative_fails: bool,
    ratio: f64,
}

/// θ = −t/(1+t²) dt, from Gα − Ḡᾱ for ᾱ = (1+t²)α and the Kropina terms of β̄ = (1+t²) dt.
fn expected_theta(p: &[f64]) -> Vec<f64> {
    vec![-p[0] / (1.0 + p[0] * p[0]), 0.0, 0.0]
}

fn round_trip(theorem: u8, positive: &str, negative: &str) -> RoundTrip {
    let check = |cfg: &ScenarioConfig, seed: u64| {
        let fbar = cfg.fbar.as_ref().expect("paired scenario");
        let cert = probes(cfg, &[&cfg.f, fbar], 20, 1, seed);
        let fit = probes(cfg, &[&cfg.f, fbar], 10, 8, seed + 1);
        let tol = ProjectiveTolerances::default();
        let report = if theorem == 1 {
            theorem1_check(&cfg.f, fbar, &cert, &fit, tol)
        } else {
            theorem2_check(&cfg.f, fbar, &cert, &fit, tol)
        }
        .expect("theorem check");
        (report, fit)
    };
    let cfg = scenario(positive);
    let fbar = cfg.fbar.as_ref().unwrap();
    let (report, fit) = check(&cfg, 20);
    let theta_error = fit
        .points
        .iter()
        .zip(&report.theta_fit)
        .map(|(p, th)| th.iter().zip(expected_theta(p)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);

    let fresh = probes(&cfg, &[&cfg.f, fbar], 50, 1, 21);
    let spray = fresh
        .pairs()
        .map(|(p, y)| {
            let g = spray_closed(&cfg.f, p, y).unwrap().g;
            let gbar = spray_closed(fbar, p, y).unwrap().g;
            projective_residual(&g, &gbar, y).1
        })
        .fold(0.0, f64::max);

    let spec = cfg.geodesic.as_ref().expect("geodesic block");
    let mut paths: f64 = 0.0;
    for ic in &spec.initial {
        let a = geodesic(&cfg.f, &ic.x, &ic.v, spec.h, spec.steps).unwrap();
        let b = geodesic(fbar, &ic.x, &ic.v, spec.h, spec.steps).unwrap();
        assert!(a.failure.is_none() && b.failure.is_none());
        paths = paths.max(compare_paths(&truncate_to_length(&a, spec.length), &truncate_to_length(&b, spec.length)));
    }
    let neg = scenario(negative);
    let (neg_report, _) = check(&neg, 22);
    RoundTrip {
        fit: report.max_residual,
        holds: report.verdict.holds,
        spray,
        paths,
        theta_error,
        negative_fails: !neg_report.verdict.holds,
        ratio: f64::NAN,
    }
}

fn round_trip_outcome(rt: &RoundTrip, secs: f64) -> (bool, String) {
    let ok = rt.holds
        && rt.fit <= 1e-7
        && rt.spray <= 1e-7
        && rt.paths <= 1e-4
        && rt.theta_error <= 1e-8
        && rt.negative_fails
        && secs < 60.0;
    let text = format!(
        "fit {:.2e} (tol 1e-7), theta vs -t/(1+t^2) {:.2e} (tol 1e-8), spray residual on 50 probes {:.2e} (tol 1e-7), \
         5 paths {:.2e} (tol 1e-4), negative instance rejected: {}, {secs:.2} s (limit 60 s)",
        rt.fit, rt.theta_error, rt.spray, rt.paths, rt.negative_fails
    );
    (ok, text)
}

fn theorem1() -> Outcome {
    let start = Instant::now();
    let rt = round_trip(1, "theorem1-positive", "theorem1-negative");
    let (ok, text) = round_trip_outcome(&rt, start.elapsed().as_secs_f64());
    outcome(ok, text)
}

fn theorem2() -> Outcome {
    let start = Instant::now();
    let mut rt = round_trip(2, "theorem2-positive", "theorem2-negative");
    let abl = scenario("theorem2-ablation");
    let fbar = abl.fbar.as_ref().unwrap();
    let cert = probes(&abl, &[&abl.f, fbar], 20, 1, 30);
    let fit = probes(&abl, &[&abl.f, fbar], 10, 8, 31);
    let report = theorem2_check(&abl.f, fbar, &cert, &fit, ProjectiveTolerances::default()).expect("ablation check");
    rt.ratio = report.uncorrected_residual / report.max_residual;
    let (ok, text) = round_trip_outcome(&rt, start.elapsed().as_secs_f64());
    outcome(
        ok && rt.ratio >= 10.0,
        format!("{text}; ablation: residual {:.2e} without correction vs {:.2e} with, ratio {:.1} (>= 10)", report.uncorrected_residual, report.max_residual, rt.ratio),
    )
}

fn shared_douglas() -> Outcome {
    let mut mismatches = 0;
    let mut pairs = 0;
    let mut equal_worst: f64 = 0.0;
    for name in ["flat-trivial", "theorem1-positive", "theorem2-positive", "theorem2-negative", "theorem2-ablation", "douglas-negative-qab-plus"] {
        let cfg = scenario(name);
        let fbar = cfg.fbar.as_ref().unwrap();
        let set = probes(&cfg, &[&cfg.f, fbar], 20, 1, 40);
        let (mut shared, mut diff) = (0.0f64, 0.0f64);
        for (p, y) in set.pairs() {
            shared = shared.max(shared_douglas_residual(&cfg.f, fbar, p, y).unwrap());
            diff = diff.max(douglas_difference(&cfg.f, fbar, p, y).unwrap());
        }
        pairs += 1;
        if (shared <= 1e-8) != (diff <= 1e-8) {
            mismatches += 1;
        }
        if diff <= 1e-8 {
            equal_worst = equal_worst.max(shared);
        }
    }
    let distinct = scenario("douglas-negative-qab-plus");
    let set = probes(&distinct, &[&distinct.f], 20, 1, 41);
    let separated = set
        .pairs()
        .map(|(p, y)| shared_douglas_residual(&distinct.f, distinct.fbar.as_ref().unwrap(), p, y).unwrap())
        .fold(0.0, f64::max);
    outcome(
        mismatches == 0 && separated >= 1e-4,
        format!(
            "{pairs} pairs, {mismatches} disagreements between the two formulations; residual on equal-tensor pairs {equal_worst:.2e} \
             (tol 1e-8); distinct pair {separated:.2e} (>= 1e-4)"
        ),
    )
}

fn geodesics() -> Outcome {
    let mut orders = Vec::new();
    let mut drift: f64 = 0.0;
    for name in ["curved-randers-2d", "curved-qab-plus-3d", "curved-qab-minus-3d", "curved-kropina-3d", "curved-generic-4d"] {
        let cfg = scenario(name);
        let spec = cfg.geodesic.as_ref().unwrap();
        let ic = &spec.initial[0];
        let path = geodesic(&cfg.f, &ic.x, &ic.v, spec.h, 1000).unwrap();
        assert!(path.failure.is_none(), "{name}: {:?}", path.failure);
        drift = drift.max(path.max_norm_drift);
        orders.push(convergence_order(&cfg.f, &ic.x, &ic.v, 0.1, 10).unwrap().order);
    }
    let ok = drift <= 1e-6 && orders.iter().all(|o| (3.7..=4.3).contains(o));
    let shown: Vec<String> = orders.iter().map(|o| format!("{o:.3}")).collect();
    outcome(ok, format!("orders [{}] (in [3.7, 4.3]), max F-drift over 1000 steps {drift:.2e} (tol 1e-6)", shown.join(", ")))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_finslerkit");
    let config = scenario_path("theorem1-positive");
    let once = || {
        Process::new(bin)
            .args(["verify-identities", "--seed", "99", "--config"])
            .arg(&config)
            .output()
            .expect("run finslerkit")
    };
    let (a, b) = (once(), once());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    // the library path must agree with the binary as well
    let cfg = scenario("theorem1-positive");
    let lib = finslerkit_cli::report::to_json(&run(Command::VerifyIdentities, &cfg, 99).unwrap()).unwrap();
    let lib_same = lib.as_bytes() == a.stdout.as_slice();
    outcome(
        same && lib_same && a.status.success(),
        format!("two runs, {} bytes each, identical: {same}; library output identical: {lib_same}", a.stdout.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed-form factors match the generic pipeline", factors),
        ("closed-form spray matches the quarter-Hessian oracle", oracle),
        ("Douglas tensor nullity and detection", douglas_detection),
        ("Douglas tensor is projectively invariant", projective_invariance),
        ("check-theorem1 round trip", theorem1),
        ("check-theorem2 round trip with correction-term ablation", theorem2),
        ("shared-Douglas identity", shared_douglas),
        ("geodesic integrator order and norm drift", geodesics),
        ("verify-identities is byte-stable", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let tag = if o.ok { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {name}: {}", k + 1, o.summary);
        if !o.ok {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
