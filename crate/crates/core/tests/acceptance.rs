//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p peregrine-core --test acceptance`.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use peregrine_core::bathymetry::{q_positivity_factor, q_to_zeta, zeta_to_q, Bathymetry, Profile};
use peregrine_core::diagnostics::DiagnosticsOptions;
use peregrine_core::models::{Model, ModelKind, ModelParams, ModelState};
use peregrine_core::scenarios::{run_scenario, ExperimentConfig, RunOptions, ScenarioKind, Summary};
use peregrine_core::spectral::{lambda_s, Field, Grid, VecField};
use peregrine_core::timeloop::{run, StepperConfig, Termination};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn catalog(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../catalog").join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn scenario(name: &str) -> (Summary, f64) {
    let start = Instant::now();
    let summary = run_scenario(&catalog(name), &RunOptions::default()).expect("scenario runs");
    (summary, start.elapsed().as_secs_f64())
}

fn failures(summary: &Summary) -> Vec<String> {
    summary
        .verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| format!("{} ({})", v.name, v.detail))
        .collect()
}

/// Scenario verdicts plus a wall-clock budget.
fn scenario_criterion(name: &str, budget: f64, describe: impl Fn(&Summary) -> String) -> Outcome {
    let (summary, secs) = scenario(name);
    let mut bad = failures(&summary);
    if secs > budget {
        bad.push(format!("runtime {secs:.1}s exceeds {budget}s"));
    }
    Outcome {
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{}; {secs:.1}s", describe(&summary))
        } else {
            bad.join("; ")
        },
    }
}

fn max_value(summary: &Summary, prefix: &str) -> f64 {
    summary
        .verdicts
        .iter()
        .filter(|v| v.name.starts_with(prefix))
        .filter_map(|v| v.value)
        .fold(0.0, f64::max)
}

fn dispersion() -> Outcome {
    scenario_criterion("dispersion", 10.0, |s| {
        format!("max rel err {:.2e} over 9 modes", max_value(s, "dispersion["))
    })
}

fn operator_audit() -> Outcome {
    scenario_criterion("operator-audit", 30.0, |s| {
        let min_q = s
            .verdicts
            .iter()
            .filter(|v| v.name.starts_with("coercivity["))
            .filter_map(|v| v.value)
            .fold(f64::INFINITY, f64::min);
        format!(
            "symmetry {:.1e}, inverse {:.1e}, dense {:.1e}, min quotient {min_q:.3e}",
            max_value(s, "symmetry["),
            max_value(s, "inverse["),
            max_value(s, "dense_agreement[")
        )
    })
}

/// `Q = int_0^1 dt / (h + t a)` by Gauss-Legendre quadrature.
fn quadrature_q(h: f64, a: f64, nodes: &[(f64, f64)]) -> f64 {
    nodes.iter().map(|&(x, w)| 0.5 * w / (h + 0.5 * (x + 1.0) * a)).sum()
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn q_transform() -> Outcome {
    let grid = Grid::line(64, 20.0).unwrap();
    let bath = Bathymetry::build(
        &Profile::GaussianBump {
            center: None,
            width: 3.0,
            height: 1.0,
        },
        0.5,
        &grid,
    )
    .unwrap();
    let nodes = gauss_legendre(48);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut round, mut identity, mut oracle, mut q_min) = (0.0_f64, 0.0_f64, 0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let eps = rng.gen_range(0.01..1.0);
        let raw = Field::from_vec(&grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let shape = lambda_s(&raw, -2.0);
        // admissible: eps zeta / h_b stays above -0.8
        let scale = 0.8 * bath.h_min() / (eps * shape.max_abs());
        let zeta = shape.scale(scale * rng.gen_range(0.1..1.0));
        let q = zeta_to_q(&zeta, eps, &bath).unwrap();
        let back = q_to_zeta(&q, eps, &bath);
        round = round.max((&back - &zeta).max_abs() / zeta.max_abs());
        let q2 = zeta_to_q(&q_to_zeta(&q, eps, &bath), eps, &bath).unwrap();
        round = round.max((&q2 - &q).max_abs() / q.max_abs());
        let factor = q_positivity_factor(&zeta, eps, &bath).unwrap();
        identity = identity.max((&factor.mul(&zeta) - &q).max_abs() / q.max_abs());
        q_min = q_min.min(factor.min());
        for i in 0..grid.len() {
            let expected = quadrature_q(bath.depth().values()[i], eps * zeta.values()[i], &nodes);
            oracle = oracle.max((factor.values()[i] - expected).abs() / expected);
        }
    }
    Outcome {
        passed: round <= 1e-12 && identity <= 1e-12 && q_min > 0.0 && oracle <= 1e-12,
        detail: format!("round trip {round:.1e}, q = Q zeta {identity:.1e}, Q vs quadrature {oracle:.1e}, min Q {q_min:.3}"),
    }
}

fn consistency() -> Outcome {
    scenario_criterion("consistency", 60.0, |s| {
        format!(
            "order BP-SW {:.3}, order BP-MBP {:.3}",
            s.orders["order_bp_sw"], s.orders["order_bp_mbp"]
        )
    })
}

fn longtime() -> Outcome {
    scenario_criterion("longtime", 120.0, |s| {
        let contrast = s
            .runs
            .iter()
            .find(|r| r.label.starts_with("contrast"))
            .map(|r| {
                format!(
                    "contrast {}, growth {:.3}",
                    r.termination.map_or("not run".to_string(), |t| format!("{t:?}")),
                    r.metrics.get("en_growth").copied().unwrap_or(f64::NAN)
                )
            })
            .unwrap_or_default();
        format!("max E3 growth {:.3}; {contrast}", max_value(s, "longtime["))
    })
}

fn burgers() -> Outcome {
    scenario_criterion("burgers", f64::INFINITY, |s| {
        format!(
            "max rel err {:.3}, slope {:.4}",
            max_value(s, "shock_time["),
            s.orders["shock_time_slope"]
        )
    })
}

fn energy_conservation() -> Outcome {
    let grid = Grid::line(64, 2.0 * PI).unwrap();
    let flat = Bathymetry::flat(&grid);
    let mu = 0.1;
    let model = Model::new(ModelParams::new(ModelKind::BoussinesqPeregrine, 0.0, mu), &flat).unwrap();
    let initial = ModelState::new(
        Field::from_fn(&grid, |x, _| 0.1 * x.cos() + 0.05 * (2.0 * x).sin()),
        Some(VecField::zeros(&grid)),
    );
    let period = 2.0 * PI * (1.0 + mu / 3.0_f64).sqrt();
    let cfg = StepperConfig {
        output_stride: 100,
        ..StepperConfig::new(1e-3, 10.0 * period)
    };
    let traj = run(&model, &initial, &cfg, &DiagnosticsOptions::default()).unwrap();
    let e0 = traj.records[0].e_bp;
    let drift = traj
        .records
        .iter()
        .map(|r| (r.e_bp - e0).abs() / e0)
        .fold(0.0, f64::max);
    Outcome {
        passed: traj.termination == Termination::Completed && drift <= 1e-8,
        detail: format!("max relative drift {drift:.2e} over {} steps", traj.steps),
    }
}

fn mollifier() -> Outcome {
    scenario_criterion("mollifier-study", f64::INFINITY, |s| {
        let table = &s.tables["mollifier"];
        table
            .rows
            .iter()
            .map(|r| format!("delta {}: {:.2e}", r[0], r[1]))
            .collect::<Vec<_>>()
            .join(", ")
    })
}

fn determinism() -> Outcome {
    let mut bad = Vec::new();
    for kind in ScenarioKind::ALL {
        let cfg = catalog(kind.name());
        let a = run_scenario(&cfg, &RunOptions { out_dir: None, jobs: 2 }).unwrap();
        let b = run_scenario(&cfg, &RunOptions { out_dir: None, jobs: 1 }).unwrap();
        if a.deterministic_json() != b.deterministic_json() {
            bad.push(kind.name());
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "6 scenarios reproduce their summaries".into()
        } else {
            format!("differs: {}", bad.join(", "))
        },
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 dispersion", dispersion),
        ("2 operator audit", operator_audit),
        ("3 q-transform", q_transform),
        ("4 model consistency", consistency),
        ("5 long-time boundedness", longtime),
        ("6 Burgers shock time", burgers),
        ("7 energy conservation", energy_conservation),
        ("8 mollifier limit", mollifier),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = check();
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({})",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    if failed == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
