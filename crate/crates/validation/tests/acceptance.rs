//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs the `locobs` binary where the criterion is about the
//! command-line pipeline and the library otherwise.
//!
//! Kept in its own package so that `cargo test --workspace` runs every other
//! suite before it.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use locobs_cli::casestudy;
use locobs_cli::scenario::{state_from, Scenario, StateDecl};
use locobs_core::dynamics::DiscretizedSystem;
use locobs_core::linalg::{trace_distance, von_neumann_entropy, CMat, C64};
use locobs_core::observability::analyze;
use locobs_core::operator::{pauli_i, pauli_x, pauli_z};
use locobs_core::reconstruction::{max_entropy_solve, MaxEntOptions};
use locobs_core::{
    aliasing_check, build_generator, continuous_observability_span, exact_means, exact_outputs, gramian_reconstruct,
    run_experiment, ConstraintSet, LindbladSpec, MeasurementPlan, NeighborhoodStructure, Operator, OutputMap,
};
use serde_json::Value;

const CASE1_RANK: usize = 251;
const CASE1_NULL_DIM: usize = 5;
const ANGLE_TOL: f64 = 1e-6;
const CASE1_RUNTIME: Duration = Duration::from_secs(60);
const TRIALS: usize = 30;
const MIN_OBSERVABLE: usize = 29;
const CASE1_RANDOM_MEAN: f64 = 15.0;
const CASE1_RANDOM_SPREAD: f64 = 2.0;
const CASE2_K_STAR: usize = 14;
const CASE3_MEDIAN: f64 = 29.0;
const CASE3_SPREAD: f64 = 4.0;
const CASE3_LOWER_BOUND: usize = 16;
const ORACLE_STATES: usize = 50;
const ORACLE_TOL: f64 = 1e-8;
const ORACLE_RUNTIME: Duration = Duration::from_secs(300);
const MAXENT_TOL: f64 = 1e-6;
const SHOTS: [u64; 4] = [100, 1_000, 10_000, 100_000];
const SHOT_SEEDS: u64 = 20;
const SLOPE: f64 = -0.5;
const SLOPE_TOL: f64 = 0.08;
const WITNESS_EPS: f64 = 1e-2;
const WITNESS_HORIZON: usize = 30;
const WITNESS_TOL: f64 = 1e-9;
const CPTP_TOL: f64 = 1e-9;

struct Run {
    code: i32,
    json: Value,
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/scenarios").join(format!("{name}.toml"))
}

/// The `locobs` binary next to this test's profile directory, built on demand.
fn binary() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let bin = profile_dir.join(format!("locobs{}", std::env::consts::EXE_SUFFIX));
    if !bin.exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let mut cmd = Command::new(cargo);
        cmd.args(["build", "-p", "locobs-cli", "--bin", "locobs"]);
        if profile_dir.file_name().is_some_and(|n| n == "release") {
            cmd.arg("--release");
        }
        assert!(cmd.status().expect("run cargo build").success(), "building locobs failed");
    }
    bin
}

fn locobs(args: &[&str], out: &Path, json_name: &str) -> Run {
    let status = Command::new(binary())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run locobs");
    let text = std::fs::read_to_string(out.join(json_name)).unwrap_or_else(|_| {
        panic!("{json_name} missing; stderr: {}", String::from_utf8_lossy(&status.stderr))
    });
    Run { code: status.status.code().unwrap_or(-1), json: serde_json::from_str(&text).unwrap() }
}

fn bundled(name: &str) -> Scenario {
    casestudy::scenario(name).unwrap()
}

fn fixed_system(name: &str) -> DiscretizedSystem {
    let sc = bundled(name);
    sc.system(&[], sc.output_map(false).unwrap()).unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn observable_k_stars(sweep: &Value) -> Vec<usize> {
    sweep["draws"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|d| d["observable"].as_bool().unwrap())
        .map(|d| d["k_star"].as_u64().unwrap() as usize)
        .collect()
}

fn criterion_1(out: &Path) -> Verdict {
    let start = Instant::now();
    let cfg = scenario_path("case1");
    let analyzed = locobs(&["analyze", "--config", cfg.to_str().unwrap()], out, "case1.analyze.json");
    let study = locobs(&["casestudy", "case1"], out, "casestudy.case1.json");
    let elapsed = start.elapsed();
    let rank = analyzed.json["report"]["rank"].as_u64().unwrap() as usize;
    let null = analyzed.json["report"]["unobservable_dimension"].as_u64().unwrap() as usize;
    let angles: Vec<f64> =
        study.json["principal_angles"].as_array().unwrap().iter().map(|a| a.as_f64().unwrap()).collect();
    let max_angle = angles.iter().copied().fold(0.0, f64::max);
    verdict(
        analyzed.code == 2
            && rank == CASE1_RANK
            && null == CASE1_NULL_DIM
            && angles.len() == CASE1_NULL_DIM
            && max_angle < ANGLE_TOL
            && elapsed < CASE1_RUNTIME,
        format!(
            "exit {} rank {rank} null dim {null} max principal angle {max_angle:.3e} rad ({:.1}s)",
            analyzed.code,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2(run: &Run) -> Verdict {
    let sweep = &run.json["randomization"];
    let ks = observable_k_stars(sweep);
    let mean = ks.iter().sum::<usize>() as f64 / ks.len().max(1) as f64;
    verdict(
        sweep["trials"].as_u64() == Some(TRIALS as u64)
            && ks.len() >= MIN_OBSERVABLE
            && (mean - CASE1_RANDOM_MEAN).abs() <= CASE1_RANDOM_SPREAD,
        format!("{}/{TRIALS} observable, mean k* {mean:.2} (target {CASE1_RANDOM_MEAN} ± {CASE1_RANDOM_SPREAD})", ks.len()),
    )
}

fn criterion_3(run: &Run) -> Verdict {
    let r = &run.json["report"];
    let observable = r["observable"].as_bool().unwrap();
    let k = r["k_star"].as_u64().unwrap() as usize;
    verdict(
        run.code == 0 && observable && k == CASE2_K_STAR,
        format!("exit {} observable {observable}, k* {k} (target {CASE2_K_STAR})", run.code),
    )
}

fn median(v: &[usize]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2] as f64
    } else {
        (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0
    }
}

fn criterion_4(run: &Run) -> Verdict {
    let ks = observable_k_stars(&run.json["randomization"]);
    let med = median(&ks);
    verdict(
        ks.len() >= MIN_OBSERVABLE && (med - CASE3_MEDIAN).abs() <= CASE3_SPREAD,
        format!("{}/{TRIALS} observable, median k* {med} (target {CASE3_MEDIAN} ± {CASE3_SPREAD})", ks.len()),
    )
}

fn criterion_5(case1_random: &Run, case2: &Run, case3: &Run) -> Verdict {
    let d2 = 256usize;
    let mut worst = Vec::new();
    let mut ok = true;
    for (name, run) in [("case1-random", case1_random), ("case3", case3)] {
        let sweep = &run.json["randomization"];
        let lb = sweep["k_star_lower_bound"].as_u64().unwrap() as usize;
        let ks = observable_k_stars(sweep);
        let min = ks.iter().copied().min().unwrap_or(0);
        ok &= !ks.is_empty() && min >= lb;
        worst.push(format!("{name} min k* {min} ≥ {lb}"));
    }
    let r = &case2.json["report"];
    let (k, lb, m) = (r["k_star"].as_u64().unwrap(), r["k_lower_bound"].as_u64().unwrap(), r["observables"].as_u64().unwrap());
    ok &= k >= lb && lb == (d2 as u64).div_ceil(m);
    worst.push(format!("case2 k* {k} ≥ {lb}"));
    let case3_lb = case3.json["randomization"]["k_star_lower_bound"].as_u64().unwrap() as usize;
    ok &= case3_lb == CASE3_LOWER_BOUND;
    verdict(ok, worst.join(", "))
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let sys = fixed_system("case2");
    let k = analyze(&sys).unwrap().k_star - 1;
    let mut worst: f64 = 0.0;
    for s in 0..ORACLE_STATES {
        let rank = 1 + s % 16;
        let rho0 = state_from(&StateDecl::Random { rank }, sys.dims(), 1000 + s as u64, "state").unwrap();
        let outputs = exact_outputs(&sys, &rho0, k).unwrap();
        let est = gramian_reconstruct(&sys, &outputs).unwrap();
        worst = worst.max(trace_distance(est.rho0_hat.matrix(), rho0.matrix()));
    }
    let elapsed = start.elapsed();
    verdict(
        worst < ORACLE_TOL && elapsed < ORACLE_RUNTIME,
        format!("{ORACLE_STATES} states, worst trace distance {worst:.3e} ({:.1}s)", elapsed.as_secs_f64()),
    )
}

fn criterion_7() -> Verdict {
    let dims = [2usize; 4];
    let flat = max_entropy_solve(&ConstraintSet::trace_only(&dims), &MaxEntOptions::default()).unwrap();
    let mixed = Operator::maximally_mixed(&dims);
    let d_mixed = trace_distance(flat.rho0_hat.matrix(), mixed.matrix());
    let s_err = (von_neumann_entropy(flat.rho0_hat.matrix()) - 16f64.ln()).abs();

    let sys = fixed_system("case2");
    let k = analyze(&sys).unwrap().k_star - 1;
    let mut worst: f64 = 0.0;
    for (s, rank) in [(1u64, 1usize), (2, 3), (3, 16)] {
        let rho0 = state_from(&StateDecl::Random { rank }, sys.dims(), 2000 + s, "state").unwrap();
        let cs = ConstraintSet::from_outputs(&sys, &exact_outputs(&sys, &rho0, k).unwrap()).unwrap();
        let est = max_entropy_solve(&cs, &MaxEntOptions::default()).unwrap();
        worst = worst.max(trace_distance(est.rho0_hat.matrix(), rho0.matrix()));
    }
    verdict(
        d_mixed < MAXENT_TOL && s_err < MAXENT_TOL && worst < MAXENT_TOL,
        format!("trace-only: distance to I/16 {d_mixed:.1e}, |S - log 16| {s_err:.1e}; dynamical: worst trace distance {worst:.1e}"),
    )
}

fn criterion_8() -> Verdict {
    let sys = fixed_system("case2");
    let rho0 = Operator::basis_state(sys.dims(), &[0, 0, 0, 0]).unwrap();
    let k_max = analyze(&sys).unwrap().k_star - 1;
    let exact = exact_means(&sys, &rho0, k_max).unwrap();
    let mut points = Vec::new();
    for &p in &SHOTS {
        let mut errs: Vec<f64> = Vec::new();
        for seed in 0..SHOT_SEEDS {
            let rec = run_experiment(&sys, &rho0, &MeasurementPlan::new(k_max, p, 1.0), seed).unwrap();
            errs.extend(rec.entries.iter().map(|e| (e.mean - exact[e.k][e.observable_index]).abs()));
        }
        errs.sort_by(f64::total_cmp);
        points.push(((p as f64).ln(), errs[errs.len() / 2].ln()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    verdict((slope - SLOPE).abs() <= SLOPE_TOL, format!("slope {slope:.3} (target {SLOPE} ± {SLOPE_TOL})"))
}

fn qubit(m: CMat) -> Operator {
    Operator::new(vec![2], m * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).unwrap()
}

fn criterion_9() -> Verdict {
    let dt = 1.0;
    let ns = NeighborhoodStructure::new(1, vec![vec![1]]).unwrap();
    let mut spec = LindbladSpec::new(vec![2], ns).unwrap();
    let z = Operator::new(vec![2], pauli_z()).unwrap();
    // eigenvalues ±π/2 of H put the generator eigenvalues ±iπ exactly 2π apart
    let gap_coefficient = std::f64::consts::PI / (2.0 * dt);
    spec.add_hamiltonian(1, &[1], &z, locobs_core::Coefficient::constant(gap_coefficient), "Z1").unwrap();
    let om = OutputMap::from_observables(&[2], vec![qubit(pauli_i()), qubit(pauli_x()), qubit(pauli_z())], None).unwrap();
    let l = build_generator(&spec, None).unwrap();
    let span = continuous_observability_span(&l, &om).unwrap();
    let alias = aliasing_check(&l, dt).unwrap();
    let rank_at = |t: f64| analyze(&DiscretizedSystem::from_spec(&spec, None, om.clone(), t).unwrap()).unwrap().rank;
    let (aliased, perturbed) = (rank_at(dt), rank_at(1.01 * dt));
    verdict(
        aliased < 4 && span == 4 && perturbed == 4 && !alias.safe(),
        format!("discrete rank {aliased} at Δt, continuous span {span}, rank {perturbed} at 1.01Δt, aliasing {:?}", alias.status),
    )
}

fn criterion_10() -> Verdict {
    let sys = fixed_system("case1");
    let report = analyze(&sys).unwrap();
    let rho0 = Operator::maximally_mixed(sys.dims());
    let mut worst: f64 = 0.0;
    for b in &report.unobservable_basis {
        let shifted = Operator::new(sys.dims().to_vec(), rho0.matrix() + b.matrix() * C64::new(WITNESS_EPS, 0.0)).unwrap();
        let a = exact_means(&sys, &rho0, WITNESS_HORIZON).unwrap();
        let c = exact_means(&sys, &shifted, WITNESS_HORIZON).unwrap();
        for (ra, rc) in a.iter().zip(&c) {
            for (x, y) in ra.iter().zip(rc) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    verdict(
        !report.unobservable_basis.is_empty() && worst < WITNESS_TOL,
        format!("{} null directions, max output difference {worst:.2e} over k = 0..{WITNESS_HORIZON}", report.unobservable_basis.len()),
    )
}

fn criterion_11() -> Verdict {
    let mut steps = Vec::new();
    for name in ["case1", "case2"] {
        steps.push((name.to_string(), fixed_system(name).step));
    }
    for name in ["case1-random", "case3"] {
        let sc = bundled(name);
        let om = sc.output_map(false).unwrap();
        for seed in 0..5 {
            steps.push((format!("{name} seed {seed}"), sc.system(&sc.alpha_for(seed), om.clone()).unwrap().step));
        }
    }
    let mut worst_tp: f64 = 0.0;
    let mut worst_choi = f64::INFINITY;
    for (_, e) in &steps {
        worst_tp = worst_tp.max(e.trace_preservation_error());
        worst_choi = worst_choi.min(e.min_choi_eigenvalue());
    }
    verdict(
        worst_tp <= CPTP_TOL && worst_choi >= -CPTP_TOL,
        format!("{} maps, worst trace error {worst_tp:.1e}, min Choi eigenvalue {worst_choi:.1e}", steps.len()),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let trials = TRIALS.to_string();
    let case2_cfg = scenario_path("case2");
    let case1_random = locobs(&["casestudy", "case1-random", "--trials", &trials], out, "casestudy.case1-random.json");
    let case2 = locobs(&["analyze", "--config", case2_cfg.to_str().unwrap()], out, "case2.analyze.json");
    let case3 = locobs(&["casestudy", "case3", "--trials", &trials], out, "casestudy.case3.json");

    let results = [
        criterion_1(out),
        criterion_2(&case1_random),
        criterion_3(&case2),
        criterion_4(&case3),
        criterion_5(&case1_random, &case2, &case3),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ];
    let mut failed = 0;
    for (i, v) in results.iter().enumerate() {
        println!("criterion {:2}: {}  {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
