use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn locobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locobs")).args(args).output().expect("run locobs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn case2_with(extra: &str) -> String {
    std::fs::read_to_string(bundled("case2")).unwrap().replace("[plan]\nshots = 10000\n", extra)
}

#[test]
fn malformed_neighborhood_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled("case1")).unwrap().replace("[3, 4]]", "[3, 5]]");
    let cfg = write_scenario(dir.path(), "bad.toml", &text);
    let o = locobs(&["analyze", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("system.neighborhoods"), "{}", stderr(&o));
}

#[test]
fn toml_errors_carry_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "bad.toml", "name = \"x\"\n[system]\ndims = [2]\nneighborhoods = [[1]]\ndt = \"fast\"\n");
    let o = locobs(&["analyze", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml:5"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(locobs(&["analyze"]).status.code(), Some(1));
    assert_eq!(locobs(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(locobs(&["analyze", "--method", "magic"]).status.code(), Some(1));
    let o = locobs(&["casestudy", "case9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("case1, case1-random, case2, case3"));
    assert_eq!(locobs(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_exit_code_follows_observability() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(locobs(&["analyze", "--config", s(&bundled("case1")), "--out", s(out)]).status.code(), Some(2));
    assert_eq!(locobs(&["analyze", "--config", s(&bundled("case2")), "--out", s(out)]).status.code(), Some(0));
    let r = read_json(&out.join("case2.analyze.json"));
    assert_eq!(r["report"]["rank"], 256);
    assert_eq!(r["aliasing"]["status"], "safe");
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = locobs(&["simulate", "--config", s(&bundled("case2")), "--seed", "11", "--shots", "10000", "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["case2.seed11.csv", "case2.seed11.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let head = read_json(&a.join("case2.seed11.json"));
    let k_max = head["plan"]["k_max"].as_u64().unwrap() as usize;
    let rows = std::fs::read_to_string(a.join("case2.seed11.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 40 * (k_max + 1));
}

#[test]
fn seeds_list_gives_one_record_each() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "c2.toml", &case2_with("[plan]\nshots = 100\n").replace("seeds = [1]", "seeds = [4, 5, 6]"));
    let o = locobs(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for seed in [4, 5, 6] {
        assert!(dir.path().join(format!("case2.seed{seed}.json")).exists());
    }
    assert_ne!(
        std::fs::read(dir.path().join("case2.seed4.csv")).unwrap(),
        std::fs::read(dir.path().join("case2.seed5.csv")).unwrap()
    );
}

#[test]
fn single_neighborhood_output_records_sixteen_means_per_instant() {
    let dir = tempfile::tempdir().unwrap();
    let text = case2_with("[output]\nneighborhoods = [2]\nallow_partial = true\n\n[plan]\nshots = 100\nk_max = 3\n");
    let cfg = write_scenario(dir.path(), "mid.toml", &text);
    let o = locobs(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("case2.seed1.csv")).unwrap();
    for k in 0..=3 {
        assert_eq!(csv.lines().skip(1).filter(|l| l.starts_with(&format!("{k},"))).count(), 16);
    }
}

#[test]
fn partial_output_needs_permission() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "mid.toml", &case2_with("[output]\nneighborhoods = [2]\n"));
    let o = locobs(&["analyze", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--allow-partial-output"), "{}", stderr(&o));
    let o = locobs(&["analyze", "--config", s(&cfg), "--out", s(dir.path()), "--allow-partial-output"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn unphysical_initial_state_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = vec![vec![0.0; 16]; 16];
    rows[0][0] = 1.5;
    rows[1][1] = -0.5;
    let re = format!("{rows:?}");
    let text = case2_with("").replace("kind = \"basis\"\ndigits = [0, 0, 0, 0]", &format!("kind = \"matrix\"\nre = {re}"));
    let cfg = write_scenario(dir.path(), "bad.toml", &text);
    let o = locobs(&["simulate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not physical"), "{}", stderr(&o));
}

#[test]
fn noiseless_pipeline_recovers_the_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = write_scenario(out, "c2.toml", &case2_with("[plan]\nexact = true\n").replace("kind = \"basis\"\ndigits = [0, 0, 0, 0]", "kind = \"random\"\nrank = 3"));
    let o = locobs(&["simulate", "--config", s(&cfg), "--out", s(out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = out.join("case2.seed1.json");
    let o = locobs(&["reconstruct", "--config", s(&cfg), "--method", "gramian", "--out", s(out), s(&rec)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&out.join("case2.seed1.gramian.json"));
    assert!(r["result"]["comparison"]["trace_distance"].as_f64().unwrap() < 1e-8);
}

#[test]
fn sampled_pipeline_gives_a_physical_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = s(&bundled("case2")).to_string();
    let o = locobs(&["simulate", "--config", &cfg, "--shots", "1000", "--seed", "3", "--out", s(out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = out.join("case2.seed3.json");
    let o = locobs(&["reconstruct", "--config", &cfg, "--method", "maxent", "--out", s(out), s(&rec)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = &read_json(&out.join("case2.seed3.maxent.json"))["result"];
    let eps = r["relaxation_level"].as_f64().unwrap();
    assert!(r["max_residual"].as_f64().unwrap() <= eps + 1e-6);
    let f = r["comparison"]["fidelity"].as_f64().unwrap();
    assert!(f > 0.5 && f <= 1.0 + 1e-9, "{f}");
    let m = &r["state_matrix"];
    let d = m["re"].as_array().unwrap().len();
    let trace: f64 = (0..d).map(|i| m["re"][i][i].as_f64().unwrap()).sum();
    assert!((trace - 1.0).abs() < 1e-9);
    assert!(r["min_eigenvalue_before_clip"].as_f64().is_some());
}

#[test]
fn relent_needs_a_prior() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = write_scenario(out, "c2.toml", &case2_with("[plan]\nexact = true\nk_max = 2\n"));
    assert_eq!(locobs(&["simulate", "--config", s(&cfg), "--out", s(out)]).status.code(), Some(0));
    let rec = out.join("case2.seed1.json");
    let o = locobs(&["reconstruct", "--config", s(&cfg), "--method", "relent", "--out", s(out), s(&rec)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("prior"));
    let with_prior = std::fs::read_to_string(&cfg).unwrap() + "\n[reconstruct]\nprior = { kind = \"mixed\" }\n";
    let cfg2 = write_scenario(out, "c2p.toml", &with_prior);
    let o = locobs(&["reconstruct", "--config", s(&cfg2), "--method", "relent", "--out", s(out), s(&rec)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_json(&out.join("case2.seed1.relent.json"))["result"]["method"], "relative_entropy");
}

#[test]
fn record_from_another_system_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg2 = write_scenario(out, "c2.toml", &case2_with("[plan]\nexact = true\nk_max = 1\n"));
    assert_eq!(locobs(&["simulate", "--config", s(&cfg2), "--out", s(out)]).status.code(), Some(0));
    let rec = out.join("case2.seed1.json");
    let o = locobs(&["reconstruct", "--config", s(&bundled("case1")), "--out", s(out), s(&rec)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("record/system mismatch"), "{}", stderr(&o));
}

#[test]
fn unobservable_gramian_is_a_negative_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let text = std::fs::read_to_string(bundled("case1")).unwrap().replace("shots = 10000", "exact = true");
    let cfg = write_scenario(out, "c1.toml", &text);
    assert_eq!(locobs(&["simulate", "--config", s(&cfg), "--seed", "2", "--out", s(out)]).status.code(), Some(0));
    let rec = out.join("case1.seed2.json");
    let o = locobs(&["reconstruct", "--config", s(&cfg), "--method", "gramian", "--out", s(out), s(&rec)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gramian singular"), "{}", stderr(&o));
}

#[test]
fn randomized_analysis_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = locobs(&["analyze", "--config", s(&bundled("case1-random")), "--trials", "4", "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let f = "case1-random.analyze.json";
    assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    let r = read_json(&a.join(f));
    assert_eq!(r["randomization"]["draws"].as_array().unwrap().len(), 4);
    let o = locobs(&["analyze", "--config", s(&bundled("case1-random")), "--trials", "4", "--seed", "99", "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
}

#[test]
fn casestudy_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = locobs(&["casestudy", "case2", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("reference") && text.contains("computed"));
    let r = read_json(&dir.path().join("casestudy.case2.json"));
    assert_eq!(r["table"].as_array().unwrap().len(), 3);
}
