use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use locobs_core::measurement::{read_record, write_record, DenseMatrix};
use locobs_core::observability::{analyze_with, rank_profile, RandomizeOptions};
use locobs_core::reconstruction::{gramian_reconstruct_with, max_entropy_solve};
use locobs_core::{
    aliasing_check, build_generator, noiseless_record, randomize_until_observable, run_experiment, AliasingReport,
    ConstraintSet, MeasurementRecord, ObservabilityReport, Operator, OutputMap, RandomizationResult, RankPolicy,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::scenario::{MethodName, Scenario};

/// Flags shared by the subcommands; unset fields fall back to the scenario.
#[derive(Debug, Clone)]
pub struct Options {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub allow_partial: bool,
    pub method: Option<MethodName>,
    pub shots: Option<u64>,
    pub trials: Option<usize>,
    pub tolerance: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: None,
            out: PathBuf::from("out"),
            allow_partial: false,
            method: None,
            shots: None,
            trials: None,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn header(sc: &Scenario) -> Value {
    json!({ "scenario": sc.name, "system_hash": sc.hash })
}

/// Summary statistics of k* over the observable draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStarStats {
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

pub fn k_star_stats(samples: &[usize]) -> Option<KStarStats> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_unstable();
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] as f64 } else { (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0 };
    Some(KStarStats {
        mean: s.iter().sum::<usize>() as f64 / n as f64,
        median,
        min: s[0],
        max: s[n - 1],
    })
}

pub struct FixedAnalysis {
    pub report: ObservabilityReport,
    pub aliasing: AliasingReport,
}

pub fn analyze_fixed(sc: &Scenario, om: OutputMap, policy: &RankPolicy) -> Result<FixedAnalysis> {
    let sys = sc.system(&[], om)?;
    let report = analyze_with(&sys, policy)?;
    let l = build_generator(&sc.spec, Some(&[]))?;
    let aliasing = aliasing_check(&l, sc.dt)?;
    Ok(FixedAnalysis { report, aliasing })
}

pub fn sweep(sc: &Scenario, om: &OutputMap, policy: &RankPolicy, trials: usize, seed: u64) -> Result<RandomizationResult> {
    let free: Vec<usize> = (0..sc.random.len()).collect();
    let opts = RandomizeOptions { base_alpha: vec![0.0; free.len()], dt: sc.dt, policy: *policy };
    Ok(randomize_until_observable(&sc.spec, om, &free, trials, seed, &opts)?)
}

pub fn sweep_json(sc: &Scenario, res: &RandomizationResult, trials: usize, seed: u64, lower_bound: usize) -> Value {
    let ks = res.observable_k_stars();
    let stats = k_star_stats(&ks);
    let rows: Vec<Value> = res
        .trials
        .iter()
        .enumerate()
        .map(|(t, o)| {
            let alpha: serde_json::Map<String, Value> =
                sc.random.iter().map(|p| (p.name.clone(), json!(p.mean + p.std * o.alpha[p.index]))).collect();
            json!({ "trial": t, "observable": o.observable, "rank": o.rank, "k_star": o.k_star, "parameters": alpha })
        })
        .collect();
    json!({
        "trials": trials,
        "seed": seed,
        "observable_trials": res.observable_count(),
        "first_observable_trial": res.success.then(|| res.trials_used - 1),
        "k_star_lower_bound": lower_bound,
        "k_star": stats.map(|s| json!({ "mean": s.mean, "median": s.median, "min": s.min, "max": s.max })),
        "k_star_convention": "number of sampling instants k = 0..k_star-1",
        "draws": rows,
    })
}

fn trials_for(sc: &Scenario, opts: &Options) -> usize {
    opts.trials.or(sc.analysis.trials).unwrap_or(30)
}

fn seed_for(sc: &Scenario, opts: &Options) -> Result<u64> {
    opts.seed
        .or_else(|| sc.seeds.first().copied())
        .ok_or_else(|| CliError::Usage(format!("{}: pass --seed or list `seeds` in the scenario", sc.name)))
}

pub fn analyze(sc: &Scenario, opts: &Options) -> Result<Outcome> {
    let om = sc.output_map(opts.allow_partial)?;
    let policy = sc.policy(opts.tolerance);
    let path = opts.out.join(format!("{}.analyze.json", sc.name));
    let mut summary = String::new();
    let (value, observable) = if sc.has_distributions() {
        let trials = trials_for(sc, opts);
        let seed = seed_for(sc, opts)?;
        let res = sweep(sc, &om, &policy, trials, seed)?;
        let lb = locobs_core::lower_bound(om.dim(), om.m())?;
        let body = sweep_json(sc, &res, trials, seed, lb);
        let _ = writeln!(summary, "{}: {}/{} draws observable", sc.name, res.observable_count(), trials);
        if let Some(s) = k_star_stats(&res.observable_k_stars()) {
            let _ = writeln!(summary, "k* mean {:.2}, median {}, range {}..={} (lower bound {lb})", s.mean, s.median, s.min, s.max);
        }
        let mut v = header(sc);
        v["randomization"] = body;
        (v, res.success)
    } else {
        let fa = analyze_fixed(sc, om, &policy)?;
        let r = &fa.report;
        let _ = writeln!(summary, "{}: rank {} of {}, observable: {}", sc.name, r.rank, r.dim * r.dim, r.is_observable);
        if r.is_observable {
            let _ = writeln!(summary, "k* = {} sampling instants (lower bound {})", r.k_star, r.k_lower_bound);
        } else {
            let _ = writeln!(summary, "unobservable dimension {}: {}", r.unobservable_dim(), r.leading_labels.join(", "));
        }
        let _ = writeln!(summary, "aliasing check: {:?}", fa.aliasing.status);
        let mut v = header(sc);
        v["report"] = r.to_json();
        v["aliasing"] = serde_json::to_value(&fa.aliasing).map_err(|e| CliError::io(&path, e))?;
        (v, r.is_observable)
    };
    write_json(&path, &value)?;
    Ok(Outcome { exit: if observable { 0 } else { 2 }, summary, files: vec![path] })
}

pub fn simulate(sc: &Scenario, opts: &Options) -> Result<Outcome> {
    let seeds = match opts.seed {
        Some(s) => vec![s],
        None if !sc.seeds.is_empty() => sc.seeds.clone(),
        None => return Err(CliError::Usage(format!("{}: pass --seed or list `seeds` in the scenario", sc.name))),
    };
    let om = sc.output_map(opts.allow_partial)?;
    let policy = sc.policy(opts.tolerance);
    let shots = opts.shots.unwrap_or(sc.plan.shots);
    let exact = sc.plan.exact || shots == 0;
    let written: Vec<(u64, usize, PathBuf)> = seeds
        .par_iter()
        .map(|&seed| {
            let sys = sc.system(&sc.alpha_for(seed), om.clone())?;
            let rho0 = sc.initial_state(seed)?;
            let k_max = match sc.plan.k_max {
                Some(k) => k,
                None => rank_profile(&sys, &policy).instants(),
            };
            let mut record = if exact {
                noiseless_record(&sys, &rho0, &sc.measurement_plan(k_max, 1))?
            } else {
                run_experiment(&sys, &rho0, &sc.measurement_plan(k_max, shots), seed)?
            };
            record.seed = seed;
            let stem = format!("{}.seed{seed}", sc.name);
            let (_, json_path) = write_record(&record, &om, &sc.hash, Some(&rho0), &opts.out, &stem)?;
            Ok((seed, record.len(), json_path))
        })
        .collect::<Result<_>>()?;
    let mut summary = String::new();
    for (seed, n, path) in &written {
        let _ = writeln!(summary, "seed {seed}: {n} means -> {}", path.display());
    }
    Ok(Outcome { exit: 0, summary, files: written.into_iter().map(|w| w.2).collect() })
}

fn method_tag(m: MethodName) -> &'static str {
    match m {
        MethodName::Gramian => "gramian",
        MethodName::Maxent => "maxent",
        MethodName::Relent => "relent",
    }
}

pub fn reconstruct(sc: &Scenario, records: &[PathBuf], opts: &Options) -> Result<Outcome> {
    if records.is_empty() {
        return Err(CliError::Usage("reconstruct needs at least one record file".into()));
    }
    let om = sc.output_map(opts.allow_partial)?;
    let policy = sc.policy(None);
    let method = opts.method.or(sc.reconstruct.method).unwrap_or(MethodName::Maxent);
    let mut summary = String::new();
    let mut files = Vec::new();
    for path in records {
        let (head, entries) = read_record(path)?;
        if head.system_hash != sc.hash {
            return Err(CliError::Config(format!(
                "record/system mismatch: {} was written for system {}, scenario `{}` is {}",
                path.display(),
                &head.system_hash[..head.system_hash.len().min(12)],
                sc.name,
                &sc.hash[..12]
            )));
        }
        let sys = sc.system(&sc.alpha_for(head.seed), om.clone())?;
        let record = MeasurementRecord::from_entries(head.plan.clone(), head.seed, entries, &om)?;
        let truth = head.ground_truth.as_ref().map(|g| dense_operator(g, &sc.dims)).transpose()?;
        let result = match method {
            MethodName::Gramian => {
                if record.plan.observable_subset.is_some() {
                    return Err(CliError::Usage(
                        "the gramian method needs every observable at every instant; use maxent for subset records".into(),
                    ));
                }
                gramian_reconstruct_with(&sys, &record.tau_hat, &policy)?
            }
            MethodName::Maxent | MethodName::Relent => {
                let mut mo = sc.maxent_options(opts.tolerance);
                if method == MethodName::Relent {
                    mo.prior = Some(sc.prior(head.seed)?.ok_or_else(|| {
                        CliError::Config(format!("{}: reconstruct.prior is required for relent", sc.name))
                    })?);
                }
                max_entropy_solve(&ConstraintSet::from_record(&sys, &record)?, &mo)?
            }
        };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
        let out = opts.out.join(format!("{stem}.{}.json", method_tag(method)));
        let mut v = header(sc);
        v["record"] = json!(path.file_name().and_then(|s| s.to_str()));
        v["seed"] = json!(head.seed);
        v["result"] = result.to_json(truth.as_ref());
        write_json(&out, &v)?;
        let _ = write!(summary, "{}: {} max residual {:.3e}, relaxation {:.3e}", stem, method_tag(method), result.max_residual, result.relaxation_level);
        if let Some(c) = v["result"]["comparison"].as_object() {
            let _ = write!(summary, ", trace distance {:.3e}, fidelity {:.6}", c["trace_distance"].as_f64().unwrap_or(f64::NAN), c["fidelity"].as_f64().unwrap_or(f64::NAN));
        }
        let _ = writeln!(summary, " -> {}", out.display());
        files.push(out);
    }
    Ok(Outcome { exit: 0, summary, files })
}

fn dense_operator(g: &DenseMatrix, dims: &[usize]) -> Result<Operator> {
    Ok(Operator::new(dims.to_vec(), g.to_cmat()?)?)
}
