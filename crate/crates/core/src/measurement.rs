//! Simulated acquisition of output estimates: reset, evolve k steps, measure
//! one local observable, repeat P times per (k, i) cell.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::DiscretizedSystem;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::locality::OutputMap;
use crate::operator::Operator;

/// Eigenvalues of an observable closer than this are merged.
pub const EIGEN_MERGE_TOL: f64 = 1e-10;
/// Probabilities below −this signal an unphysical state.
pub const NEGATIVE_PROB_TOL: f64 = 1e-8;

/// Eigenvalues of a Hermitian matrix with orthonormal bases of the
/// corresponding eigenspaces.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    projectors: Vec<CMat>,
}

impl Spectrum {
    pub fn of(c: &CMat) -> Self {
        let (vals, vecs) = linalg::eigh(c);
        let mut values: Vec<f64> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (j, &v) in vals.iter().enumerate() {
            match values.last() {
                Some(&last) if (v - last).abs() <= EIGEN_MERGE_TOL => groups.last_mut().unwrap().push(j),
                _ => {
                    values.push(v);
                    groups.push(vec![j]);
                }
            }
        }
        for (val, g) in values.iter_mut().zip(&groups) {
            *val = g.iter().map(|&j| vals[j]).sum::<f64>() / g.len() as f64;
        }
        let projectors = groups
            .iter()
            .map(|g| CMat::from_fn(vecs.nrows(), g.len(), |r, c| vecs[(r, g[c])]))
            .collect();
        Spectrum { values, projectors }
    }

    /// tr(Π_a ρ), clipped to [0, 1] and renormalized.
    pub fn probabilities(&self, rho: &CMat) -> Result<Vec<f64>> {
        let raw: Vec<f64> = self
            .projectors
            .iter()
            .map(|u| linalg::trace(&(u.adjoint() * rho * u)).re)
            .collect();
        if let Some(&p) = raw.iter().find(|&&p| p < -NEGATIVE_PROB_TOL) {
            return Err(Error::NotPhysical(format!("outcome probability {p:.3e}")));
        }
        let clipped: Vec<f64> = raw.iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotPhysical("all outcome probabilities vanish".into()));
        }
        Ok(clipped.iter().map(|p| p / total).collect())
    }
}

/// Outcome distribution of a projective measurement of `c` on `rho`:
/// (eigenvalue, probability) pairs with degenerate eigenvalues merged.
pub fn born_distribution(rho: &Operator, c: &Operator) -> Result<Vec<(f64, f64)>> {
    if rho.dims() != c.dims() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", rho.dims(), c.dims())));
    }
    if !c.is_hermitian() {
        return Err(Error::NonHermitian("measured observable".into()));
    }
    let s = Spectrum::of(c.matrix());
    let p = s.probabilities(rho.matrix())?;
    Ok(s.values.into_iter().zip(p).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub k_max: usize,
    pub shots_per_point: u64,
    pub dt: f64,
    /// 0-based indices into the output map; all observables when absent
    pub observable_subset: Option<Vec<usize>>,
    /// keep every individual outcome (memory heavy, for debugging)
    #[serde(default)]
    pub keep_raw: bool,
}

impl MeasurementPlan {
    pub fn new(k_max: usize, shots_per_point: u64, dt: f64) -> Self {
        MeasurementPlan { k_max, shots_per_point, dt, observable_subset: None, keep_raw: false }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.shots_per_point == 0 {
            return Err(Error::InvalidArgument("shots per point must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling time must be positive, got {}", self.dt)));
        }
        if let Some(sub) = &self.observable_subset {
            if let Some(&bad) = sub.iter().find(|&&i| i >= m) {
                return Err(Error::IndexOutOfRange(format!("observable {bad} but the map has {m}")));
            }
        }
        Ok(())
    }

    pub fn selected(&self, m: usize) -> Vec<usize> {
        self.observable_subset.clone().unwrap_or_else(|| (0..m).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub k: usize,
    pub observable_index: usize,
    pub mean: f64,
    pub shots: u64,
    #[serde(skip)]
    pub raw: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct MeasurementRecord {
    pub plan: MeasurementPlan,
    pub seed: u64,
    pub entries: Vec<RecordEntry>,
    /// τ̂[k] = Σ_i mean_i[k] C_i for k = 0..=k_max
    pub tau_hat: Vec<Operator>,
}

impl MeasurementRecord {
    /// Rebuilds τ̂ from stored entries.
    pub fn from_entries(plan: MeasurementPlan, seed: u64, entries: Vec<RecordEntry>, om: &OutputMap) -> Result<Self> {
        plan.validate(om.m())?;
        let mut coeffs = vec![vec![C64::new(0.0, 0.0); om.m()]; plan.k_max + 1];
        for e in &entries {
            if e.k > plan.k_max || e.observable_index >= om.m() {
                return Err(Error::Record(format!(
                    "entry (k = {}, i = {}) outside plan with k_max = {} and m = {}",
                    e.k,
                    e.observable_index,
                    plan.k_max,
                    om.m()
                )));
            }
            if !e.mean.is_finite() {
                return Err(Error::Record(format!("non-finite mean at (k = {}, i = {})", e.k, e.observable_index)));
            }
            coeffs[e.k][e.observable_index] = C64::new(e.mean, 0.0);
        }
        let tau_hat = coeffs
            .iter()
            .map(|c| Operator::new(om.dims().to_vec(), om.combine(c)))
            .collect::<Result<_>>()?;
        Ok(MeasurementRecord { plan, seed, entries, tau_hat })
    }

    pub fn mean(&self, k: usize, i: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.k == k && e.observable_index == i).map(|e| e.mean)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn cell_rng(seed: u64, k: usize, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 32) | i as u64);
    rng
}

/// Outcome counts for `shots` i.i.d. draws, via sequential binomials.
fn multinomial(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut left = shots;
    let mut mass = 1.0;
    for (a, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if a + 1 == probs.len() {
            counts[a] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let x = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        counts[a] = x;
        left -= x;
        mass -= p;
    }
    counts
}

/// Runs the acquisition loop. Each (k, i) cell draws from its own ChaCha8
/// stream derived from `seed`, so records are reproducible and independent
/// of scheduling.
pub fn run_experiment(sys: &DiscretizedSystem, rho0: &Operator, plan: &MeasurementPlan, seed: u64) -> Result<MeasurementRecord> {
    let om = &sys.output;
    plan.validate(om.m())?;
    if rho0.dims() != sys.dims() {
        return Err(Error::Dimension(format!("state {:?} vs system {:?}", rho0.dims(), sys.dims())));
    }
    if !rho0.is_density() {
        return Err(Error::NotPhysical("initial state is not a density operator".into()));
    }
    let states = sys.evolve(rho0.matrix(), plan.k_max);
    let selected = plan.selected(om.m());
    let spectra: Vec<Spectrum> = selected.iter().map(|&i| Spectrum::of(om.observables()[i].matrix())).collect();
    let cells: Vec<(usize, usize)> = (0..=plan.k_max).flat_map(|k| (0..selected.len()).map(move |s| (k, s))).collect();
    let entries = cells
        .par_iter()
        .map(|&(k, s)| {
            let i = selected[s];
            let spec = &spectra[s];
            let probs = spec.probabilities(&states[k])?;
            let mut rng = cell_rng(seed, k, i);
            let p = plan.shots_per_point;
            let (mean, raw) = if plan.keep_raw {
                let dist = WeightedIndex::new(&probs).map_err(|e| Error::NotPhysical(e.to_string()))?;
                let raw: Vec<f64> = (0..p).map(|_| spec.values[dist.sample(&mut rng)]).collect();
                (raw.iter().sum::<f64>() / p as f64, Some(raw))
            } else {
                let counts = multinomial(&probs, p, &mut rng);
                let total: f64 = counts.iter().zip(&spec.values).map(|(&c, &v)| c as f64 * v).sum();
                (total / p as f64, None)
            };
            Ok(RecordEntry { k, observable_index: i, mean, shots: p, raw })
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementRecord::from_entries(plan.clone(), seed, entries, om)
}

/// The P → ∞ record: exact means for the cells of `plan`, stored with a
/// shot count of zero.
pub fn noiseless_record(sys: &DiscretizedSystem, rho0: &Operator, plan: &MeasurementPlan) -> Result<MeasurementRecord> {
    plan.validate(sys.output.m())?;
    let means = exact_means(sys, rho0, plan.k_max)?;
    let selected = plan.selected(sys.output.m());
    let entries = (0..=plan.k_max)
        .flat_map(|k| selected.iter().map(move |&i| (k, i)))
        .map(|(k, i)| RecordEntry { k, observable_index: i, mean: means[k][i], shots: 0, raw: None })
        .collect();
    MeasurementRecord::from_entries(plan.clone(), 0, entries, &sys.output)
}

/// Noiseless outputs τ[k] = 𝒞(Êᵏ ρ₀), k = 0..=k_max.
pub fn exact_outputs(sys: &DiscretizedSystem, rho0: &Operator, k_max: usize) -> Result<Vec<Operator>> {
    exact_means(sys, rho0, k_max)?
        .iter()
        .map(|row| {
            let c: Vec<C64> = row.iter().map(|&x| C64::new(x, 0.0)).collect();
            Operator::new(sys.dims().to_vec(), sys.output.combine(&c))
        })
        .collect()
}

/// tr(C_i ρ[k]) for k = 0..=k_max (outer index k).
pub fn exact_means(sys: &DiscretizedSystem, rho0: &Operator, k_max: usize) -> Result<Vec<Vec<f64>>> {
    if rho0.dims() != sys.dims() {
        return Err(Error::Dimension(format!("state {:?} vs system {:?}", rho0.dims(), sys.dims())));
    }
    Ok(sys.evolve(rho0.matrix(), k_max).iter().map(|r| sys.output.expectations(r)).collect())
}

/// Dense complex matrix as nested real and imaginary rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DenseMatrix {
    pub fn from_cmat(a: &CMat) -> Self {
        let rows = |f: fn(&C64) -> f64| (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| f(&a[(i, j)])).collect()).collect();
        DenseMatrix { re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    pub fn to_cmat(&self) -> Result<CMat> {
        let n = self.re.len();
        if self.im.len() != n || self.re.iter().chain(&self.im).any(|r| r.len() != n) {
            return Err(Error::Record("dense matrix is not square".into()));
        }
        Ok(CMat::from_fn(n, n, |i, j| C64::new(self.re[i][j], self.im[i][j])))
    }
}

pub const RECORD_FORMAT: &str = "locobs-record/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: String,
    pub plan: MeasurementPlan,
    pub seed: u64,
    pub system_hash: String,
    pub dims: Vec<usize>,
    pub observables: Vec<String>,
    pub ground_truth: Option<DenseMatrix>,
    pub csv: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Record(format!("{}: {e}", path.display()))
}

/// Writes `<stem>.csv` (k, observable_index, mean, shots) and `<stem>.json`
/// into `dir`; returns the two paths.
pub fn write_record(
    record: &MeasurementRecord,
    om: &OutputMap,
    system_hash: &str,
    ground_truth: Option<&Operator>,
    dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &record.entries {
        w.serialize(e).map_err(|e| io_err(&csv_path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(&csv_path, e))?;
    fs::write(&csv_path, bytes).map_err(|e| io_err(&csv_path, e))?;
    let header = RecordHeader {
        format: RECORD_FORMAT.into(),
        plan: record.plan.clone(),
        seed: record.seed,
        system_hash: system_hash.into(),
        dims: om.dims().to_vec(),
        observables: om.labels().to_vec(),
        ground_truth: ground_truth.map(|g| DenseMatrix::from_cmat(g.matrix())),
        csv: format!("{stem}.csv"),
    };
    let text = serde_json::to_string_pretty(&header).map_err(|e| io_err(&json_path, e))?;
    fs::write(&json_path, text + "\n").map_err(|e| io_err(&json_path, e))?;
    Ok((csv_path, json_path))
}

/// Reads a header and the CSV it names (resolved relative to the header).
pub fn read_record(json_path: &Path) -> Result<(RecordHeader, Vec<RecordEntry>)> {
    let text = fs::read_to_string(json_path).map_err(|e| io_err(json_path, e))?;
    let header: RecordHeader = serde_json::from_str(&text).map_err(|e| io_err(json_path, e))?;
    if header.format != RECORD_FORMAT {
        return Err(Error::Record(format!("unsupported record format {:?}", header.format)));
    }
    let csv_path = json_path.parent().unwrap_or(Path::new(".")).join(&header.csv);
    let mut r = csv::Reader::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let entries = r
        .deserialize()
        .collect::<std::result::Result<Vec<RecordEntry>, _>>()
        .map_err(|e| io_err(&csv_path, e))?;
    Ok((header, entries))
}
