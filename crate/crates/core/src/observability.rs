//! Rank analysis of the observability matrix Ô = [Ĉ; ĈÊ; ĈÊ²; …].
//!
//! Ĉ = VV† with V having orthonormal columns vec(C_i), so the row space of
//! the block ĈÊᵏ equals that of V†Êᵏ. The analysis works with the reduced
//! m-row blocks and tracks the growing row space with a block Krylov
//! iteration: only the directions accepted at step k are propagated to step
//! k + 1.
//!
//! Horizon convention: `k_star` counts sampling instants, i.e. the outputs
//! τ[0], …, τ[k_star − 1] already determine everything the system can
//! reveal. `last_sample_index = k_star − 1` is the smallest k with
//! rank Ôᵏ = rank Ôᵏ⁺¹ when Ôᵏ stacks the blocks 0..=k.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{DiscretizedSystem, LindbladSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, RMat, RVec, RealBasis, RowBasis, C64};
use crate::locality::OutputMap;
use crate::operator::{product_basis, Operator, OperatorBasis, Role};

/// Residual threshold for accepting a normalized Krylov candidate.
pub const KRYLOV_TOL: f64 = 1.5e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankPolicy {
    /// Gram–Schmidt acceptance threshold for the incremental rank.
    pub krylov_tol: f64,
    /// Relative singular-value cutoff for the SVD cross-check; `None` uses
    /// max(rows, cols)·ε.
    pub svd_rel_tol: Option<f64>,
    /// Cap on the number of sampling instants (defaults to D²).
    pub max_instants: Option<usize>,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy { krylov_tol: KRYLOV_TOL, svd_rel_tol: None, max_instants: None }
    }
}

impl RankPolicy {
    pub fn with_tolerance(tol: f64) -> Self {
        RankPolicy { krylov_tol: tol, ..Self::default() }
    }

    pub fn svd_threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        let rel = self.svd_rel_tol.unwrap_or(rows.max(cols) as f64 * f64::EPSILON);
        rel * sigma_max
    }
}

/// Orthonormal basis of span{rows·opʲ} and the rank after each block.
#[derive(Clone, Debug)]
pub struct KrylovTrace {
    pub basis: RowBasis,
    /// `ranks[j]` is the rank of the stack of blocks 0..=j.
    pub ranks: Vec<usize>,
    pub stabilized: bool,
}

impl KrylovTrace {
    pub fn rank(&self) -> usize {
        self.basis.dim()
    }

    /// Number of blocks after which the rank stopped growing.
    pub fn instants(&self) -> usize {
        if self.stabilized {
            self.ranks.len() - 1
        } else {
            self.ranks.len()
        }
    }
}

fn rows_to_mat(rows: &[CVec], n: usize) -> CMat {
    CMat::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Block Krylov iteration on row vectors: grows span{R, R·A, R·A², …}.
pub fn krylov_rows(start: &CMat, a: &CMat, tol: f64, max_blocks: Option<usize>) -> KrylovTrace {
    let n = start.ncols();
    let max_blocks = max_blocks.unwrap_or(n).max(1);
    let mut basis = RowBasis::new(n);
    let mut fresh: Vec<CVec> = Vec::new();
    for i in 0..start.nrows() {
        let v = start.row(i).transpose();
        if let Some(q) = basis.try_add(&v, tol) {
            fresh.push(q);
        }
    }
    let mut ranks = vec![basis.dim()];
    let mut stabilized = false;
    while ranks.len() < max_blocks {
        if basis.dim() == n || fresh.is_empty() {
            ranks.push(basis.dim());
            stabilized = true;
            break;
        }
        let cand = linalg::matmul(&rows_to_mat(&fresh, n), a);
        fresh.clear();
        for i in 0..cand.nrows() {
            let v = cand.row(i).transpose();
            if let Some(q) = basis.try_add(&v, tol) {
                fresh.push(q);
            }
        }
        let r = basis.dim();
        ranks.push(r);
        if fresh.is_empty() {
            stabilized = true;
            break;
        }
    }
    KrylovTrace { basis, ranks, stabilized }
}

/// The stacked matrix [Ĉ; ĈÊ; …; ĈÊ^{horizon−1}] built by repeated
/// right-multiplication.
pub fn observability_matrix(sys: &DiscretizedSystem, horizon: usize) -> Result<CMat> {
    stack_blocks(&sys.output.projector().matrix().clone(), sys, horizon)
}

/// The reduced stack [V†; V†Ê; …] with m rows per block.
pub fn reduced_observability_matrix(sys: &DiscretizedSystem, horizon: usize) -> Result<CMat> {
    stack_blocks(sys.output.rows(), sys, horizon)
}

fn stack_blocks(first: &CMat, sys: &DiscretizedSystem, horizon: usize) -> Result<CMat> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let e = sys.step.matrix();
    if first.ncols() != e.nrows() {
        return Err(Error::Dimension(format!("output has {} columns, step is {}x{}", first.ncols(), e.nrows(), e.ncols())));
    }
    let b = first.nrows();
    let mut out = CMat::zeros(b * horizon, first.ncols());
    let mut cur = first.clone();
    for k in 0..horizon {
        out.rows_mut(k * b, b).copy_from(&cur);
        if k + 1 < horizon {
            cur = linalg::matmul(&cur, e);
        }
    }
    Ok(out)
}

/// ⌈D²/m⌉.
pub fn lower_bound(d: usize, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidArgument("output map has no observables".into()));
    }
    Ok((d * d).div_ceil(m))
}

#[derive(Clone, Debug)]
pub struct ObservabilityReport {
    pub dim: usize,
    pub m: usize,
    pub rank: usize,
    pub svd_rank: usize,
    pub is_observable: bool,
    /// sampling instants needed, see the module docs
    pub k_star: usize,
    pub last_sample_index: usize,
    pub k_lower_bound: usize,
    pub rank_sequence: Vec<usize>,
    pub unobservable_basis: Vec<Operator>,
    /// coordinates of each basis element over [`Self::basis_labels`]
    pub unobservable_coordinates: Vec<Vec<f64>>,
    pub basis_labels: Vec<String>,
    /// pivot labels of the reduced echelon form of the unobservable basis
    pub leading_labels: Vec<String>,
    pub gramian_condition: f64,
    pub singular_values: Vec<f64>,
    pub svd_threshold: f64,
    pub policy: RankPolicy,
}

impl ObservabilityReport {
    pub fn unobservable_dim(&self) -> usize {
        self.unobservable_basis.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let basis: Vec<_> = self
            .unobservable_coordinates
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&self.basis_labels)
                    .filter(|(v, _)| v.abs() > 1e-12)
                    .map(|(v, l)| json!([l, v]))
                    .collect::<Vec<_>>()
            })
            .collect();
        json!({
            "dimension_squared": self.dim * self.dim,
            "observables": self.m,
            "rank": self.rank,
            "svd_rank": self.svd_rank,
            "observable": self.is_observable,
            "k_star": self.k_star,
            "k_star_convention": "number of sampling instants k = 0..k_star-1",
            "last_sample_index": self.last_sample_index,
            "k_lower_bound": self.k_lower_bound,
            "rank_sequence": self.rank_sequence,
            "unobservable_dimension": self.unobservable_dim(),
            "unobservable_leading_labels": self.leading_labels,
            "unobservable_basis": basis,
            "gramian_condition": finite_or_null(self.gramian_condition),
            "singular_values": self.singular_values,
            "svd_threshold": self.svd_threshold,
            "krylov_tolerance": self.policy.krylov_tol,
        })
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Rank and horizon only, without the null-space and SVD extras.
pub fn rank_profile(sys: &DiscretizedSystem, policy: &RankPolicy) -> KrylovTrace {
    let n = sys.dim() * sys.dim();
    let cap = policy.max_instants.unwrap_or(n).max(1) + 1;
    krylov_rows(sys.output.rows(), sys.step.matrix(), policy.krylov_tol, Some(cap))
}

pub fn analyze(sys: &DiscretizedSystem) -> Result<ObservabilityReport> {
    analyze_with(sys, &RankPolicy::default())
}

pub fn analyze_with(sys: &DiscretizedSystem, policy: &RankPolicy) -> Result<ObservabilityReport> {
    let d = sys.dim();
    let n = d * d;
    let m = sys.output.m();
    let trace = rank_profile(sys, policy);
    let rank = trace.rank();
    let k_star = trace.instants().max(1);

    let stack = reduced_observability_matrix(sys, k_star)?;
    let singular_values = linalg::singular_values(&stack);
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let svd_threshold = policy.svd_threshold(stack.nrows(), stack.ncols(), smax);
    let svd_rank = singular_values.iter().filter(|&&s| s > svd_threshold).count();
    let gramian_condition = match singular_values.get(rank.max(1) - 1) {
        Some(&s) if s > 0.0 => (smax / s).powi(2),
        _ => f64::INFINITY,
    };

    let pb = product_basis(sys.dims());
    let null = unobservable_subspace(&trace.basis, &pb, n - rank)?;
    let unobservable_basis = null
        .coordinates
        .iter()
        .map(|x| {
            let coeffs: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
            pb.combine(&coeffs).and_then(|o| o.hermitized().with_role(Role::Hermitian))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ObservabilityReport {
        dim: d,
        m,
        rank,
        svd_rank,
        is_observable: rank == n,
        k_star,
        last_sample_index: k_star - 1,
        k_lower_bound: lower_bound(d, m)?,
        rank_sequence: trace.ranks.clone(),
        unobservable_basis,
        unobservable_coordinates: null.coordinates,
        basis_labels: pb.labels.clone(),
        leading_labels: null.leading.iter().map(|&p| pb.labels[p].clone()).collect(),
        gramian_condition,
        singular_values,
        svd_threshold,
        policy: *policy,
    })
}

struct NullSpace {
    coordinates: Vec<Vec<f64>>,
    leading: Vec<usize>,
}

/// Hermitian operators X = Σ x_p P_p (x real) with q·vec(X) = 0 for every
/// row q of the observable basis.
fn unobservable_subspace(rows: &RowBasis, pb: &OperatorBasis, expected: usize) -> Result<NullSpace> {
    let n = pb.len();
    if expected == 0 {
        return Ok(NullSpace { coordinates: vec![], leading: vec![] });
    }
    let pmat = CMat::from_fn(n, n, |j, p| pb.elements[p].matrix().as_slice()[j]);
    let s = linalg::matmul(&rows_to_mat(rows.rows(), n), &pmat);
    let mut real = RealBasis::new();
    for i in 0..s.nrows() {
        let row = s.row(i);
        // basis rows have unit norm, so a negligible part carries no direction
        for part in [row.map(|z| z.re), row.map(|z| z.im)] {
            let v = part.transpose();
            if v.norm() > 1e-7 {
                real.try_add(&v, 1e-7);
            }
        }
    }
    let mut proj = RMat::identity(n, n);
    for q in &real.vectors {
        proj -= q * q.transpose();
    }
    let eig = proj.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let keep = n - real.vectors.len();
    if keep != expected {
        return Err(Error::InvalidArgument(format!(
            "real null space has dimension {keep}, complex rank implies {expected}"
        )));
    }
    let mut ech: Vec<RVec> = order[..keep].iter().map(|&j| eig.eigenvectors.column(j).into_owned()).collect();

    // reduced echelon form with pivots in basis-label order
    let mut leading = Vec::new();
    let mut next = 0;
    for p in 0..n {
        if next == ech.len() {
            break;
        }
        let (best, val) = (next..ech.len())
            .map(|r| (r, ech[r][p].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("rows remain");
        if val < 1e-6 {
            continue;
        }
        ech.swap(next, best);
        let piv = ech[next][p];
        ech[next].unscale_mut(piv);
        let pivot_row = ech[next].clone();
        for (r, row) in ech.iter_mut().enumerate() {
            if r != next {
                let f = row[p];
                if f != 0.0 {
                    row.axpy(-f, &pivot_row, 1.0);
                }
            }
        }
        leading.push(p);
        next += 1;
    }

    let mut ortho = RealBasis::new();
    for row in &ech {
        ortho.try_add(row, 1e-10);
    }
    let mut coordinates: Vec<Vec<f64>> = ortho.vectors.iter().map(|v| v.iter().copied().collect()).collect();
    for (c, &p) in coordinates.iter_mut().zip(&leading) {
        if c[p] < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(NullSpace { coordinates, leading })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub alpha: Vec<f64>,
    pub observable: bool,
    pub rank: usize,
    pub k_star: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomizationResult {
    pub success: bool,
    /// the first observable draw
    pub alpha: Option<Vec<f64>>,
    /// trials up to and including the first observable draw
    pub trials_used: usize,
    /// k* of every draw, observable or not
    pub k_star_samples: Vec<usize>,
    pub trials: Vec<TrialOutcome>,
}

impl RandomizationResult {
    pub fn observable_count(&self) -> usize {
        self.trials.iter().filter(|t| t.observable).count()
    }

    pub fn observable_k_stars(&self) -> Vec<usize> {
        self.trials.iter().filter(|t| t.observable).map(|t| t.k_star).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RandomizeOptions {
    /// values of the parameters that are not redrawn
    pub base_alpha: Vec<f64>,
    pub dt: f64,
    pub policy: RankPolicy,
}

impl RandomizeOptions {
    pub fn new(base_alpha: Vec<f64>, dt: f64) -> Self {
        RandomizeOptions { base_alpha, dt, policy: RankPolicy::default() }
    }
}

/// Redraws the `free_params` entries of α from N(0, 1) in each trial and
/// records observability. Trial t uses stream t of a ChaCha8 generator
/// seeded with `seed`, so results do not depend on thread scheduling.
pub fn randomize_until_observable(
    spec: &LindbladSpec,
    om: &OutputMap,
    free_params: &[usize],
    trials: usize,
    seed: u64,
    opts: &RandomizeOptions,
) -> Result<RandomizationResult> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let n_params = spec.n_params().max(opts.base_alpha.len());
    if opts.base_alpha.len() < spec.n_params() {
        return Err(Error::InvalidArgument(format!(
            "base parameter vector has {} entries, spec needs {}",
            opts.base_alpha.len(),
            spec.n_params()
        )));
    }
    if let Some(&bad) = free_params.iter().find(|&&j| j >= n_params) {
        return Err(Error::IndexOutOfRange(format!("free parameter {bad} but only {n_params} parameters")));
    }
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut alpha = opts.base_alpha.clone();
            for &j in free_params {
                alpha[j] = StandardNormal.sample(&mut rng);
            }
            let sys = DiscretizedSystem::from_spec(spec, Some(&alpha), om.clone(), opts.dt)?;
            let trace = rank_profile(&sys, &opts.policy);
            let n = sys.dim() * sys.dim();
            Ok(TrialOutcome { observable: trace.rank() == n, rank: trace.rank(), k_star: trace.instants().max(1), alpha })
        })
        .collect::<Result<_>>()?;
    let first = outcomes.iter().position(|o| o.observable);
    Ok(RandomizationResult {
        success: first.is_some(),
        alpha: first.map(|i| outcomes[i].alpha.clone()),
        trials_used: first.map_or(trials, |i| i + 1),
        k_star_samples: outcomes.iter().map(|o| o.k_star).collect(),
        trials: outcomes,
    })
}
