//! Initial-state reconstruction from output sequences.
//!
//! Every constraint tr(C_i Êᵏ(ρ)) = b is pulled back to a static linear
//! constraint tr(A ρ) = b with A = (Ê†)ᵏ(C_i). Constraints are stored in real
//! coordinates over the normalized product basis {P_p}, where P_0 = I/√D.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::DiscretizedSystem;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat, RVec, C64};
use crate::maxent::{self, Family, SolveOptions};
pub use crate::maxent::relative_entropy;
use crate::measurement::{DenseMatrix, MeasurementRecord};
use crate::observability::{rank_profile, RankPolicy};
use crate::operator::{product_basis, Operator, Role};

/// Default relaxation schedule for noisy records.
pub const DEFAULT_SCHEDULE: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1];
/// Absolute slack on constraint violations treated as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Relative singular-value cutoff when reducing equality constraints.
pub const REDUCTION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gramian,
    MaxEntropy,
    RelativeEntropy,
}

/// Linear constraints tr(A_j ρ) = b_j in product-basis coordinates.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    dims: Vec<usize>,
    keys: Vec<(usize, usize)>,
    coords: RMat,
    targets: RVec,
    basis: CMat,
    labels: Vec<String>,
}

/// D² × D² matrix whose columns are vec(P_p).
fn basis_matrix(dims: &[usize]) -> (CMat, Vec<String>) {
    let pb = product_basis(dims);
    let d: usize = dims.iter().product();
    let n = d * d;
    let m = CMat::from_fn(n, n, |j, p| pb.elements[p].matrix().as_slice()[j]);
    (m, pb.labels)
}

impl ConstraintSet {
    /// Only the implicit trace constraint.
    pub fn trace_only(dims: &[usize]) -> Self {
        let (basis, labels) = basis_matrix(dims);
        let n = basis.nrows();
        ConstraintSet {
            dims: dims.to_vec(),
            keys: vec![],
            coords: RMat::zeros(0, n),
            targets: RVec::zeros(0),
            basis,
            labels,
        }
    }

    /// One constraint per (k, i, value) triple.
    pub fn from_means(sys: &DiscretizedSystem, means: &[(usize, usize, f64)]) -> Result<Self> {
        let mut cs = Self::trace_only(sys.dims());
        let om = &sys.output;
        let n = cs.basis.nrows();
        if let Some(&(_, i, _)) = means.iter().find(|t| t.1 >= om.m()) {
            return Err(Error::IndexOutOfRange(format!("observable {i} but the map has {}", om.m())));
        }
        if let Some(&(k, i, _)) = means.iter().find(|t| !t.2.is_finite()) {
            return Err(Error::Record(format!("non-finite mean at (k = {k}, i = {i})")));
        }
        let k_max = means.iter().map(|t| t.0).max().unwrap_or(0);
        let mut coords = RMat::zeros(means.len(), n);
        let mut cur = om.rows().clone();
        for k in 0..=k_max {
            let at_k: Vec<usize> = (0..means.len()).filter(|&j| means[j].0 == k).collect();
            if !at_k.is_empty() {
                let proj = linalg::matmul(&cur, &cs.basis);
                for &j in &at_k {
                    let i = means[j].1;
                    for p in 0..n {
                        coords[(j, p)] = proj[(i, p)].re;
                    }
                }
            }
            if k < k_max {
                cur = linalg::matmul(&cur, sys.step.matrix());
            }
        }
        cs.keys = means.iter().map(|t| (t.0, t.1)).collect();
        cs.coords = coords;
        cs.targets = RVec::from_iterator(means.len(), means.iter().map(|t| t.2));
        Ok(cs)
    }

    pub fn from_record(sys: &DiscretizedSystem, record: &MeasurementRecord) -> Result<Self> {
        let means: Vec<_> = record.entries.iter().map(|e| (e.k, e.observable_index, e.mean)).collect();
        Self::from_means(sys, &means)
    }

    /// Uses tr(C_i τ[k]) for every observable and k = 0..outputs.len().
    pub fn from_outputs(sys: &DiscretizedSystem, outputs: &[Operator]) -> Result<Self> {
        let mut means = Vec::new();
        for (k, tau) in outputs.iter().enumerate() {
            if tau.dims() != sys.dims() {
                return Err(Error::Dimension(format!("output {k} has dims {:?}", tau.dims())));
            }
            for (i, v) in sys.output.expectations(tau.matrix()).into_iter().enumerate() {
                means.push((k, i, v));
            }
        }
        Self::from_means(sys, &means)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// (k, observable index) of each constraint.
    pub fn keys(&self) -> &[(usize, usize)] {
        &self.keys
    }

    pub fn targets(&self) -> &RVec {
        &self.targets
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != self.len() {
            return Err(Error::Dimension(format!("{} targets for {} constraints", targets.len(), self.len())));
        }
        let mut c = self.clone();
        c.targets = RVec::from_vec(targets);
        Ok(c)
    }

    /// Keeps the constraints whose index satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&j| keep(self.keys[j].0, self.keys[j].1)).collect();
        let mut c = self.clone();
        c.keys = idx.iter().map(|&j| self.keys[j]).collect();
        c.coords = self.coords.select_rows(idx.iter());
        c.targets = RVec::from_iterator(idx.len(), idx.iter().map(|&j| self.targets[j]));
        c
    }

    /// Stacks the constraints of `other` below these.
    pub fn concat(&self, other: &ConstraintSet) -> Result<Self> {
        if other.dims != self.dims {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let n = self.coords.ncols();
        let rows = self.len() + other.len();
        let mut c = self.clone();
        c.keys.extend_from_slice(&other.keys);
        c.coords = RMat::from_fn(rows, n, |r, p| if r < self.len() { self.coords[(r, p)] } else { other.coords[(r - self.len(), p)] });
        c.targets = RVec::from_iterator(rows, self.targets.iter().chain(other.targets.iter()).copied());
        Ok(c)
    }

    /// Product-basis coordinates tr(P_p ρ).
    pub fn coordinates(&self, rho: &CMat) -> RVec {
        let v = linalg::vec_of(rho);
        (self.basis.adjoint() * v).map(|z| z.re)
    }

    pub fn from_coordinates(&self, x: &RVec) -> CMat {
        let v = &self.basis * x.map(|r| C64::new(r, 0.0));
        linalg::unvec_of(&v, self.dim())
    }

    /// tr(A_j ρ) − b_j.
    pub fn residuals(&self, rho: &CMat) -> RVec {
        &self.coords * self.coordinates(rho) - &self.targets
    }

    /// Constraint matrix without the identity column and shifted targets,
    /// i.e. the system for the traceless part of ρ with tr ρ = 1.
    pub(crate) fn traceless(&self) -> (RMat, RVec) {
        let n = self.coords.ncols();
        let s = 1.0 / (self.dim() as f64).sqrt();
        let m = self.coords.columns(1, n - 1).into_owned();
        let b = &self.targets - self.coords.column(0) * s;
        (m, b)
    }

    pub(crate) fn state_from_traceless(&self, y: &RVec) -> CMat {
        let n = self.coords.ncols();
        let mut x = RVec::zeros(n);
        x[0] = 1.0 / (self.dim() as f64).sqrt();
        x.rows_mut(1, n - 1).copy_from(y);
        self.from_coordinates(&x)
    }

    pub(crate) fn traceless_of(&self, rho: &CMat) -> RVec {
        let x = self.coordinates(rho);
        x.rows(1, x.len() - 1).into_owned()
    }

    /// Hermitian matrix Σ_p y_p P_{p+1} for a traceless coordinate vector.
    pub(crate) fn operator_from_traceless(&self, y: &RVec) -> CMat {
        let n = self.coords.ncols();
        let mut x = RVec::zeros(n);
        x.rows_mut(1, n - 1).copy_from(y);
        linalg::hermitian_part(&self.from_coordinates(&x))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Residual {
    pub k: usize,
    pub observable_index: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub rho0_hat: Operator,
    pub method: Method,
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
    /// S(ρ̂) for gramian and max-entropy, S(ρ̂‖σ) for relative entropy
    pub entropy: f64,
    pub relaxation_level: f64,
    pub solver_iterations: usize,
    pub converged: bool,
    /// sum of |negative eigenvalues| removed by the final PSD projection
    pub clip_magnitude: f64,
    pub min_eigenvalue_before_clip: f64,
    pub gramian_condition: Option<f64>,
    /// weight of the feasibility witness mixed into the solver iterate
    pub witness_weight: f64,
    /// per-iteration optimality measure
    pub trace: Vec<f64>,
}

impl ReconstructionResult {
    pub fn to_json(&self, truth: Option<&Operator>) -> serde_json::Value {
        let dims = self.rho0_hat.dims().to_vec();
        let pb = product_basis(&dims);
        let coeffs: Vec<_> = pb
            .labels
            .iter()
            .zip(pb.coefficients(&self.rho0_hat))
            .filter(|(_, c)| c.norm() > 1e-12)
            .map(|(l, c)| json!([l, c.re]))
            .collect();
        let comparison = truth.map(|t| {
            json!({
                "trace_distance": linalg::trace_distance(self.rho0_hat.matrix(), t.matrix()),
                "fidelity": linalg::fidelity(self.rho0_hat.matrix(), t.matrix()),
            })
        });
        json!({
            "method": self.method,
            "dims": dims,
            "state_pauli_coefficients": coeffs,
            "state_matrix": DenseMatrix::from_cmat(self.rho0_hat.matrix()),
            "entropy": self.entropy,
            "relaxation_level": self.relaxation_level,
            "max_residual": self.max_residual,
            "residuals": self.residuals,
            "clip_magnitude": self.clip_magnitude,
            "min_eigenvalue_before_clip": self.min_eigenvalue_before_clip,
            "gramian_condition": self.gramian_condition,
            "witness_weight": self.witness_weight,
            "solver": {
                "iterations": self.solver_iterations,
                "converged": self.converged,
                "trace": self.trace,
            },
            "comparison": comparison,
        })
    }
}

/// Hermitizes, clips negative eigenvalues and renormalizes the trace.
/// Returns (state, clip magnitude, minimum eigenvalue before clipping).
pub fn physical_projection(a: &CMat) -> (CMat, f64, f64) {
    let (vals, vecs) = linalg::eigh(&linalg::hermitian_part(a));
    let min = vals.first().copied().unwrap_or(0.0);
    let clip: f64 = vals.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let pos: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = pos.iter().sum();
    let pos: Vec<f64> = if total > 0.0 {
        pos.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / vals.len() as f64; vals.len()]
    };
    (linalg::from_spectrum(&pos, &vecs), clip, min)
}

fn residual_table(cs: &ConstraintSet, rho: &CMat) -> (Vec<Residual>, f64) {
    let r = cs.residuals(rho);
    let table = cs
        .keys
        .iter()
        .zip(r.iter())
        .map(|(&(k, i), &value)| Residual { k, observable_index: i, value })
        .collect();
    (table, r.amax())
}

/// Least-squares inversion of the stacked outputs through the SVD of the
/// observability matrix. Factor once, then reuse for many output sequences.
#[derive(Clone, Debug)]
pub struct GramianSolver {
    template: ConstraintSet,
    u: RMat,
    s: RVec,
    v_t: RMat,
    condition: f64,
}

impl GramianSolver {
    /// Prepares the solve for outputs τ[0..=k_max] of every observable.
    pub fn new(sys: &DiscretizedSystem, k_max: usize, policy: &RankPolicy) -> Result<Self> {
        let d = sys.dim();
        let n = d * d;
        let profile = rank_profile(sys, policy);
        if profile.rank() < n {
            return Err(Error::GramianSingular(format!(
                "system is not observable (rank {} < {n})",
                profile.rank()
            )));
        }
        let needed = profile.instants();
        if k_max + 1 < needed {
            return Err(Error::InsufficientHorizon(format!(
                "{} sampling instants given, {needed} needed",
                k_max + 1
            )));
        }
        let m = sys.output.m();
        let means: Vec<_> = (0..=k_max).flat_map(|k| (0..m).map(move |i| (k, i, 0.0))).collect();
        let template = ConstraintSet::from_means(sys, &means)?;
        let svd = linalg::thin_svd(&template.coords);
        let s = svd.singular_values.clone();
        let smax = s.max();
        let threshold = policy.svd_threshold(template.coords.nrows(), n, smax);
        let rank = s.iter().filter(|&&x| x > threshold).count();
        if rank < n {
            return Err(Error::GramianSingular(format!(
                "observability matrix is numerically rank deficient ({rank} of {n} singular values above {threshold:.2e})"
            )));
        }
        let smin = s.min();
        Ok(GramianSolver {
            template,
            u: svd.u.expect("requested"),
            s,
            v_t: svd.v_t.expect("requested"),
            condition: (smax / smin).powi(2),
        })
    }

    /// (σ_max/σ_min)² of the observability gramian.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, outputs: &[Operator]) -> Result<ReconstructionResult> {
        let m = self.template.keys.iter().filter(|k| k.0 == 0).count();
        let k_max = self.template.keys.last().map_or(0, |k| k.0);
        if outputs.len() != k_max + 1 {
            return Err(Error::InsufficientHorizon(format!(
                "solver prepared for {} outputs, {} given",
                k_max + 1,
                outputs.len()
            )));
        }
        let mut b = RVec::zeros(self.template.len());
        for (k, tau) in outputs.iter().enumerate() {
            let c = self.template.coordinates(tau.matrix());
            // tr(C_i τ) in the observables' own basis
            let vals = &self.template.coords.rows(0, m) * c;
            for i in 0..m {
                b[k * m + i] = vals[i];
            }
        }
        let cs = ConstraintSet { targets: b, ..self.template.clone() };
        self.solve_constraints(&cs)
    }

    fn solve_constraints(&self, cs: &ConstraintSet) -> Result<ReconstructionResult> {
        let solve = |r: &RVec| {
            let utr = self.u.transpose() * r;
            self.v_t.transpose() * RVec::from_iterator(utr.len(), utr.iter().zip(self.s.iter()).map(|(a, s)| a / s))
        };
        let mut x = solve(&cs.targets);
        for _ in 0..2 {
            x += solve(&(&cs.targets - &cs.coords * &x));
        }
        let raw = cs.from_coordinates(&x);
        let (rho, clip, min) = physical_projection(&raw);
        let (residuals, max_residual) = residual_table(cs, &rho);
        Ok(ReconstructionResult {
            entropy: linalg::von_neumann_entropy(&rho),
            rho0_hat: Operator::new(cs.dims.clone(), rho)?.with_role(Role::Density)?,
            method: Method::Gramian,
            residuals,
            max_residual,
            relaxation_level: 0.0,
            solver_iterations: 1,
            converged: true,
            clip_magnitude: clip,
            min_eigenvalue_before_clip: min,
            gramian_condition: Some(self.condition),
            witness_weight: 0.0,
            trace: vec![],
        })
    }
}

/// r[0] = (Ô†Ô)⁻¹Ô† y as an SVD least-squares solve, for outputs τ[0..].
pub fn gramian_reconstruct(sys: &DiscretizedSystem, outputs: &[Operator]) -> Result<ReconstructionResult> {
    gramian_reconstruct_with(sys, outputs, &RankPolicy::default())
}

pub fn gramian_reconstruct_with(sys: &DiscretizedSystem, outputs: &[Operator], policy: &RankPolicy) -> Result<ReconstructionResult> {
    if outputs.is_empty() {
        return Err(Error::InsufficientHorizon("no outputs given".into()));
    }
    GramianSolver::new(sys, outputs.len() - 1, policy)?.solve(outputs)
}

/// Outcome of the relaxation sweep.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub epsilon: f64,
    /// index into the schedule
    pub level: usize,
    /// a density operator satisfying the relaxed constraints
    pub witness: CMat,
    pub max_violation: f64,
}

/// Sweeps `schedule` (ascending) and returns the first ε for which some
/// density operator satisfies |tr(A_j ρ) − b_j| ≤ ε for every j.
pub fn relax_constraints(cs: &ConstraintSet, schedule: &[f64]) -> Result<Relaxation> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty relaxation schedule".into()));
    }
    if schedule.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidArgument("relaxation levels must be finite and non-negative".into()));
    }
    let d = cs.dim();
    if cs.is_empty() {
        return Ok(Relaxation {
            epsilon: schedule[0],
            level: 0,
            witness: linalg::identity(d) * C64::new(1.0 / d as f64, 0.0),
            max_violation: 0.0,
        });
    }
    let (m, b) = cs.traceless();
    let ls = maxent::least_squares(&m, &b);
    let ls_res = &m * &ls - &b;
    // min over all x of ‖r‖∞ is at least ‖r_LS‖₂/√n
    let lower = ls_res.norm() / (b.len() as f64).sqrt();

    let mut best: Option<(f64, CMat)> = None;
    for (level, &eps) in schedule.iter().enumerate() {
        if lower > eps + FEASIBILITY_TOL {
            continue;
        }
        if let Some(w) = feasibility_witness(cs, &m, &b, &ls, eps) {
            let viol = cs.residuals(&w).amax();
            if viol <= eps + FEASIBILITY_TOL {
                return Ok(Relaxation { epsilon: eps, level, witness: w, max_violation: viol });
            }
            if best.as_ref().is_none_or(|(v, _)| viol < *v) {
                best = Some((viol, w));
            }
        }
    }
    let probe = best.map(|(_, w)| w).unwrap_or_else(|| {
        let (rho, _, _) = physical_projection(&cs.state_from_traceless(&ls));
        rho
    });
    let r = cs.residuals(&probe);
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[b].abs().total_cmp(&r[a].abs()));
    let worst: Vec<String> = order
        .iter()
        .take(5)
        .map(|&j| format!("(k = {}, i = {}): {:+.3e}", cs.keys[j].0, cs.keys[j].1, r[j]))
        .collect();
    Err(Error::Infeasible(format!(
        "largest level {:.3e}, least-squares bound {lower:.3e}; {}",
        schedule[schedule.len() - 1],
        worst.join(", ")
    )))
}

fn feasibility_witness(cs: &ConstraintSet, m: &RMat, b: &RVec, ls: &RVec, eps: f64) -> Option<CMat> {
    let (proj, _, _) = physical_projection(&cs.state_from_traceless(ls));
    if cs.residuals(&proj).amax() <= eps + FEASIBILITY_TOL {
        return Some(proj);
    }
    if eps == 0.0 {
        let fam = Family::new(cs, None, 0.0).ok()?;
        let out = maxent::newton(&fam, &SolveOptions::default());
        if cs.residuals(&out.rho).amax() <= FEASIBILITY_TOL {
            return Some(out.rho);
        }
    }
    let start = cs.traceless_of(&proj);
    let y = maxent::hinge_feasibility(cs, m, b, eps, &start, 4000);
    let (rho, _, _) = physical_projection(&cs.state_from_traceless(&y));
    Some(rho)
}

#[derive(Clone, Debug)]
pub struct MaxEntOptions {
    pub prior: Option<Operator>,
    /// optimality tolerance of the dual solver
    pub tol: f64,
    pub max_iter: usize,
    pub schedule: Vec<f64>,
}

impl Default for MaxEntOptions {
    fn default() -> Self {
        MaxEntOptions { prior: None, tol: 1e-10, max_iter: 200, schedule: DEFAULT_SCHEDULE.to_vec() }
    }
}

/// max S(ρ) (or min S(ρ‖σ) with a prior) subject to the record's
/// constraints, relaxed to the smallest feasible level of the schedule.
pub fn max_entropy_reconstruct(
    sys: &DiscretizedSystem,
    record: &MeasurementRecord,
    prior: Option<&Operator>,
    tol: f64,
) -> Result<ReconstructionResult> {
    let cs = ConstraintSet::from_record(sys, record)?;
    let opts = MaxEntOptions { prior: prior.cloned(), tol, ..MaxEntOptions::default() };
    max_entropy_solve(&cs, &opts)
}

pub fn max_entropy_solve(cs: &ConstraintSet, opts: &MaxEntOptions) -> Result<ReconstructionResult> {
    if let Some(p) = &opts.prior {
        if p.dims() != cs.dims() {
            return Err(Error::Dimension(format!("prior {:?} vs system {:?}", p.dims(), cs.dims())));
        }
    }
    let relax = relax_constraints(cs, &opts.schedule)?;
    let eps = relax.epsilon;
    let solve_opts = SolveOptions { tol: opts.tol, max_iter: opts.max_iter, ..SolveOptions::default() };
    let fam = Family::new(cs, opts.prior.as_ref(), eps)?;
    let out = if eps == 0.0 {
        maxent::newton(&fam, &solve_opts)
    } else {
        maxent::fista_l1(&fam, eps, &SolveOptions { max_iter: 20000, ..solve_opts })
    };

    // mix in the witness when the iterate is not feasible enough
    let limit = eps + FEASIBILITY_TOL.max(opts.tol);
    let r_sol = cs.residuals(&out.rho);
    let r_wit = cs.residuals(&relax.witness);
    let t = maxent::minimal_blend(&r_sol, &r_wit, limit);
    let mixed = &out.rho * C64::new(1.0 - t, 0.0) + &relax.witness * C64::new(t, 0.0);
    let (rho, clip, min) = physical_projection(&mixed);
    let (residuals, max_residual) = residual_table(cs, &rho);
    let (method, entropy) = match &opts.prior {
        Some(p) => (Method::RelativeEntropy, maxent::relative_entropy(&rho, p.matrix())),
        None => (Method::MaxEntropy, linalg::von_neumann_entropy(&rho)),
    };
    Ok(ReconstructionResult {
        rho0_hat: Operator::new(cs.dims.clone(), rho)?.with_role(Role::Density)?,
        method,
        residuals,
        max_residual,
        entropy,
        relaxation_level: eps,
        solver_iterations: out.iterations,
        converged: out.converged,
        clip_magnitude: clip,
        min_eigenvalue_before_clip: min,
        gramian_condition: None,
        witness_weight: t,
        trace: out.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn physical_projection_clips_and_normalizes() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.7, 0.0),
            C64::new(0.5, 0.0),
            C64::new(-0.2, 0.0),
        ]));
        let (rho, clip, min) = physical_projection(&a);
        assert!((clip - 0.2).abs() < 1e-15);
        assert!((min + 0.2).abs() < 1e-15);
        assert!((linalg::trace(&rho).re - 1.0).abs() < 1e-15);
        assert!(linalg::eigvalsh(&rho)[0] >= 0.0);
    }

    #[test]
    fn trace_only_constraints_have_zero_residual() {
        let cs = ConstraintSet::trace_only(&[2, 2]);
        assert!(cs.is_empty());
        let r = relax_constraints(&cs, &DEFAULT_SCHEDULE).unwrap();
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn coordinates_round_trip() {
        let cs = ConstraintSet::trace_only(&[2, 3]);
        let rho = Operator::maximally_mixed(&[2, 3]);
        let x = cs.coordinates(rho.matrix());
        assert!((x[0] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!(linalg::frobenius(&(cs.from_coordinates(&x) - rho.matrix())) < 1e-15);
    }
}
