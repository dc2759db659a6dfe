//! Lindblad generators in vectorized form, their discretization, and the
//! continuous-time checks tied to sampling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::linalg::{self, CMat, CVec, C64, I};
use crate::locality::{NeighborhoodStructure, OutputMap};
use crate::operator::{self, Operator};

/// Tolerance for trace preservation and Choi positivity.
pub const CPTP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuperKind {
    Generator,
    Step,
    Output,
}

/// A D² × D² matrix acting on column-stacked operators.
#[derive(Clone, Debug)]
pub struct Superoperator {
    matrix: CMat,
    kind: SuperKind,
    dims: Vec<usize>,
}

impl Superoperator {
    pub fn new(matrix: CMat, kind: SuperKind, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if matrix.nrows() != d * d || matrix.ncols() != d * d {
            return Err(Error::Dimension(format!(
                "superoperator is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                d * d,
                d * d
            )));
        }
        Ok(Superoperator { matrix, kind, dims })
    }

    pub(crate) fn from_parts(matrix: CMat, kind: SuperKind, dims: Vec<usize>) -> Self {
        Superoperator { matrix, kind, dims }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn kind(&self) -> SuperKind {
        self.kind
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn apply(&self, a: &Operator) -> Result<Operator> {
        if a.dims() != self.dims.as_slice() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", a.dims(), self.dims)));
        }
        let v = &self.matrix * linalg::vec_of(a.matrix());
        Operator::new(self.dims.clone(), linalg::unvec_of(&v, self.dim()))
    }

    /// The Heisenberg-picture map, matrix M†.
    pub fn adjoint_apply(&self, a: &Operator) -> Result<Operator> {
        if a.dims() != self.dims.as_slice() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", a.dims(), self.dims)));
        }
        let v = self.matrix.adjoint() * linalg::vec_of(a.matrix());
        Operator::new(self.dims.clone(), linalg::unvec_of(&v, self.dim()))
    }

    /// max_j |(vec(I)† M)_j − target_j| where the target is vec(I)† for a
    /// step map and 0 for a generator.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.dim();
        let ones = linalg::vec_of(&linalg::identity(d));
        let row = ones.adjoint() * &self.matrix;
        let target = match self.kind {
            SuperKind::Generator => CVec::zeros(d * d).transpose(),
            _ => ones.adjoint(),
        };
        (row - target).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Choi matrix J = Σ_{ij} |i⟩⟨j| ⊗ ℰ(|i⟩⟨j|); J ⪰ 0 exactly when ℰ is
    /// completely positive.
    pub fn choi(&self) -> CMat {
        let d = self.dim();
        let mut j = CMat::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                // column of M for |a⟩⟨b| is index b·d + a
                let col = self.matrix.column(b * d + a);
                for r in 0..d {
                    for c in 0..d {
                        j[(a * d + r, b * d + c)] = col[c * d + r];
                    }
                }
            }
        }
        j
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        linalg::eigvalsh(&self.choi())[0]
    }

    /// Verifies trace preservation and Choi positivity of a step map.
    pub fn check_cptp(&self) -> Result<()> {
        let tp = self.trace_preservation_error();
        if tp > CPTP_TOL {
            return Err(Error::InvalidArgument(format!("map is not trace preserving (error {tp:.3e})")));
        }
        let min = self.min_choi_eigenvalue();
        if min < -CPTP_TOL {
            return Err(Error::InvalidArgument(format!(
                "map is not completely positive (min Choi eigenvalue {min:.3e})"
            )));
        }
        Ok(())
    }
}

/// A polynomial in the parameter vector α: Σ c · ∏ α_j^{e_j}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub terms: Vec<Monomial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    /// (parameter index, exponent), 0-based indices
    pub powers: Vec<(usize, u32)>,
}

impl Coefficient {
    pub fn constant(c: f64) -> Self {
        Coefficient { terms: vec![Monomial { coeff: c, powers: vec![] }] }
    }

    pub fn param(index: usize) -> Self {
        Self::scaled_param(1.0, index)
    }

    pub fn scaled_param(c: f64, index: usize) -> Self {
        Coefficient { terms: vec![Monomial { coeff: c, powers: vec![(index, 1)] }] }
    }

    pub fn max_param_index(&self) -> Option<usize> {
        self.terms.iter().flat_map(|m| m.powers.iter().map(|p| p.0)).max()
    }

    pub fn eval(&self, alpha: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for m in &self.terms {
            let mut v = m.coeff;
            for &(j, e) in &m.powers {
                let a = alpha.get(j).ok_or_else(|| {
                    Error::IndexOutOfRange(format!("parameter {j} but only {} given", alpha.len()))
                })?;
                v *= a.powi(e as i32);
            }
            acc += v;
        }
        Ok(acc)
    }
}

/// One Hamiltonian or noise term: coefficient(α) · X, with X acting only on
/// the declared neighborhood.
#[derive(Clone, Debug)]
pub struct LindbladTerm {
    pub neighborhood: usize,
    pub coefficient: Coefficient,
    pub label: String,
    op: CMat,
}

impl LindbladTerm {
    pub fn operator(&self) -> &CMat {
        &self.op
    }
}

#[derive(Clone, Debug)]
pub struct LindbladSpec {
    dims: Vec<usize>,
    structure: NeighborhoodStructure,
    hamiltonian: Vec<LindbladTerm>,
    noise: Vec<LindbladTerm>,
    n_params: usize,
}

impl LindbladSpec {
    pub fn new(dims: Vec<usize>, structure: NeighborhoodStructure) -> Result<Self> {
        if dims.len() != structure.n_subsystems() {
            return Err(Error::Dimension(format!(
                "{} dims for {} subsystems",
                dims.len(),
                structure.n_subsystems()
            )));
        }
        Ok(LindbladSpec { dims, structure, hamiltonian: Vec::new(), noise: Vec::new(), n_params: 0 })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn structure(&self) -> &NeighborhoodStructure {
        &self.structure
    }

    pub fn hamiltonian_terms(&self) -> &[LindbladTerm] {
        &self.hamiltonian
    }

    pub fn noise_terms(&self) -> &[LindbladTerm] {
        &self.noise
    }

    /// Length of α expected by [`build_generator`].
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn set_n_params(&mut self, n: usize) -> Result<()> {
        if let Some(need) = self.max_param_index() {
            if need >= n {
                return Err(Error::InvalidArgument(format!("terms reference parameter {need} but n_params = {n}")));
            }
        }
        self.n_params = n;
        Ok(())
    }

    fn max_param_index(&self) -> Option<usize> {
        self.hamiltonian.iter().chain(&self.noise).filter_map(|t| t.coefficient.max_param_index()).max()
    }

    /// Embeds `local` (acting on `sites`, ascending and inside neighborhood
    /// k) into the full space.
    fn local_term(&self, k: usize, sites: &[usize], local: &Operator, coefficient: Coefficient, label: &str) -> Result<LindbladTerm> {
        let nb = self.structure.get(k)?;
        if let Some(q) = sites.iter().find(|q| !nb.contains(q)) {
            return Err(Error::LocalityViolation(format!(
                "term {label} acts on subsystem {q} outside neighborhood {k} = {nb:?}"
            )));
        }
        let op = operator::embed(local, sites, &self.dims)?.into_matrix();
        Ok(self.finish_term(k, op, coefficient, label))
    }

    /// Accepts a full-space operator after checking it acts as the identity
    /// outside neighborhood k.
    fn global_term(&self, k: usize, full: &Operator, coefficient: Coefficient, label: &str) -> Result<LindbladTerm> {
        let nb = self.structure.get(k)?.to_vec();
        if full.dims() != self.dims.as_slice() {
            return Err(Error::Dimension(format!("term {label} has dims {:?}", full.dims())));
        }
        if nb.len() < self.dims.len() {
            let reduced = operator::partial_trace(full, &nb)?;
            let rest: f64 = (1..=self.dims.len()).filter(|q| !nb.contains(q)).map(|q| self.dims[q - 1] as f64).product();
            let rebuilt = operator::embed(&reduced.scaled(C64::new(1.0 / rest, 0.0)), &nb, &self.dims)?;
            let err = linalg::frobenius(&(rebuilt.matrix() - full.matrix()));
            if err > 1e-10 * full.norm().max(1.0) {
                return Err(Error::LocalityViolation(format!(
                    "term {label} acts nontrivially outside neighborhood {k} = {nb:?} (residual {err:.2e})"
                )));
            }
        }
        Ok(self.finish_term(k, full.matrix().clone(), coefficient, label))
    }

    fn finish_term(&self, k: usize, op: CMat, coefficient: Coefficient, label: &str) -> LindbladTerm {
        LindbladTerm { neighborhood: k, coefficient, label: label.to_string(), op }
    }

    fn bump_params(&mut self, c: &Coefficient) {
        if let Some(j) = c.max_param_index() {
            self.n_params = self.n_params.max(j + 1);
        }
    }

    pub fn add_hamiltonian(&mut self, k: usize, sites: &[usize], local: &Operator, coefficient: Coefficient, label: &str) -> Result<()> {
        if !local.is_hermitian() {
            return Err(Error::NonHermitian(format!("Hamiltonian term {label}")));
        }
        let t = self.local_term(k, sites, local, coefficient, label)?;
        self.bump_params(&t.coefficient);
        self.hamiltonian.push(t);
        Ok(())
    }

    pub fn add_hamiltonian_global(&mut self, k: usize, full: &Operator, coefficient: Coefficient, label: &str) -> Result<()> {
        if !full.is_hermitian() {
            return Err(Error::NonHermitian(format!("Hamiltonian term {label}")));
        }
        let t = self.global_term(k, full, coefficient, label)?;
        self.bump_params(&t.coefficient);
        self.hamiltonian.push(t);
        Ok(())
    }

    pub fn add_noise(&mut self, k: usize, sites: &[usize], local: &Operator, coefficient: Coefficient, label: &str) -> Result<()> {
        let t = self.local_term(k, sites, local, coefficient, label)?;
        self.bump_params(&t.coefficient);
        self.noise.push(t);
        Ok(())
    }

    pub fn add_noise_global(&mut self, k: usize, full: &Operator, coefficient: Coefficient, label: &str) -> Result<()> {
        let t = self.global_term(k, full, coefficient, label)?;
        self.bump_params(&t.coefficient);
        self.noise.push(t);
        Ok(())
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() < self.n_params {
            return Err(Error::InvalidArgument(format!(
                "{} parameters required, {} given",
                self.n_params,
                alpha.len()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(())
    }

    /// H(α) = Σ_j c_j(α) H_j.
    pub fn hamiltonian(&self, alpha: &[f64]) -> Result<CMat> {
        self.check_alpha(alpha)?;
        let d = self.dim();
        let mut h = CMat::zeros(d, d);
        for t in &self.hamiltonian {
            h += &t.op * C64::new(t.coefficient.eval(alpha)?, 0.0);
        }
        if !linalg::is_hermitian(&h, 1e-12) {
            return Err(Error::NonHermitian("assembled Hamiltonian".into()));
        }
        Ok(linalg::hermitian_part(&h))
    }

    /// L_k(α) = c_k(α) L_k.
    pub fn noise_operators(&self, alpha: &[f64]) -> Result<Vec<CMat>> {
        self.check_alpha(alpha)?;
        self.noise.iter().map(|t| Ok(&t.op * C64::new(t.coefficient.eval(alpha)?, 0.0))).collect()
    }
}

/// L̂ = −i(I⊗H − Hᵀ⊗I) + Σ_k [L̄_k⊗L_k − ½ I⊗L_k†L_k − ½ (L_k†L_k)ᵀ⊗I].
pub fn generator_matrix(h: &CMat, noise: &[CMat]) -> CMat {
    let d = h.nrows();
    let id = linalg::identity(d);
    let mut l = (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * (-I);
    let half = C64::new(0.5, 0.0);
    for lk in noise {
        let ll = lk.adjoint() * lk;
        l += linalg::kron(&lk.map(|z| z.conj()), lk);
        l -= linalg::kron(&id, &ll) * half;
        l -= linalg::kron(&ll.transpose(), &id) * half;
    }
    l
}

pub fn build_generator(spec: &LindbladSpec, alpha: Option<&[f64]>) -> Result<Superoperator> {
    let alpha = alpha.unwrap_or(&[]);
    let h = spec.hamiltonian(alpha)?;
    let noise = spec.noise_operators(alpha)?;
    Superoperator::new(generator_matrix(&h, &noise), SuperKind::Generator, spec.dims.clone())
}

/// Ê = exp(L̂ Δt).
pub fn discretize(l: &Superoperator, dt: f64) -> Result<Superoperator> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {dt}")));
    }
    if l.kind != SuperKind::Generator {
        return Err(Error::InvalidArgument("discretize expects a generator".into()));
    }
    let e = expm(&(&l.matrix * C64::new(dt, 0.0)))?;
    Ok(Superoperator { matrix: e, kind: SuperKind::Step, dims: l.dims.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AliasingStatus {
    Safe,
    Aliased,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AliasedPair {
    pub first: (f64, f64),
    pub second: (f64, f64),
    /// the integer s with Im(λ_i − λ_j) ≈ 2πs/Δt
    pub winding: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AliasingReport {
    pub status: AliasingStatus,
    pub offending_pairs: Vec<AliasedPair>,
    pub distinct_eigenvalues: usize,
    pub tolerance: f64,
    /// eigenvalue clusters whose geometric multiplicity is below the
    /// algebraic one
    pub defective_clusters: usize,
}

impl AliasingReport {
    pub fn safe(&self) -> bool {
        self.status == AliasingStatus::Safe
    }
}

pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    m.clone().schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

/// Flags pairs of distinct generator eigenvalues whose difference lies on
/// the lattice 2πi s/Δt, s ≠ 0, which the sampled system cannot tell apart.
pub fn aliasing_check(l: &Superoperator, dt: f64) -> Result<AliasingReport> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {dt}")));
    }
    let mut vals = eigenvalues(&l.matrix);
    let radius = vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-8 * radius.max(1.0);

    vals.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for v in vals {
        match clusters.iter_mut().find(|(c, _)| (*c - v).norm() < 10.0 * tol) {
            Some((c, n)) => {
                *c = (*c * C64::new(*n as f64, 0.0) + v) / C64::new(*n as f64 + 1.0, 0.0);
                *n += 1;
            }
            None => clusters.push((v, 1)),
        }
    }

    let n = l.matrix.nrows();
    let mut defective = 0;
    for &(lambda, mult) in clusters.iter().filter(|c| c.1 > 1) {
        let shifted = &l.matrix - CMat::identity(n, n) * lambda;
        let sv = linalg::singular_values(&shifted);
        let cutoff = 1e-6 * radius.max(1.0);
        let geometric = sv.iter().filter(|&&s| s <= cutoff).count();
        if geometric < mult {
            defective += 1;
        }
    }

    let period = 2.0 * PI / dt;
    let mut pairs = Vec::new();
    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            let (a, b) = (clusters[i].0, clusters[j].0);
            if (a.re - b.re).abs() >= tol {
                continue;
            }
            let gap = a.im - b.im;
            let s = (gap / period).round();
            if s != 0.0 && (gap - s * period).abs() < tol {
                pairs.push(AliasedPair { first: (a.re, a.im), second: (b.re, b.im), winding: s as i64 });
            }
        }
    }
    let status = if defective > 0 {
        AliasingStatus::Inconclusive
    } else if pairs.is_empty() {
        AliasingStatus::Safe
    } else {
        AliasingStatus::Aliased
    };
    Ok(AliasingReport { status, offending_pairs: pairs, distinct_eigenvalues: clusters.len(), tolerance: tol, defective_clusters: defective })
}

/// dim span{ (L̂†)ʲ vec(C_i) : j ≥ 0 }.
pub fn continuous_observability_span(l: &Superoperator, om: &OutputMap) -> Result<usize> {
    if l.dims() != om.dims() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", l.dims(), om.dims())));
    }
    let trace = crate::observability::krylov_rows(om.rows(), &l.matrix, crate::observability::KRYLOV_TOL, None);
    Ok(trace.rank())
}

/// The sampled system: step map, output map and sampling time.
#[derive(Clone, Debug)]
pub struct DiscretizedSystem {
    pub step: Superoperator,
    pub output: OutputMap,
    pub dt: f64,
}

impl DiscretizedSystem {
    pub fn new(step: Superoperator, output: OutputMap, dt: f64) -> Result<Self> {
        if step.kind != SuperKind::Step {
            return Err(Error::InvalidArgument("system needs a step map".into()));
        }
        if step.dims() != output.dims() {
            return Err(Error::Dimension(format!("step {:?} vs output {:?}", step.dims(), output.dims())));
        }
        Ok(DiscretizedSystem { step, output, dt })
    }

    pub fn from_spec(spec: &LindbladSpec, alpha: Option<&[f64]>, output: OutputMap, dt: f64) -> Result<Self> {
        let l = build_generator(spec, alpha)?;
        Self::new(discretize(&l, dt)?, output, dt)
    }

    pub fn dims(&self) -> &[usize] {
        self.step.dims()
    }

    pub fn dim(&self) -> usize {
        self.step.dim()
    }

    /// ρ[k] = Êᵏ ρ₀ for k = 0..=k_max, as matrices.
    pub fn evolve(&self, rho0: &CMat, k_max: usize) -> Vec<CMat> {
        let d = self.dim();
        let mut v = linalg::vec_of(rho0);
        let mut out = Vec::with_capacity(k_max + 1);
        out.push(rho0.clone());
        for _ in 0..k_max {
            v = self.step.matrix() * v;
            out.push(linalg::unvec_of(&v, d));
        }
        out
    }
}

/// Convenience: the identity operator of D² (Ê of a zero generator).
pub fn identity_step(dims: &[usize]) -> Superoperator {
    let d: usize = dims.iter().product();
    Superoperator { matrix: CMat::identity(d * d, d * d), kind: SuperKind::Step, dims: dims.to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::operator::{pauli_x, pauli_z, sigma_plus};

    fn qubit_spec() -> LindbladSpec {
        LindbladSpec::new(vec![2], NeighborhoodStructure::new(1, vec![vec![1]]).unwrap()).unwrap()
    }

    fn op1(m: CMat) -> Operator {
        Operator::new(vec![2], m).unwrap()
    }

    #[test]
    fn commutator_spectrum_of_sigma_z() {
        let mut s = qubit_spec();
        s.add_hamiltonian(1, &[1], &op1(pauli_z()), Coefficient::constant(1.0), "Z").unwrap();
        let l = build_generator(&s, None).unwrap();
        let mut ev = eigenvalues(l.matrix());
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        let expect = [C64::new(0.0, -2.0), ZERO, ZERO, C64::new(0.0, 2.0)];
        for (a, b) in ev.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
        assert!(l.trace_preservation_error() < 1e-12);
    }

    #[test]
    fn zero_spec_gives_identity_step() {
        let s = qubit_spec();
        let l = build_generator(&s, None).unwrap();
        assert_eq!(l.matrix(), &CMat::zeros(4, 4));
        let e = discretize(&l, 1.0).unwrap();
        assert_eq!(e.matrix(), &CMat::identity(4, 4));
    }

    #[test]
    fn dephasing_decays_coherences_at_twice_gamma() {
        let gamma: f64 = 0.3;
        let mut s = qubit_spec();
        s.add_noise(1, &[1], &op1(pauli_z()), Coefficient::constant(gamma.sqrt()), "Z").unwrap();
        let l = build_generator(&s, None).unwrap();
        let t = 0.7;
        let e = discretize(&l, t).unwrap();
        let plus = Operator::pure(&[2], &[ONE, ONE]).unwrap();
        let out = e.apply(&plus).unwrap();
        let coh = out.matrix()[(0, 1)].re;
        assert!((coh - 0.5 * (-2.0 * gamma * t).exp()).abs() < 1e-13);
        assert!((out.matrix()[(0, 0)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let mut s = qubit_spec();
        let r = s.add_hamiltonian(1, &[1], &op1(sigma_plus()), Coefficient::constant(1.0), "s+");
        assert!(matches!(r, Err(Error::NonHermitian(_))));
    }

    #[test]
    fn term_outside_neighborhood_rejected() {
        let ns = NeighborhoodStructure::chain(3).unwrap();
        let mut s = LindbladSpec::new(vec![2; 3], ns).unwrap();
        let x = op1(pauli_x());
        assert!(matches!(
            s.add_hamiltonian(1, &[3], &x, Coefficient::constant(1.0), "X3"),
            Err(Error::LocalityViolation(_))
        ));
        let xx = operator::tensor(&[x.clone(), Operator::identity(&[2]), x.clone()]).unwrap();
        assert!(matches!(
            s.add_hamiltonian_global(1, &xx, Coefficient::constant(1.0), "X1X3"),
            Err(Error::LocalityViolation(_))
        ));
        let xi = operator::tensor(&[x.clone(), x, Operator::identity(&[2])]).unwrap();
        assert!(s.add_hamiltonian_global(1, &xi, Coefficient::constant(1.0), "X1X2").is_ok());
    }

    #[test]
    fn hamiltonian_step_is_unitary_conjugation() {
        let mut s = qubit_spec();
        s.add_hamiltonian(1, &[1], &op1(pauli_x() + pauli_z() * C64::new(0.4, 0.0)), Coefficient::constant(0.8), "H")
            .unwrap();
        let dt = 0.9;
        let e = discretize(&build_generator(&s, None).unwrap(), dt).unwrap();
        let h = s.hamiltonian(&[]).unwrap();
        let u = expm(&(h * (-I * dt))).unwrap();
        let direct = linalg::kron(&u.map(|z| z.conj()), &u);
        assert!(linalg::frobenius(&(e.matrix() - direct)) < 1e-12);
        for z in eigenvalues(e.matrix()) {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_step_is_cptp() {
        let mut s = qubit_spec();
        s.add_noise(1, &[1], &op1(sigma_plus()), Coefficient::param(0), "s+").unwrap();
        let l = build_generator(&s, Some(&[1.3])).unwrap();
        let e = discretize(&l, 1.0).unwrap();
        e.check_cptp().unwrap();
        assert!(l.trace_preservation_error() < 1e-12);
    }

    #[test]
    fn polynomial_coefficients() {
        let c = Coefficient {
            terms: vec![
                Monomial { coeff: 2.0, powers: vec![(0, 2)] },
                Monomial { coeff: -1.0, powers: vec![(1, 1)] },
                Monomial { coeff: 0.5, powers: vec![] },
            ],
        };
        assert_eq!(c.eval(&[3.0, 4.0]).unwrap(), 18.0 - 4.0 + 0.5);
        assert!(c.eval(&[1.0]).is_err());
    }

    #[test]
    fn aliasing_detected_at_exact_gap() {
        let mut s = qubit_spec();
        s.add_hamiltonian(1, &[1], &op1(pauli_z()), Coefficient::constant(PI / 2.0), "Z").unwrap();
        let l = build_generator(&s, None).unwrap();
        let r = aliasing_check(&l, 1.0).unwrap();
        assert_eq!(r.status, AliasingStatus::Aliased);
        assert!(!r.offending_pairs.is_empty());
        assert!(aliasing_check(&l, 1.01).unwrap().safe());
    }

    #[test]
    fn zero_generator_is_alias_safe() {
        let l = build_generator(&qubit_spec(), None).unwrap();
        let r = aliasing_check(&l, 1.0).unwrap();
        assert!(r.safe());
        assert_eq!(r.distinct_eigenvalues, 1);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        let l = build_generator(&qubit_spec(), None).unwrap();
        assert!(discretize(&l, 0.0).is_err());
        assert!(discretize(&l, -1.0).is_err());
    }
}
