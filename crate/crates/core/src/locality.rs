//! Neighborhood structures and the local output map 𝒞[ρ] = Σ_i C_i tr(C_i ρ).

use serde::{Deserialize, Serialize};

use crate::dynamics::{SuperKind, Superoperator};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::operator::{self, site_basis, Operator, Role};

/// Threshold for treating two observables as the same direction.
pub const DEDUP_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureFlags {
    pub covering: bool,
    pub nontrivial: bool,
    pub connected: bool,
}

/// A list of 1-based subsystem index sets over N subsystems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodStructure {
    n_subsystems: usize,
    neighborhoods: Vec<Vec<usize>>,
    #[serde(skip)]
    flags: Option<StructureFlags>,
}

impl NeighborhoodStructure {
    /// Validates ranges and duplicates; each neighborhood is stored sorted.
    pub fn new(n_subsystems: usize, neighborhoods: Vec<Vec<usize>>) -> Result<Self> {
        if n_subsystems == 0 {
            return Err(Error::InvalidStructure("no subsystems".into()));
        }
        let mut sorted = Vec::with_capacity(neighborhoods.len());
        for (k, nb) in neighborhoods.into_iter().enumerate() {
            if nb.is_empty() {
                return Err(Error::InvalidStructure(format!("neighborhood {} is empty", k + 1)));
            }
            if let Some(&q) = nb.iter().find(|&&q| q == 0 || q > n_subsystems) {
                return Err(Error::IndexOutOfRange(format!(
                    "neighborhood {} contains index {q}, valid range is 1..={n_subsystems}",
                    k + 1
                )));
            }
            let mut s = nb.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != nb.len() {
                return Err(Error::InvalidStructure(format!(
                    "neighborhood {} repeats an index: {nb:?}",
                    k + 1
                )));
            }
            sorted.push(s);
        }
        let mut ns = NeighborhoodStructure { n_subsystems, neighborhoods: sorted, flags: None };
        ns.flags = Some(compute_flags(&ns));
        Ok(ns)
    }

    /// Nearest-neighbour chain {{1,2},{2,3},…,{N−1,N}}.
    pub fn chain(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidStructure("a chain needs at least two subsystems".into()));
        }
        Self::new(n, (1..n).map(|q| vec![q, q + 1]).collect())
    }

    pub fn n_subsystems(&self) -> usize {
        self.n_subsystems
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }

    pub fn len(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighborhoods.is_empty()
    }

    /// The k-th neighborhood, 1-based.
    pub fn get(&self, k: usize) -> Result<&[usize]> {
        if k == 0 || k > self.neighborhoods.len() {
            return Err(Error::IndexOutOfRange(format!(
                "neighborhood {k} not in 1..={}",
                self.neighborhoods.len()
            )));
        }
        Ok(&self.neighborhoods[k - 1])
    }

    /// Keeps only the listed neighborhoods (1-based), in the given order.
    pub fn select(&self, ks: &[usize]) -> Result<Self> {
        let picked = ks.iter().map(|&k| self.get(k).map(<[usize]>::to_vec)).collect::<Result<_>>()?;
        Self::new(self.n_subsystems, picked)
    }

    pub fn flags(&self) -> StructureFlags {
        self.flags.unwrap_or_else(|| compute_flags(self))
    }

    pub fn is_covering(&self) -> bool {
        self.flags().covering
    }

    pub fn is_nontrivial(&self) -> bool {
        self.flags().nontrivial
    }

    pub fn is_connected(&self) -> bool {
        self.flags().connected
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

fn compute_flags(ns: &NeighborhoodStructure) -> StructureFlags {
    let n = ns.n_subsystems;
    let mut seen = vec![false; n];
    let mut parent: Vec<usize> = (0..n).collect();
    for nb in &ns.neighborhoods {
        for &q in nb {
            seen[q - 1] = true;
        }
        for w in nb.windows(2) {
            let (a, b) = (find(&mut parent, w[0] - 1), find(&mut parent, w[1] - 1));
            parent[a] = b;
        }
    }
    let covering = seen.iter().all(|&s| s);
    let nontrivial = !ns.neighborhoods.iter().any(|nb| nb.len() == n);
    let root = find(&mut parent, 0);
    let connected = covering && (0..n).all(|q| find(&mut parent, q) == root);
    StructureFlags { covering, nontrivial, connected }
}

pub fn check_structure(ns: &NeighborhoodStructure) -> StructureFlags {
    ns.flags()
}

/// The deduplicated local observables {C_i} together with their vectorized
/// rows vec(C_i)†.
#[derive(Clone, Debug)]
pub struct OutputMap {
    dims: Vec<usize>,
    observables: Vec<Operator>,
    labels: Vec<String>,
    sources: Vec<usize>,
    rows: CMat,
    structure: Option<NeighborhoodStructure>,
}

impl OutputMap {
    /// Builds a map from arbitrary Hermitian observables. They are
    /// orthonormalized in order; directions already spanned are dropped.
    pub fn from_observables(dims: &[usize], observables: Vec<Operator>, labels: Option<Vec<String>>) -> Result<Self> {
        let labels = labels.unwrap_or_else(|| (1..=observables.len()).map(|i| format!("C{i}")).collect());
        if labels.len() != observables.len() {
            return Err(Error::Dimension(format!("{} labels for {} observables", labels.len(), observables.len())));
        }
        let mut acc = Accumulator::new(dims);
        for (op, label) in observables.into_iter().zip(labels) {
            if op.dims() != dims {
                return Err(Error::Dimension(format!("observable dims {:?} vs system {:?}", op.dims(), dims)));
            }
            if !op.is_hermitian() {
                return Err(Error::NonHermitian(format!("observable {label} is not Hermitian")));
            }
            acc.push(op.into_matrix(), label, 0);
        }
        acc.finish(dims, None)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// D = ∏ d_q.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Number of distinct observables m.
    pub fn m(&self) -> usize {
        self.observables.len()
    }

    pub fn observables(&self) -> &[Operator] {
        &self.observables
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// 1-based neighborhood that first contributed each observable (0 when
    /// the map was built from an explicit list).
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn structure(&self) -> Option<&NeighborhoodStructure> {
        self.structure.as_ref()
    }

    /// m × D² matrix whose i-th row is vec(C_i)†.
    pub fn rows(&self) -> &CMat {
        &self.rows
    }

    /// Ĉ = Σ_i vec(C_i) vec(C_i)†.
    pub fn projector(&self) -> Superoperator {
        let v = self.rows.adjoint();
        let m = linalg::matmul(&v, &self.rows);
        Superoperator::from_parts(m, SuperKind::Output, self.dims.clone())
    }

    /// tr(C_i ρ) for every observable.
    pub fn expectations(&self, rho: &CMat) -> Vec<f64> {
        let r = linalg::vec_of(rho);
        (&self.rows * r).iter().map(|z| z.re).collect()
    }

    /// 𝒞[A] = Σ_i C_i tr(C_i A).
    pub fn apply(&self, a: &Operator) -> Result<Operator> {
        if a.dims() != self.dims.as_slice() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", a.dims(), self.dims)));
        }
        let coeffs = &self.rows * linalg::vec_of(a.matrix());
        Operator::new(self.dims.clone(), self.combine(coeffs.as_slice()))
    }

    /// Σ_i c_i C_i.
    pub fn combine(&self, coeffs: &[C64]) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (c, op) in coeffs.iter().zip(&self.observables) {
            out += op.matrix() * *c;
        }
        out
    }
}

struct Accumulator {
    vecs: Vec<CVec>,
    observables: Vec<CMat>,
    labels: Vec<String>,
    sources: Vec<usize>,
    d: usize,
}

impl Accumulator {
    fn new(dims: &[usize]) -> Self {
        Accumulator {
            vecs: Vec::new(),
            observables: Vec::new(),
            labels: Vec::new(),
            sources: Vec::new(),
            d: dims.iter().product(),
        }
    }

    fn push(&mut self, op: CMat, label: String, source: usize) {
        let n0 = linalg::frobenius(&op);
        if n0 == 0.0 {
            return;
        }
        let mut v = linalg::vec_of(&op).unscale(n0);
        let mut overlap: f64 = 0.0;
        for _ in 0..2 {
            for w in &self.vecs {
                let c = w.dotc(&v);
                overlap = overlap.max(c.norm());
                v.axpy(-c, w, linalg::ONE);
            }
        }
        let nr = v.norm();
        if nr <= DEDUP_TOL {
            return;
        }
        let mat = if overlap <= DEDUP_TOL {
            op.unscale(n0)
        } else {
            linalg::hermitian_part(&linalg::unvec_of(&v.unscale(nr), self.d))
        };
        self.vecs.push(linalg::vec_of(&mat));
        self.observables.push(mat);
        self.labels.push(label);
        self.sources.push(source);
    }

    fn finish(self, dims: &[usize], structure: Option<NeighborhoodStructure>) -> Result<OutputMap> {
        if self.observables.is_empty() {
            return Err(Error::InvalidStructure("output map has no observables".into()));
        }
        let m = self.vecs.len();
        let d2 = self.d * self.d;
        let rows = CMat::from_fn(m, d2, |i, j| self.vecs[i][j].conj());
        let observables = self
            .observables
            .into_iter()
            .map(|a| Operator::new(dims.to_vec(), a).and_then(|o| o.with_role(Role::Observable)))
            .collect::<Result<_>>()?;
        Ok(OutputMap {
            dims: dims.to_vec(),
            observables,
            labels: self.labels,
            sources: self.sources,
            rows,
            structure,
        })
    }
}

/// Union over neighborhoods of the local Hermitian product basis, embedded
/// with normalized identities elsewhere; elements shared by overlapping
/// neighborhoods appear once.
///
/// Non-covering structures are rejected unless `allow_partial` is set.
pub fn build_output_map(ns: &NeighborhoodStructure, dims: &[usize], allow_partial: bool) -> Result<OutputMap> {
    if ns.is_empty() {
        return Err(Error::InvalidStructure("empty neighborhood structure".into()));
    }
    if dims.len() != ns.n_subsystems() {
        return Err(Error::Dimension(format!(
            "{} subsystem dims for a structure over {} subsystems",
            dims.len(),
            ns.n_subsystems()
        )));
    }
    if !allow_partial && !ns.is_covering() {
        return Err(Error::InvalidStructure(
            "structure does not cover every subsystem (pass allow_partial to permit)".into(),
        ));
    }
    let site: Vec<Vec<(String, CMat)>> = dims.iter().map(|&d| site_basis(d)).collect();
    let qubits = dims.iter().all(|&d| d == 2);
    let mut acc = Accumulator::new(dims);
    for (k, nb) in ns.neighborhoods().iter().enumerate() {
        let sizes: Vec<usize> = nb.iter().map(|&q| dims[q - 1] * dims[q - 1]).collect();
        let total: usize = sizes.iter().product();
        for idx in 0..total {
            let mut digits = vec![0usize; dims.len()];
            let mut rem = idx;
            for (pos, &q) in nb.iter().enumerate().rev() {
                digits[q - 1] = rem % sizes[pos];
                rem /= sizes[pos];
            }
            let mut mat = site[0][digits[0]].1.clone();
            let mut label = site[0][digits[0]].0.clone();
            for q in 1..dims.len() {
                mat = linalg::kron(&mat, &site[q][digits[q]].1);
                if !qubits {
                    label.push('.');
                }
                label.push_str(&site[q][digits[q]].0);
            }
            acc.push(mat, label, k + 1);
        }
    }
    acc.finish(dims, Some(ns.clone()))
}

/// A unit-norm traceless product operator E = E₁ ⊗ … ⊗ E_N with 𝒞[E] = 0.
pub fn kernel_witness(om: &OutputMap, dims: &[usize]) -> Result<Operator> {
    if dims != om.dims() {
        return Err(Error::Dimension(format!("{dims:?} vs output map {:?}", om.dims())));
    }
    if let Some(ns) = om.structure() {
        if !ns.is_nontrivial() {
            return Err(Error::TrivialStructure);
        }
    }
    let factors = dims
        .iter()
        .map(|&d| {
            let local = if d == 2 {
                operator::pauli_z()
            } else {
                // last generalized Gell-Mann diagonal
                site_basis(d).pop().expect("d ≥ 2").1
            };
            Operator::new(vec![d], local)
        })
        .collect::<Result<Vec<_>>>()?;
    let e = operator::tensor(&factors)?;
    let e = e.scaled(C64::new(1.0 / e.norm(), 0.0));
    let leak = (om.rows() * linalg::vec_of(e.matrix())).norm();
    if leak > 1e-10 {
        return Err(Error::TrivialStructure);
    }
    e.with_role(Role::Hermitian)
}
