//! Operators on a multipartite Hilbert space ℋ = ⊗_q ℋ_q: tensor products,
//! partial traces, column-stacking vectorization and Hermitian product bases.
//!
//! Subsystems are ordered left to right and addressed with 1-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, I, ONE, ZERO};

/// Absolute tolerance for structural predicates (Hermitian, trace one).
pub const STRUCTURAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    General,
    Hermitian,
    Density,
    Observable,
    Hamiltonian,
    Noise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    data: CMat,
    role: Role,
}

impl Operator {
    pub fn new(dims: Vec<usize>, data: CMat) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("invalid subsystem dims {dims:?}")));
        }
        let d: usize = dims.iter().product();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::Dimension(format!(
                "matrix is {}x{} but dims {:?} require {d}x{d}",
                data.nrows(),
                data.ncols(),
                dims
            )));
        }
        Ok(Operator { dims, data, role: Role::General })
    }

    /// Tags the operator, validating the role's invariants.
    pub fn with_role(mut self, role: Role) -> Result<Self> {
        match role {
            Role::Hermitian | Role::Observable | Role::Hamiltonian => {
                if !self.is_hermitian() {
                    return Err(Error::InvalidArgument(format!("{role:?} operator is not Hermitian")));
                }
            }
            Role::Density => self.check_density()?,
            Role::General | Role::Noise => {}
        }
        self.role = role;
        Ok(self)
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Operator { dims: dims.to_vec(), data: linalg::identity(d), role: Role::Hermitian }
    }

    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        let data = linalg::identity(d) * C64::new(1.0 / d as f64, 0.0);
        Operator { dims: dims.to_vec(), data, role: Role::Density }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) amplitude vector.
    pub fn pure(dims: &[usize], amplitudes: &[C64]) -> Result<Self> {
        let d: usize = dims.iter().product();
        if amplitudes.len() != d {
            return Err(Error::Dimension(format!("{} amplitudes for dimension {d}", amplitudes.len())));
        }
        let v = CVec::from_column_slice(amplitudes);
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::NotPhysical("zero state vector".into()));
        }
        let v = v.unscale(n);
        let data = &v * v.adjoint();
        Operator::new(dims.to_vec(), data)?.with_role(Role::Density)
    }

    /// Computational basis state |b₁…b_N⟩⟨b₁…b_N|.
    pub fn basis_state(dims: &[usize], digits: &[usize]) -> Result<Self> {
        if digits.len() != dims.len() || digits.iter().zip(dims).any(|(&b, &d)| b >= d) {
            return Err(Error::InvalidArgument(format!("basis digits {digits:?} do not fit dims {dims:?}")));
        }
        let d: usize = dims.iter().product();
        let idx = digits.iter().zip(dims).fold(0, |acc, (&b, &dq)| acc * dq + b);
        let mut amps = vec![ZERO; d];
        amps[idx] = ONE;
        Operator::pure(dims, &amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn matrix(&self) -> &CMat {
        &self.data
    }

    pub fn into_matrix(self) -> CMat {
        self.data
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn adjoint(&self) -> Operator {
        Operator { dims: self.dims.clone(), data: self.data.adjoint(), role: self.role }
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.data)
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(&self.data)
    }

    /// tr(A†B).
    pub fn hs_inner(&self, other: &Operator) -> C64 {
        linalg::hs_inner(&self.data, &other.data)
    }

    /// ‖A − A†‖_F < 1e-12·‖A‖_F.
    pub fn is_hermitian(&self) -> bool {
        linalg::is_hermitian(&self.data, 1e-12)
    }

    pub fn is_density(&self) -> bool {
        self.check_density().is_ok()
    }

    fn check_density(&self) -> Result<()> {
        let herm_err = linalg::frobenius(&(&self.data - self.data.adjoint()));
        if herm_err > STRUCTURAL_TOL {
            return Err(Error::NotPhysical(format!("not Hermitian (‖A−A†‖ = {herm_err:.2e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > STRUCTURAL_TOL || tr.im.abs() > STRUCTURAL_TOL {
            return Err(Error::NotPhysical(format!("trace is {tr}")));
        }
        let min_eig = linalg::eigvalsh(&self.data)[0];
        if min_eig < -STRUCTURAL_TOL {
            return Err(Error::NotPhysical(format!("minimum eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }

    pub fn scaled(&self, c: C64) -> Operator {
        Operator { dims: self.dims.clone(), data: &self.data * c, role: Role::General }
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.same_dims(other)?;
        Ok(Operator { dims: self.dims.clone(), data: &self.data + &other.data, role: Role::General })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.same_dims(other)?;
        Ok(Operator { dims: self.dims.clone(), data: &self.data - &other.data, role: Role::General })
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.same_dims(other)?;
        Ok(Operator { dims: self.dims.clone(), data: &self.data * &other.data, role: Role::General })
    }

    fn same_dims(&self, other: &Operator) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    /// (A + A†)/2, tagged Hermitian.
    pub fn hermitized(&self) -> Operator {
        Operator { dims: self.dims.clone(), data: linalg::hermitian_part(&self.data), role: Role::Hermitian }
    }
}

/// Column-stacked operator: entry (i, j) of A is entry j·D + i of the vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Vectorized {
    data: CVec,
    dims: Vec<usize>,
}

impl Vectorized {
    pub fn from_raw(data: CVec, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if data.len() != d * d {
            return Err(Error::Dimension(format!(
                "vector length {} is not D² for D = {d}",
                data.len()
            )));
        }
        Ok(Vectorized { data, dims })
    }

    pub fn data(&self) -> &CVec {
        &self.data
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
}

pub fn vec(a: &Operator) -> Vectorized {
    Vectorized { data: linalg::vec_of(&a.data), dims: a.dims.clone() }
}

pub fn unvec(v: &Vectorized) -> Result<Operator> {
    let d: usize = v.dims.iter().product();
    Operator::new(v.dims.clone(), linalg::unvec_of(&v.data, d))
}

/// Kronecker product in subsystem order.
pub fn tensor(ops: &[Operator]) -> Result<Operator> {
    let (first, rest) = ops.split_first().ok_or(Error::EmptyTensor)?;
    let mut dims = first.dims.clone();
    let mut data = first.data.clone();
    for op in rest {
        dims.extend_from_slice(&op.dims);
        data = linalg::kron(&data, &op.data);
    }
    Operator::new(dims, data)
}

fn digits_of(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for q in (0..dims.len()).rev() {
        out[q] = idx % dims[q];
        idx /= dims[q];
    }
    out
}

fn index_of(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&b, &d)| acc * d + b)
}

fn check_sites(sites: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut s: Vec<usize> = sites.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != sites.len() {
        return Err(Error::IndexOutOfRange(format!("duplicate subsystem index in {sites:?}")));
    }
    if let Some(&bad) = s.iter().find(|&&q| q == 0 || q > n) {
        return Err(Error::IndexOutOfRange(format!("subsystem {bad} not in 1..={n}")));
    }
    Ok(s)
}

/// Reduced operator on ⊗_{q∈keep} ℋ_q (kept subsystems in ascending order).
pub fn partial_trace(a: &Operator, keep: &[usize]) -> Result<Operator> {
    let n = a.n_subsystems();
    let keep = check_sites(keep, n)?;
    if keep.is_empty() {
        return Err(Error::IndexOutOfRange("partial trace must keep at least one subsystem".into()));
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&q| a.dims[q - 1]).collect();
    let traced: Vec<usize> = (1..=n).filter(|q| !keep.contains(q)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&q| a.dims[q - 1]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    let full_index = |kd: &[usize], td: &[usize]| {
        let mut digits = vec![0; n];
        for (pos, &q) in keep.iter().enumerate() {
            digits[q - 1] = kd[pos];
        }
        for (pos, &q) in traced.iter().enumerate() {
            digits[q - 1] = td[pos];
        }
        index_of(&digits, &a.dims)
    };

    let mut out = CMat::zeros(dk, dk);
    for i in 0..dk {
        let di = digits_of(i, &kept_dims);
        for j in 0..dk {
            let dj = digits_of(j, &kept_dims);
            let mut acc = ZERO;
            for t in 0..dt {
                let td = digits_of(t, &traced_dims);
                acc += a.data[(full_index(&di, &td), full_index(&dj, &td))];
            }
            out[(i, j)] = acc;
        }
    }
    Operator::new(kept_dims, out)
}

/// X ⊗ I on the complement: embeds an operator acting on `sites` (ascending
/// order of the local factors) into the full space.
pub fn embed(local: &Operator, sites: &[usize], dims: &[usize]) -> Result<Operator> {
    let n = dims.len();
    let sorted = check_sites(sites, n)?;
    if sorted != sites {
        return Err(Error::InvalidArgument(format!("sites {sites:?} must be ascending")));
    }
    let local_dims: Vec<usize> = sites.iter().map(|&q| dims[q - 1]).collect();
    if local.dims != local_dims {
        return Err(Error::LocalityViolation(format!(
            "operator dims {:?} do not match sites {:?} with dims {:?}",
            local.dims, sites, local_dims
        )));
    }
    let d: usize = dims.iter().product();
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        let di = digits_of(i, dims);
        for j in 0..d {
            let dj = digits_of(j, dims);
            let rest_equal = (1..=n).filter(|q| !sites.contains(q)).all(|q| di[q - 1] == dj[q - 1]);
            if !rest_equal {
                continue;
            }
            let li: Vec<usize> = sites.iter().map(|&q| di[q - 1]).collect();
            let lj: Vec<usize> = sites.iter().map(|&q| dj[q - 1]).collect();
            out[(i, j)] = local.data[(index_of(&li, &local_dims), index_of(&lj, &local_dims))];
        }
    }
    Operator::new(dims.to_vec(), out)
}

pub fn pauli_i() -> CMat {
    linalg::identity(2)
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// σ⁺ = (σ_x + iσ_y)/2 = |0⟩⟨1|.
pub fn sigma_plus() -> CMat {
    (pauli_x() + pauli_y() * I) * C64::new(0.5, 0.0)
}

/// σ⁻ = (σ_x − iσ_y)/2 = |1⟩⟨0|.
pub fn sigma_minus() -> CMat {
    (pauli_x() - pauli_y() * I) * C64::new(0.5, 0.0)
}

/// Hilbert–Schmidt orthonormal Hermitian basis of ℬ(ℂᵈ): I/√d followed by the
/// generalized Gell-Mann matrices scaled by 1/√2 (symmetric, antisymmetric,
/// then diagonal). For d = 2 this is {I, σ_x, σ_y, σ_z}/√2.
pub fn site_basis(d: usize) -> Vec<(String, CMat)> {
    let mut out = Vec::with_capacity(d * d);
    out.push(("I".to_string(), linalg::identity(d) * C64::new(1.0 / (d as f64).sqrt(), 0.0)));
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    if d == 2 {
        out.push(("X".into(), pauli_x() * h));
        out.push(("Y".into(), pauli_y() * h));
        out.push(("Z".into(), pauli_z() * h));
        return out;
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = CMat::zeros(d, d);
            s[(j, k)] = h;
            s[(k, j)] = h;
            out.push((format!("S{}{}", j + 1, k + 1), s));
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut a = CMat::zeros(d, d);
            a[(j, k)] = -I * h;
            a[(k, j)] = I * h;
            out.push((format!("A{}{}", j + 1, k + 1), a));
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = CMat::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = C64::new(norm, 0.0);
        }
        m[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
        out.push((format!("D{l}"), m));
    }
    out
}

#[derive(Clone, Debug)]
pub struct OperatorBasis {
    pub elements: Vec<Operator>,
    pub labels: Vec<String>,
    pub label: String,
    pub hermitian: bool,
}

impl OperatorBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn gram(&self) -> CMat {
        let n = self.elements.len();
        CMat::from_fn(n, n, |i, j| self.elements[i].hs_inner(&self.elements[j]))
    }

    /// max |tr(B_i† B_j) − δ_ij|.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram();
        let n = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// tr(B_p† A) for every basis element.
    pub fn coefficients(&self, a: &Operator) -> Vec<C64> {
        self.elements.iter().map(|b| b.hs_inner(a)).collect()
    }

    /// Σ_p c_p B_p.
    pub fn combine(&self, coeffs: &[C64]) -> Result<Operator> {
        let first = self.elements.first().ok_or_else(|| Error::InvalidArgument("empty basis".into()))?;
        if coeffs.len() != self.elements.len() {
            return Err(Error::Dimension(format!("{} coefficients for {} elements", coeffs.len(), self.len())));
        }
        let mut acc = CMat::zeros(first.dim(), first.dim());
        for (c, b) in coeffs.iter().zip(&self.elements) {
            acc += &b.data * *c;
        }
        Operator::new(first.dims.clone(), acc)
    }
}

/// Normalized product basis over all subsystems: ⊗_q b_{q,j_q}. Labels
/// concatenate site labels (e.g. "IXZY" for qubits), ordered
/// lexicographically with subsystem 1 most significant.
pub fn product_basis(dims: &[usize]) -> OperatorBasis {
    let site: Vec<Vec<(String, CMat)>> = dims.iter().map(|&d| site_basis(d)).collect();
    let sizes: Vec<usize> = dims.iter().map(|d| d * d).collect();
    let total: usize = sizes.iter().product();
    let mut elements = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for idx in 0..total {
        let digits = digits_of(idx, &sizes);
        let mut data = site[0][digits[0]].1.clone();
        let mut label = site[0][digits[0]].0.clone();
        for q in 1..dims.len() {
            data = linalg::kron(&data, &site[q][digits[q]].1);
            if dims.iter().all(|&d| d == 2) {
                label.push_str(&site[q][digits[q]].0);
            } else {
                label.push('.');
                label.push_str(&site[q][digits[q]].0);
            }
        }
        elements.push(Operator { dims: dims.to_vec(), data, role: Role::Observable });
        labels.push(label);
    }
    OperatorBasis { elements, labels, label: "product".into(), hermitian: true }
}

/// The 4ⁿ Pauli strings on n qubits, scaled by 2^{−n/2}.
pub fn pauli_basis(n_qubits: usize) -> OperatorBasis {
    let mut b = product_basis(&vec![2; n_qubits.max(1)]);
    b.label = format!("pauli-{n_qubits}");
    b
}

/// Index of a product-basis element from its per-site digits.
pub fn product_index(digits: &[usize], dims: &[usize]) -> usize {
    let sizes: Vec<usize> = dims.iter().map(|d| d * d).collect();
    index_of(digits, &sizes)
}
