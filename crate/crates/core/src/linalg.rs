//! Dense complex linear-algebra helpers shared by the rest of the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`, stored column-major, which
//! makes column-stacking vectorization a plain copy of the backing slice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Complex product routed through four real GEMMs.
///
/// nalgebra dispatches `f64` products to `matrixmultiply`, which is several
/// times faster than its generic complex kernel at the sizes used here
/// (D² up to a few hundred).
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    if a.nrows() * a.ncols() * b.ncols() < 32 * 32 * 32 {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    join(&re, &im)
}

pub fn split(a: &CMat) -> (RMat, RMat) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

pub fn join(re: &RMat, im: &RMat) -> CMat {
    CMat::from_fn(re.nrows(), re.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Column-stacking: entry (i, j) lands at index j·rows + i.
pub fn vec_of(a: &CMat) -> CVec {
    CVec::from_column_slice(a.as_slice())
}

pub fn unvec_of(v: &CVec, d: usize) -> CMat {
    debug_assert_eq!(v.len(), d * d);
    CMat::from_column_slice(d, d, v.as_slice())
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn is_hermitian(a: &CMat, rel_tol: f64) -> bool {
    let n = frobenius(a);
    frobenius(&(a - a.adjoint())) <= rel_tol * n.max(f64::MIN_POSITIVE)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// tr(A†B).
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(a);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    eigh(a).0
}

/// U f(Λ) U† for Hermitian `a`.
pub fn hermitian_fn(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(a);
    from_spectrum(&vals.iter().map(|&x| f(x)).collect::<Vec<_>>(), &vecs)
}

pub fn from_spectrum(vals: &[f64], vecs: &CMat) -> CMat {
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * vecs.adjoint()
}

/// ½‖A − B‖₁ for Hermitian arguments.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * eigvalsh(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

/// Uhlmann fidelity (tr √(√ρ σ √ρ))².
pub fn fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let sq = hermitian_fn(rho, |x| x.max(0.0).sqrt());
    let inner = &sq * sigma * &sq;
    let t: f64 = eigvalsh(&inner).iter().map(|x| x.max(0.0).sqrt()).sum();
    t * t
}

/// −Σ p log p over the spectrum (natural log).
pub fn von_neumann_entropy(rho: &CMat) -> f64 {
    eigvalsh(rho)
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let s = if a.nrows() > a.ncols() {
        a.clone().qr().r().svd(false, false).singular_values
    } else {
        a.clone().svd(false, false).singular_values
    };
    let mut s: Vec<f64> = s.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Thin SVD of a real matrix. Tall inputs are reduced by a QR factorization
/// first, which keeps the factorization accurate when rows ≫ columns.
pub fn thin_svd(a: &RMat) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    if a.nrows() <= a.ncols() {
        return a.clone().svd(true, true);
    }
    let qr = a.clone().qr();
    let mut svd = qr.r().svd(true, true);
    svd.u = svd.u.map(|u| qr.q() * u);
    svd
}

/// Principal angles (radians, ascending) between span(a) and span(b).
pub fn principal_angles(a: &[CVec], b: &[CVec]) -> Vec<f64> {
    let orth = |vs: &[CVec]| {
        let n = vs.first().map_or(0, |v| v.len());
        let mut basis = RowBasis::new(n);
        for v in vs {
            basis.try_add(v, 1e-12);
        }
        basis
    };
    let (mut qa, mut qb) = (orth(a), orth(b));
    if qa.dim() == 0 || qb.dim() == 0 {
        return Vec::new();
    }
    if qb.dim() > qa.dim() {
        std::mem::swap(&mut qa, &mut qb);
    }
    // cosines from the overlap, sines from what qb leaves outside span(qa);
    // pairing both keeps small angles accurate
    let overlap = CMat::from_fn(qa.dim(), qb.dim(), |i, j| qa.rows()[i].dotc(&qb.rows()[j]));
    let outside = CMat::from_fn(qb.dim(), qb.rows()[0].len(), |i, j| {
        let v = &qb.rows()[i];
        let proj: CVec = qa.rows().iter().fold(CVec::zeros(v.len()), |acc, q| acc + q * q.dotc(v));
        (v - proj)[j]
    });
    let cos = singular_values(&overlap);
    let mut sin = singular_values(&outside);
    sin.sort_by(f64::total_cmp);
    cos.iter().zip(&sin).map(|(c, s)| s.atan2(*c)).collect()
}

/// Euclidean projection of a real vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Nearest density matrix in Frobenius norm.
pub fn project_to_density(a: &CMat) -> CMat {
    let (vals, vecs) = eigh(a);
    from_spectrum(&project_simplex(&vals), &vecs)
}

/// An orthonormal set of complex row vectors grown by modified Gram–Schmidt
/// with one re-orthogonalization pass.
#[derive(Clone, Debug)]
pub struct RowBasis {
    len: usize,
    rows: Vec<CVec>,
}

impl RowBasis {
    pub fn new(len: usize) -> Self {
        RowBasis { len, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[CVec] {
        &self.rows
    }

    /// Residual of `v` after removing its components along the basis
    /// (Hermitian inner product).
    fn residual(&self, v: &CVec) -> CVec {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.rows {
                let c = q.dotc(&r);
                r.axpy(-c, q, ONE);
            }
        }
        r
    }

    /// Normalizes `v`, orthogonalizes it and accepts it when the remaining
    /// norm exceeds `tol`. Returns the accepted unit vector.
    pub fn try_add(&mut self, v: &CVec, tol: f64) -> Option<CVec> {
        assert_eq!(v.len(), self.len);
        let n0 = v.norm();
        if n0 == 0.0 || !n0.is_finite() {
            return None;
        }
        let r = self.residual(&v.unscale(n0));
        let nr = r.norm();
        if nr > tol {
            let q = r.unscale(nr);
            self.rows.push(q.clone());
            Some(q)
        } else {
            None
        }
    }

    /// Largest residual norm of a unit-normalized `v` (0 if in span).
    pub fn distance(&self, v: &CVec) -> f64 {
        let n0 = v.norm();
        if n0 == 0.0 {
            return 0.0;
        }
        self.residual(&v.unscale(n0)).norm()
    }
}

/// Orthonormal real vectors grown by Gram–Schmidt with re-orthogonalization.
#[derive(Clone, Debug)]
pub struct RealBasis {
    pub vectors: Vec<RVec>,
}

impl RealBasis {
    pub fn new() -> Self {
        RealBasis { vectors: Vec::new() }
    }

    pub fn try_add(&mut self, v: &RVec, tol: f64) -> bool {
        let n0 = v.norm();
        if n0 == 0.0 {
            return false;
        }
        let mut r = v.unscale(n0);
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let nr = r.norm();
        if nr > tol {
            self.vectors.push(r.unscale(nr));
            true
        } else {
            false
        }
    }
}

impl Default for RealBasis {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_angles_of_tilted_planes() {
        let e = |i: usize| CVec::from_fn(3, |j, _| if i == j { ONE } else { ZERO });
        for t in [1e-9f64, 1e-3, 0.4] {
            let tilted = e(1) * C64::new(t.cos(), 0.0) + e(2) * C64::new(t.sin(), 0.0);
            let a = principal_angles(&[e(0), e(1)], &[e(0) * I, tilted]);
            assert!(a[0].abs() < 1e-15);
            assert!((a[1] - t).abs() < 1e-15 * (1.0 + t / 1e-9), "{t}: {a:?}");
        }
        assert_eq!(principal_angles(&[e(0)], &[e(0), e(1)]).len(), 1);
    }

    fn sample(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        CMat::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn split_matmul_matches_direct_product() {
        let a = sample(40, 1);
        let b = sample(40, 2);
        let diff = frobenius(&(matmul(&a, &b) - &a * &b));
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn simplex_projection_sums_to_one() {
        let p = project_simplex(&[0.9, 0.5, -0.3, 0.1]);
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert_eq!(project_simplex(&[0.25; 4]), vec![0.25; 4]);
    }

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let a = sample(6, 3);
        let h = hermitian_part(&a);
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(frobenius(&(from_spectrum(&vals, &vecs) - &h)) < 1e-12);
    }

    #[test]
    fn row_basis_rejects_dependent_rows() {
        let mut b = RowBasis::new(3);
        let e0 = CVec::from_vec(vec![ONE, ZERO, ZERO]);
        let e1 = CVec::from_vec(vec![ZERO, I, ZERO]);
        assert!(b.try_add(&e0, 1e-10).is_some());
        assert!(b.try_add(&e1, 1e-10).is_some());
        let mix = &e0 * C64::new(2.0, 1.0) + &e1 * C64::new(0.0, -3.0);
        assert!(b.try_add(&mix, 1e-10).is_none());
        assert_eq!(b.dim(), 2);
    }
}
